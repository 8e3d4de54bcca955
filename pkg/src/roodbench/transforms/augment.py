"""Randomized transform parameters for training-time augmentation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from .engine import TransformSpec
from .severity import (
    NOOP_PARAMS,
    PARAM_FIELDS,
    ConfigError,
    SeverityTable,
    TransformKind,
    validate_params,
)

__all__ = ["AugmentationPolicy", "sample_augmentation"]

_INTEGER = {"num_ghosts", "num_segments"}


@dataclass(frozen=True)
class AugmentationPolicy:
    """Fire with probability ``probability``; then pick one of ``kinds`` uniformly.

    ``max_params`` holds the strongest parameter set per kind; missing kinds
    fall back to severity 5 of the default table. A single-kind list is the
    single-transform scheme.
    """

    probability: float
    kinds: Sequence[TransformKind]
    max_params: Mapping[TransformKind, Mapping[str, float]] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ConfigError(f"probability must be in [0, 1], got {self.probability}")
        kinds = tuple(TransformKind(k) for k in self.kinds)
        if not kinds:
            raise ConfigError("augmentation needs at least one transform kind")
        table = SeverityTable()
        maxima = {}
        for kind in kinds:
            given = {TransformKind(k): v for k, v in self.max_params.items()}.get(kind)
            maxima[kind] = validate_params(kind, given) if given is not None else table.max_params(kind)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "max_params", maxima)

    @classmethod
    def single(cls, kind: TransformKind | str, probability: float,
               max_params: Optional[Mapping[str, float]] = None, seed: int = 0) -> "AugmentationPolicy":
        kind = TransformKind(kind)
        return cls(probability, [kind], {kind: max_params} if max_params else {}, seed)

    @classmethod
    def multi(cls, probability: float, kinds: Sequence[TransformKind | str] = tuple(TransformKind),
              max_params: Optional[Mapping] = None, seed: int = 0) -> "AugmentationPolicy":
        return cls(probability, list(kinds), dict(max_params or {}), seed)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def sample_augmentation(policy: AugmentationPolicy, rng: np.random.Generator
                        ) -> Optional[TransformSpec]:
    """One augmentation draw: ``None``, or a spec with explicit uniformly sampled parameters."""
    if rng.random() >= policy.probability:
        return None
    kind = policy.kinds[int(rng.integers(len(policy.kinds)))]
    noop = NOOP_PARAMS[kind]
    top = policy.max_params[kind]
    params: Dict[str, float] = {}
    for name in PARAM_FIELDS[kind]:
        lo, hi = noop[name], top[name]
        if name in _INTEGER:
            params[name] = int(rng.integers(min(lo, hi), max(lo, hi) + 1))
        else:
            params[name] = float(rng.uniform(min(lo, hi), max(lo, hi)))
    return TransformSpec(kind, params=params, seed=int(rng.integers(0, 2 ** 63)))
