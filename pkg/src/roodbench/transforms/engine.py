"""Severity-driven dispatch, seeding, and label co-transformation.

Applying a transform happens in two steps. :func:`realize` consumes the
random stream and returns every random choice as a small JSON-friendly dict
(angles, axis picks, coefficients, sub-seeds). :func:`apply_realized` is then
a pure function of the image and that dict. Image and label share one
realization, which is what keeps their geometry identical.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from ..volume import InterpolationMode, LabelVolume, Volume, VolumeError
from . import intensity, kspace, spatial
from .severity import (
    NUM_LEVELS,
    SPATIAL_KINDS,
    ConfigError,
    SeverityTable,
    TransformKind,
    validate_params,
)

__all__ = [
    "TransformSpec",
    "derive_seed",
    "fnv1a_64",
    "resolve_params",
    "realize",
    "apply_realized",
    "apply",
    "apply_with_record",
    "co_transform_label",
]

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def derive_seed(global_seed: int, sample_id: str, kind: str, severity: int) -> int:
    """Stable 64-bit seed for one (sample, transform, severity) cell.

    FNV-1a over the UTF-8 text ``"{global_seed}:{sample_id}:{kind}:{severity}"``.
    """
    text = f"{int(global_seed)}:{sample_id}:{kind}:{int(severity)}"
    return fnv1a_64(text.encode("utf-8"))


@dataclass(frozen=True)
class TransformSpec:
    """One transform application: a table severity (0..5) or explicit parameters, plus a seed."""

    kind: TransformKind
    severity: Optional[int] = None
    params: Optional[Mapping[str, float]] = None
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TransformKind(self.kind))
        if (self.severity is None) == (self.params is None):
            raise ConfigError("give exactly one of severity or params")
        if self.severity is not None and not 0 <= int(self.severity) <= NUM_LEVELS:
            raise ConfigError(f"severity must be in 0..{NUM_LEVELS}, got {self.severity}")
        if self.params is not None:
            object.__setattr__(self, "params", validate_params(self.kind, self.params))
        if not 0 <= int(self.seed) <= _MASK64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def is_noop(self) -> bool:
        return self.severity == 0


def resolve_params(spec: TransformSpec, table: SeverityTable) -> Dict[str, float]:
    if spec.params is not None:
        return dict(spec.params)
    return table.params(spec.kind, int(spec.severity))


def _subseed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2 ** 63))


def realize(kind: TransformKind | str, params: Mapping[str, float], grid: Volume | LabelVolume,
            rng: np.random.Generator) -> Dict[str, Any]:
    """Draw every random choice the transform needs; the result fully determines the output."""
    kind = TransformKind(kind)
    p = dict(params)
    if kind is TransformKind.NOISE:
        return {"sigma_ratio": p["sigma_ratio"], "noise_seed": _subseed(rng)}
    if kind in (TransformKind.GAMMA_COMPRESSION, TransformKind.GAMMA_EXPANSION):
        return {"gamma": p["gamma"]}
    if kind is TransformKind.SMOOTHING:
        return {"sigma_mm": p["sigma_mm"]}
    if kind is TransformKind.BIAS_FIELD:
        return intensity.sample_bias_coefficients(p["coeff_bound"], rng)
    if kind is TransformKind.AFFINE:
        return spatial.sample_rigid(p["theta_deg"], p["trans_mm"], rng)
    if kind is TransformKind.ELASTIC_DEFORMATION:
        return {"disp_mm": p["disp_mm"], "control_seed": _subseed(rng)}
    if kind is TransformKind.DOWNSAMPLE_ISO:
        return {"factor": p["factor"], "axes": [0, 1, 2]}
    if kind is TransformKind.DOWNSAMPLE_ANISO:
        return {"factor": p["factor"], "axes": [int(rng.integers(3))]}
    if kind is TransformKind.GHOSTING:
        return kspace.sample_ghosting(grid, int(p["num_ghosts"]), rng)
    if kind is TransformKind.RANDOM_MOTION:
        return kspace.sample_motion(grid, int(p["num_segments"]), p["theta_deg"], p["trans_mm"], rng)
    raise AssertionError(kind)


def apply_realized(kind: TransformKind | str, realized: Mapping[str, Any], v: Volume,
                   mode: InterpolationMode | str = InterpolationMode.LINEAR) -> Volume:
    kind = TransformKind(kind)
    r = realized
    if kind is TransformKind.NOISE:
        return intensity.apply_noise(v, r["sigma_ratio"], np.random.default_rng(r["noise_seed"]))
    if kind in (TransformKind.GAMMA_COMPRESSION, TransformKind.GAMMA_EXPANSION):
        return intensity.apply_gamma(v, r["gamma"])
    if kind is TransformKind.SMOOTHING:
        return intensity.apply_smoothing(v, r["sigma_mm"])
    if kind is TransformKind.BIAS_FIELD:
        return intensity.bias_field_from_coefficients(v, r["coefficients"])
    if kind is TransformKind.AFFINE:
        return spatial.warp_affine(v, spatial.rotation_matrix(r["angles_deg"]), r["trans_mm"], mode)
    if kind is TransformKind.ELASTIC_DEFORMATION:
        control = spatial.sample_control_displacements(
            r["disp_mm"], np.random.default_rng(r["control_seed"]))
        return spatial.warp_elastic(v, control, mode)
    if kind in (TransformKind.DOWNSAMPLE_ISO, TransformKind.DOWNSAMPLE_ANISO):
        return spatial.apply_downsample(v, r["factor"], r["axes"])
    if kind is TransformKind.GHOSTING:
        return kspace.ghosting_from_realized(v, r["num_ghosts"], r["axis"])
    if kind is TransformKind.RANDOM_MOTION:
        return kspace.motion_from_realized(v, r["axis"], r["cuts"], r["angles_deg"], r["trans_mm"])
    raise AssertionError(kind)


def apply_with_record(spec: TransformSpec, table: SeverityTable, v: Volume
                      ) -> Tuple[Volume, Dict[str, Any]]:
    """Apply ``spec`` and also return the realized random choices."""
    if spec.is_noop:
        return v, {}
    rng = np.random.default_rng(int(spec.seed))
    realized = realize(spec.kind, resolve_params(spec, table), v, rng)
    return apply_realized(spec.kind, realized, v), realized


def apply(spec: TransformSpec, table: SeverityTable, v: Volume) -> Volume:
    return apply_with_record(spec, table, v)[0]


def warp_label(kind: TransformKind, realized: Mapping[str, Any], label: LabelVolume
               ) -> Tuple[LabelVolume, np.ndarray]:
    """Warp a mask as a float image and re-binarize at 0.5; also returns the float field."""
    warped = apply_realized(kind, realized, label.as_volume(), InterpolationMode.LINEAR).data
    return LabelVolume.like(label, warped >= 0.5), warped


def co_transform_label(spec: TransformSpec, table: SeverityTable, label: LabelVolume,
                       image: Volume | None = None) -> LabelVolume:
    """Transform a ground-truth mask consistently with ``apply(spec, table, image)``.

    Only geometric transforms move the mask; all others return it unchanged.
    """
    if image is not None and not label.same_grid(image):
        raise VolumeError(f"label grid {label.shape} does not match image grid {image.shape}")
    if spec.is_noop or spec.kind not in SPATIAL_KINDS:
        return label
    rng = np.random.default_rng(int(spec.seed))
    realized = realize(spec.kind, resolve_params(spec, table), label, rng)
    return warp_label(spec.kind, realized, label)[0]
