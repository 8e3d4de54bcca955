"""Transform catalogue and the five-level severity table."""
from __future__ import annotations

import copy
import enum
import hashlib
import json
import os
from typing import Any, Dict, List, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

__all__ = [
    "TransformKind",
    "SPATIAL_KINDS",
    "SeverityTable",
    "ConfigError",
    "DEFAULT_TABLE",
    "NOOP_PARAMS",
    "PARAM_FIELDS",
]

NUM_LEVELS = 5


class ConfigError(ValueError):
    """Invalid severity table or transform parameters."""


class TransformKind(str, enum.Enum):
    NOISE = "noise"
    GAMMA_COMPRESSION = "gamma_compression"
    GAMMA_EXPANSION = "gamma_expansion"
    SMOOTHING = "smoothing"
    BIAS_FIELD = "bias_field"
    AFFINE = "affine"
    ELASTIC_DEFORMATION = "elastic_deformation"
    DOWNSAMPLE_ISO = "downsample_iso"
    DOWNSAMPLE_ANISO = "downsample_aniso"
    GHOSTING = "ghosting"
    RANDOM_MOTION = "random_motion"

    def __str__(self) -> str:
        return self.value


# Transforms that move anatomy; their labels are warped with the image.
SPATIAL_KINDS = frozenset({
    TransformKind.AFFINE,
    TransformKind.ELASTIC_DEFORMATION,
    TransformKind.DOWNSAMPLE_ISO,
    TransformKind.DOWNSAMPLE_ANISO,
})

PARAM_FIELDS: Dict[TransformKind, tuple] = {
    TransformKind.NOISE: ("sigma_ratio",),
    TransformKind.GAMMA_COMPRESSION: ("gamma",),
    TransformKind.GAMMA_EXPANSION: ("gamma",),
    TransformKind.SMOOTHING: ("sigma_mm",),
    TransformKind.BIAS_FIELD: ("coeff_bound",),
    TransformKind.AFFINE: ("theta_deg", "trans_mm"),
    TransformKind.ELASTIC_DEFORMATION: ("disp_mm",),
    TransformKind.DOWNSAMPLE_ISO: ("factor",),
    TransformKind.DOWNSAMPLE_ANISO: ("factor",),
    TransformKind.GHOSTING: ("num_ghosts",),
    TransformKind.RANDOM_MOTION: ("num_segments", "theta_deg", "trans_mm"),
}

_INTEGER_FIELDS = {(TransformKind.GHOSTING, "num_ghosts"), (TransformKind.RANDOM_MOTION, "num_segments")}

# Parameter values at which each transform does nothing. Ghosting has no
# such point inside its valid range; 2 is its mildest setting.
NOOP_PARAMS: Dict[TransformKind, Dict[str, float]] = {
    TransformKind.NOISE: {"sigma_ratio": 0.0},
    TransformKind.GAMMA_COMPRESSION: {"gamma": 1.0},
    TransformKind.GAMMA_EXPANSION: {"gamma": 1.0},
    TransformKind.SMOOTHING: {"sigma_mm": 0.0},
    TransformKind.BIAS_FIELD: {"coeff_bound": 0.0},
    TransformKind.AFFINE: {"theta_deg": 0.0, "trans_mm": 0.0},
    TransformKind.ELASTIC_DEFORMATION: {"disp_mm": 0.0},
    TransformKind.DOWNSAMPLE_ISO: {"factor": 1.0},
    TransformKind.DOWNSAMPLE_ANISO: {"factor": 1.0},
    TransformKind.GHOSTING: {"num_ghosts": 2},
    TransformKind.RANDOM_MOTION: {"num_segments": 0, "theta_deg": 0.0, "trans_mm": 0.0},
}

_COMP = [0.86, 0.72, 0.58, 0.44, 0.30]

DEFAULT_TABLE: Dict[str, Dict[str, List[float]]] = {
    "noise": {"sigma_ratio": [0.16, 0.32, 0.48, 0.64, 0.80]},
    "gamma_compression": {"gamma": list(_COMP)},
    "gamma_expansion": {"gamma": [1.0 / g for g in _COMP]},
    "smoothing": {"sigma_mm": [0.5, 1.0, 1.5, 2.0, 2.5]},
    "bias_field": {"coeff_bound": [0.2, 0.4, 0.6, 0.8, 1.0]},
    "affine": {"theta_deg": [6, 12, 18, 24, 30], "trans_mm": [8, 16, 24, 32, 40]},
    "elastic_deformation": {"disp_mm": [6, 12, 18, 24, 30]},
    "downsample_iso": {"factor": [1.5, 2.0, 2.5, 3.0, 4.0]},
    "downsample_aniso": {"factor": [2, 3, 4, 5, 6]},
    "ghosting": {"num_ghosts": [2, 3, 4, 6, 8]},
    "random_motion": {"num_segments": [1, 2, 3, 4, 5], "theta_deg": [2, 4, 6, 8, 10],
                      "trans_mm": [2, 4, 6, 8, 10]},
}


def _magnitude(kind: TransformKind, name: str, value: float) -> float:
    if name == "gamma":
        return abs(value - 1.0)
    return value


def validate_params(kind: TransformKind, params: Mapping[str, Any]) -> Dict[str, float]:
    """Check one explicit parameter set and return it normalized to numbers."""
    kind = TransformKind(kind)
    fields = PARAM_FIELDS[kind]
    unknown = set(params) - set(fields)
    if unknown:
        raise ConfigError(f"{kind.value}: unknown parameter(s) {sorted(unknown)}")
    missing = [f for f in fields if f not in params]
    if missing:
        raise ConfigError(f"{kind.value}: missing parameter(s) {missing}")
    out: Dict[str, float] = {}
    for name in fields:
        value = params[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{kind.value}.{name}: expected a number, got {value!r}")
        if (kind, name) in _INTEGER_FIELDS:
            if int(value) != value:
                raise ConfigError(f"{kind.value}.{name}: expected an integer, got {value!r}")
            value = int(value)
        else:
            value = float(value)
        out[name] = value
    _check_ranges(kind, out)
    return out


def _check_ranges(kind: TransformKind, p: Mapping[str, float]) -> None:
    def fail(msg: str) -> None:
        raise ConfigError(f"{kind.value}: {msg}")

    for name, value in p.items():
        if value != value or value in (float("inf"), float("-inf")):
            fail(f"{name} must be finite")
    if kind is TransformKind.GAMMA_COMPRESSION and not 0 < p["gamma"] <= 1:
        fail("gamma must be in (0, 1]")
    elif kind is TransformKind.GAMMA_EXPANSION and not p["gamma"] >= 1:
        fail("gamma must be >= 1")
    elif kind in (TransformKind.DOWNSAMPLE_ISO, TransformKind.DOWNSAMPLE_ANISO) and p["factor"] < 1:
        fail("factor must be >= 1")
    elif kind is TransformKind.GHOSTING and p["num_ghosts"] < 2:
        fail("num_ghosts must be >= 2")
    elif kind not in (TransformKind.GAMMA_COMPRESSION, TransformKind.GAMMA_EXPANSION):
        negative = [n for n, v in p.items() if v < 0]
        if negative:
            fail(f"{negative} must be non-negative")


class SeverityTable:
    """Per-transform parameter sets for severity levels 1..5.

    Level 0 is implicit and always means "no transform".
    """

    def __init__(self, entries: Mapping[str, Mapping[str, List[float]]] | None = None):
        merged = copy.deepcopy(DEFAULT_TABLE)
        for section, values in (entries or {}).items():
            try:
                kind = TransformKind(section)
            except ValueError:
                raise ConfigError(f"unknown transform section {section!r}") from None
            if not isinstance(values, Mapping):
                raise ConfigError(f"section {section!r} must be a table of arrays")
            for name, levels in values.items():
                if name not in PARAM_FIELDS[kind]:
                    raise ConfigError(f"{section}: unknown key {name!r}")
                if not isinstance(levels, (list, tuple)) or len(levels) != NUM_LEVELS:
                    raise ConfigError(f"{section}.{name}: expected an array of {NUM_LEVELS} values")
                merged[kind.value][name] = list(levels)
        self._levels: Dict[TransformKind, List[Dict[str, float]]] = {}
        for kind in TransformKind:
            section = merged[kind.value]
            levels = [validate_params(kind, {n: section[n][s] for n in PARAM_FIELDS[kind]})
                      for s in range(NUM_LEVELS)]
            for name in PARAM_FIELDS[kind]:
                mags = [_magnitude(kind, name, lv[name]) for lv in levels]
                if any(b < a for a, b in zip(mags, mags[1:])):
                    raise ConfigError(f"{kind.value}.{name}: severity levels must be monotone, got "
                                      f"{[lv[name] for lv in levels]}")
            self._levels[kind] = levels

    def params(self, kind: TransformKind | str, severity: int) -> Dict[str, float]:
        kind = TransformKind(kind)
        if not 1 <= severity <= NUM_LEVELS:
            raise ConfigError(f"severity must be 1..{NUM_LEVELS} for table lookup, got {severity}")
        return dict(self._levels[kind][severity - 1])

    def max_params(self, kind: TransformKind | str) -> Dict[str, float]:
        return self.params(kind, NUM_LEVELS)

    def to_dict(self) -> Dict[str, Dict[str, List[float]]]:
        return {
            kind.value: {name: [lv[name] for lv in self._levels[kind]] for name in PARAM_FIELDS[kind]}
            for kind in TransformKind
        }

    def checksum(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SeverityTable) and self.to_dict() == other.to_dict()

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "SeverityTable":
        """Load a TOML or JSON table; sections not given keep their defaults."""
        path = os.fspath(path)
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read severity table {path}: {exc}") from exc
        try:
            if path.endswith(".json"):
                entries = json.loads(raw.decode("utf-8"))
            else:
                entries = tomllib.loads(raw.decode("utf-8"))
        except (ValueError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot parse severity table {path}: {exc}") from exc
        if not isinstance(entries, dict):
            raise ConfigError(f"{path}: top level must be a table")
        return cls(entries)
