"""The eleven corruption transforms, their severity table and dispatch."""
from .augment import AugmentationPolicy, sample_augmentation
from .engine import (
    TransformSpec,
    apply,
    apply_realized,
    apply_with_record,
    co_transform_label,
    derive_seed,
    realize,
)
from .intensity import apply_bias_field, apply_gamma, apply_noise, apply_smoothing
from .kspace import apply_ghosting, apply_random_motion
from .severity import SPATIAL_KINDS, ConfigError, SeverityTable, TransformKind
from .spatial import apply_affine, apply_downsample, apply_elastic

__all__ = [
    "AugmentationPolicy",
    "ConfigError",
    "SPATIAL_KINDS",
    "SeverityTable",
    "TransformKind",
    "TransformSpec",
    "apply",
    "apply_affine",
    "apply_bias_field",
    "apply_downsample",
    "apply_elastic",
    "apply_gamma",
    "apply_ghosting",
    "apply_noise",
    "apply_random_motion",
    "apply_realized",
    "apply_smoothing",
    "apply_with_record",
    "co_transform_label",
    "derive_seed",
    "realize",
    "sample_augmentation",
]
