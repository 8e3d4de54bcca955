"""Volumetric image containers, NIfTI I/O, and resampling primitives.

A :class:`Volume` is an immutable 3D intensity grid carrying the spatial
metadata needed to write it back to disk (per-axis spacing, axis orientation
codes and the world position of the first voxel). :class:`LabelVolume` is the
binary-mask counterpart sharing the same grid description.

All computation happens in float64; files are written as float32 by default.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import nibabel as nib
import numpy as np
from scipy.ndimage import map_coordinates

__all__ = [
    "InterpolationMode",
    "Volume",
    "LabelVolume",
    "VolumeError",
    "load_volume",
    "load_label",
    "save_volume",
    "save_label",
    "reorient_to_ras",
    "resample_isotropic",
    "zscore_normalize",
    "sample_at",
    "sample_points",
]

# Orientation codes name the anatomical direction an array axis increases
# toward. World space is RAS+.
_AXIS_OF_CODE = {"R": 0, "L": 0, "A": 1, "P": 1, "S": 2, "I": 2}
_SIGN_OF_CODE = {"R": 1.0, "L": -1.0, "A": 1.0, "P": -1.0, "S": 1.0, "I": -1.0}
RAS = ("R", "A", "S")


class VolumeError(ValueError):
    """Raised for malformed volumes, unreadable files or invalid grid operations."""


class InterpolationMode(str, enum.Enum):
    LINEAR = "linear"
    NEAREST = "nearest"


def _check_orientation(orientation: Sequence[str]) -> Tuple[str, str, str]:
    codes = tuple(str(c).upper() for c in orientation)
    if len(codes) != 3 or any(c not in _AXIS_OF_CODE for c in codes):
        raise VolumeError(f"unrecognized orientation code {orientation!r}")
    if sorted(_AXIS_OF_CODE[c] for c in codes) != [0, 1, 2]:
        raise VolumeError(f"orientation {orientation!r} is not a signed axis permutation")
    return codes  # type: ignore[return-value]


@dataclass(frozen=True)
class _Grid:
    data: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    orientation: Tuple[str, str, str] = RAS
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def _validate_grid(self) -> None:
        if self.data.ndim != 3:
            raise VolumeError(f"expected a 3D array, got shape {self.data.shape}")
        if min(self.data.shape) < 1:
            raise VolumeError(f"empty grid {self.data.shape}")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or not all(np.isfinite(s) and s > 0 for s in spacing):
            raise VolumeError(f"spacing must be three positive values, got {self.spacing!r}")
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "orientation", _check_orientation(self.orientation))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(self.data.shape)  # type: ignore[return-value]

    def affine(self) -> np.ndarray:
        """Voxel-to-world (RAS+ mm) matrix implied by spacing, orientation and origin."""
        aff = np.zeros((4, 4))
        aff[3, 3] = 1.0
        for i, code in enumerate(self.orientation):
            aff[_AXIS_OF_CODE[code], i] = _SIGN_OF_CODE[code] * self.spacing[i]
        aff[:3, 3] = self.origin
        return aff

    def same_grid(self, other: "_Grid") -> bool:
        return (
            self.shape == other.shape
            and np.allclose(self.spacing, other.spacing, rtol=0, atol=1e-6)
            and self.orientation == other.orientation
        )


@dataclass(frozen=True)
class Volume(_Grid):
    """3D real-valued image. ``data`` is stored read-only as float64."""

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64, copy=True)
        object.__setattr__(self, "data", data)
        self._validate_grid()
        if not np.all(np.isfinite(data)):
            raise VolumeError("volume contains non-finite intensities")
        data.setflags(write=False)

    def with_data(self, data: np.ndarray) -> "Volume":
        return replace(self, data=data)


@dataclass(frozen=True)
class LabelVolume(_Grid):
    """Binary mask on a volume grid. ``data`` is stored read-only as uint8 in {0, 1}."""

    def __post_init__(self) -> None:
        raw = np.asarray(self.data)
        if raw.dtype == bool:
            data = raw.astype(np.uint8)
        else:
            if not np.all((raw == 0) | (raw == 1)):
                raise VolumeError("label volume must contain only 0 and 1")
            data = raw.astype(np.uint8)
        object.__setattr__(self, "data", data)
        self._validate_grid()
        data.setflags(write=False)

    @property
    def mask(self) -> np.ndarray:
        return self.data.astype(bool)

    def with_data(self, data: np.ndarray) -> "LabelVolume":
        return replace(self, data=data)

    def as_volume(self) -> Volume:
        return Volume(self.data.astype(np.float64), self.spacing, self.orientation, self.origin)

    @classmethod
    def like(cls, grid: _Grid, data: np.ndarray) -> "LabelVolume":
        return cls(data, grid.spacing, grid.orientation, grid.origin)


# --------------------------------------------------------------------------- I/O

_SUPPORTED_KINDS = ("f", "i", "u", "b")


def _read_nifti(path: str | os.PathLike) -> Tuple[np.ndarray, Tuple, Tuple, Tuple]:
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        img = nib.load(path)
    except Exception as exc:  # nibabel raises a zoo of exception types here
        raise VolumeError(f"malformed header in {path}: {exc}") from exc
    if not isinstance(img, (nib.Nifti1Image, nib.Nifti2Image)):
        raise VolumeError(f"malformed header in {path}: not a NIfTI image")
    if len(img.shape) != 3:
        raise VolumeError(f"{path}: expected a 3D volume, got shape {img.shape}")
    dtype = img.get_data_dtype()
    if dtype.fields is not None or dtype.kind not in _SUPPORTED_KINDS:
        raise VolumeError(f"{path}: unsupported datatype {dtype}")
    try:
        data = np.asanyarray(img.dataobj)
    except Exception as exc:
        raise VolumeError(f"malformed header in {path}: truncated or unreadable data ({exc})") from exc
    affine = img.affine
    codes = nib.aff2axcodes(affine)
    if any(c is None for c in codes):
        raise VolumeError(f"{path}: degenerate orientation in affine")
    spacing = tuple(float(z) for z in img.header.get_zooms()[:3])
    origin = tuple(float(o) for o in affine[:3, 3])
    return data, spacing, tuple(codes), origin


def load_volume(path: str | os.PathLike) -> Volume:
    """Read a NIfTI-1 (``.nii`` or ``.nii.gz``) file as a :class:`Volume`."""
    data, spacing, codes, origin = _read_nifti(path)
    data = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise VolumeError(f"{path}: non-finite intensities")
    return Volume(data, spacing, codes, origin)


def load_label(path: str | os.PathLike, threshold: float = 0.5) -> LabelVolume:
    """Read a mask; any value above ``threshold`` is foreground."""
    data, spacing, codes, origin = _read_nifti(path)
    return LabelVolume(np.asarray(data) > threshold, spacing, codes, origin)


def _write_nifti(grid: _Grid, data: np.ndarray, path: str | os.PathLike) -> None:
    path = os.fspath(path)
    img = nib.Nifti1Image(data, grid.affine())
    img.header.set_zooms(grid.spacing)
    img.header.set_xyzt_units("mm")
    img.set_sform(grid.affine(), code=1)
    img.set_qform(grid.affine(), code=1)
    img.header["scl_slope"] = 1.0
    img.header["scl_inter"] = 0.0
    try:
        nib.save(img, path)
    except OSError as exc:
        raise VolumeError(f"cannot write {path}: {exc}") from exc


def save_volume(v: Volume, path: str | os.PathLike, dtype: np.dtype | str = np.float32) -> None:
    """Write ``v`` to ``path``; a ``.gz`` suffix selects gzip compression."""
    data = np.asarray(v.data)
    if not np.all(np.isfinite(data)):
        raise VolumeError("refusing to save non-finite data")
    _write_nifti(v, data.astype(dtype), path)


def save_label(label: LabelVolume, path: str | os.PathLike) -> None:
    _write_nifti(label, label.data.astype(np.uint8), path)


# ------------------------------------------------------------------ orientation


def reorient_to_ras(v: Volume | LabelVolume) -> Volume | LabelVolume:
    """Permute and flip array axes so that they increase toward R, A and S."""
    codes = _check_orientation(v.orientation)
    if codes == RAS:
        return v
    src_for_target = [0, 0, 0]
    for src, code in enumerate(codes):
        src_for_target[_AXIS_OF_CODE[code]] = src
    data = np.transpose(v.data, src_for_target)
    spacing = tuple(v.spacing[s] for s in src_for_target)
    origin = np.array(v.origin)
    flips = []
    for tgt, src in enumerate(src_for_target):
        if _SIGN_OF_CODE[codes[src]] < 0:
            flips.append(tgt)
            # first voxel of the flipped axis was the last one of the source axis
            origin[tgt] -= (v.shape[src] - 1) * v.spacing[src]
    if flips:
        data = np.flip(data, axis=tuple(flips))
    return replace(v, data=np.ascontiguousarray(data), spacing=spacing, orientation=RAS,
                   origin=tuple(origin))


# ------------------------------------------------------------------ interpolation


def sample_points(
    data: np.ndarray,
    coords: np.ndarray,
    mode: InterpolationMode | str = InterpolationMode.LINEAR,
    padding: str = "zero",
) -> np.ndarray:
    """Interpolate ``data`` at continuous voxel coordinates.

    ``coords`` has shape ``(3, ...)``. With ``padding="zero"`` voxels outside
    the grid count as 0; with ``padding="edge"`` coordinates are clamped into
    the grid first.
    """
    mode = InterpolationMode(mode)
    data = np.asarray(data, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.float64)
    out_shape = coords.shape[1:]
    pts = coords.reshape(3, -1)
    shape = np.array(data.shape)
    if padding == "edge":
        pts = np.clip(pts, 0, (shape - 1)[:, None])
    elif padding != "zero":
        raise ValueError(f"unknown padding {padding!r}")
    flat = data.ravel()
    strides = np.array([data.shape[1] * data.shape[2], data.shape[2], 1])

    if mode is InterpolationMode.NEAREST:
        idx = np.floor(pts + 0.5).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < shape[:, None]), axis=0)
        out = np.zeros(pts.shape[1])
        lin = (idx[:, inside] * strides[:, None]).sum(axis=0)
        out[inside] = flat[lin]
        return out.reshape(out_shape)

    out = map_coordinates(data, pts, order=1, mode="grid-constant", cval=0.0, prefilter=False)
    return out.reshape(out_shape)


def sample_at(v: Volume, p: Sequence[float], mode: InterpolationMode | str = "linear") -> float:
    """Value of ``v`` at voxel-space point ``p``; zero outside the grid."""
    return float(sample_points(v.data, np.asarray(p, dtype=np.float64).reshape(3, 1), mode)[0])


# ------------------------------------------------------------------ preprocessing


def resample_isotropic(
    v: Volume | LabelVolume,
    target_mm: float = 1.0,
    mode: InterpolationMode | str = InterpolationMode.LINEAR,
) -> Volume | LabelVolume:
    """Resample onto an isotropic grid of ``target_mm`` spacing.

    The output grid is centred on the input grid, so the world-space extent is
    kept to within one output voxel. Samples falling past the outermost input
    voxel centres take the edge value. Labels are resampled linearly and
    re-thresholded at 0.5 unless ``mode`` is nearest.
    """
    if not target_mm > 0:
        raise VolumeError(f"target spacing must be positive, got {target_mm}")
    in_shape = np.array(v.shape)
    spacing = np.array(v.spacing)
    out_shape = np.maximum(1, np.round(in_shape * spacing / target_mm).astype(int))
    if np.array_equal(out_shape, in_shape) and np.allclose(spacing, target_mm, rtol=0, atol=1e-9):
        return v
    scale = target_mm / spacing
    c_in = (in_shape - 1) / 2.0
    c_out = (out_shape - 1) / 2.0
    axes = [c_in[i] + (np.arange(out_shape[i]) - c_out[i]) * scale[i] for i in range(3)]
    coords = np.stack(np.meshgrid(*axes, indexing="ij"))
    values = sample_points(v.data, coords, mode, padding="edge")
    start = np.array([ax[0] for ax in axes])
    origin = v.affine() @ np.append(start, 1.0)
    iso = (float(target_mm),) * 3
    if isinstance(v, LabelVolume):
        return LabelVolume(values >= 0.5, iso, v.orientation, tuple(origin[:3]))
    return Volume(values, iso, v.orientation, tuple(origin[:3]))


def zscore_normalize(v: Volume) -> Volume:
    """Shift and scale to zero mean, unit (population) standard deviation."""
    data = v.data
    mean = data.mean()
    std = data.std()
    if not std > 0:
        raise VolumeError("degenerate intensity distribution: standard deviation is zero")
    out = (data - mean) / std
    # second pass removes residual rounding in the mean
    out -= out.mean()
    return v.with_data(out)
