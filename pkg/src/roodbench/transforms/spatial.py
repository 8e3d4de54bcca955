"""Geometric corruptions: rigid affine, B-spline elastic deformation, down/up-sampling.

Every warp is a pull-back: the output voxel ``x`` reads the input at a
mapped location, with zero padding outside the input grid.
"""
from __future__ import annotations

import math
from typing import Dict, Sequence

import numpy as np
from scipy.ndimage import affine_transform

from ..volume import InterpolationMode, Volume, VolumeError, sample_points

__all__ = [
    "rotation_matrix",
    "sample_rigid",
    "warp_affine",
    "apply_affine",
    "NUM_CONTROL_POINTS",
    "bspline_basis",
    "bspline_weights",
    "sample_control_displacements",
    "elastic_displacement",
    "warp_elastic",
    "apply_elastic",
    "linear_resize_matrix",
    "downsampled_size",
    "apply_downsample",
]


# ------------------------------------------------------------------ affine


def rotation_matrix(angles_deg: Sequence[float]) -> np.ndarray:
    """Rotation for Euler angles about axes (0, 1, 2), composed intrinsically as Z-Y-X."""
    ax, ay, az = (math.radians(a) for a in angles_deg)
    cx, sx = math.cos(ax), math.sin(ax)
    cy, sy = math.cos(ay), math.sin(ay)
    cz, sz = math.cos(az), math.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


def sample_rigid(theta_deg: float, trans_mm: float, rng: np.random.Generator) -> Dict[str, list]:
    """Draw Euler angles from U(-theta, theta) and a translation from U(-d, d) per axis."""
    if theta_deg < 0 or trans_mm < 0:
        raise VolumeError("rotation and translation bounds must be non-negative")
    angles = rng.uniform(-theta_deg, theta_deg, size=3)
    trans = rng.uniform(-trans_mm, trans_mm, size=3)
    return {"angles_deg": [float(a) for a in angles], "trans_mm": [float(t) for t in trans]}


def _voxel_grid(shape: Sequence[int]) -> np.ndarray:
    return np.stack(np.meshgrid(*(np.arange(n, dtype=np.float64) for n in shape), indexing="ij"))


def warp_affine(
    v: Volume,
    matrix: np.ndarray,
    trans_mm: Sequence[float],
    mode: InterpolationMode | str = InterpolationMode.LINEAR,
) -> Volume:
    """``S(x) = I(M x + d)`` with ``x`` in mm relative to the volume centre."""
    matrix = np.asarray(matrix, dtype=np.float64)
    trans_mm = np.asarray(trans_mm, dtype=np.float64)
    if np.array_equal(matrix, np.eye(3)) and not trans_mm.any():
        return v
    spacing = np.array(v.spacing)
    center = (np.array(v.shape) - 1) / 2.0
    # the same map expressed in voxel indices: src = A x + offset
    a = matrix * spacing[None, :] / spacing[:, None]
    offset = center - a @ center + trans_mm / spacing
    if InterpolationMode(mode) is InterpolationMode.LINEAR:
        out = affine_transform(v.data, a, offset=offset, order=1, mode="grid-constant",
                               cval=0.0, prefilter=False)
    else:
        grid = _voxel_grid(v.shape).reshape(3, -1)
        src = a @ grid + offset[:, None]
        out = sample_points(v.data, src.reshape((3,) + v.shape), mode)
    return v.with_data(out)


def apply_affine(
    v: Volume,
    theta_deg: float,
    trans_mm: float,
    rng: np.random.Generator,
    mode: InterpolationMode | str = InterpolationMode.LINEAR,
) -> Volume:
    p = sample_rigid(theta_deg, trans_mm, rng)
    return warp_affine(v, rotation_matrix(p["angles_deg"]), p["trans_mm"], mode)


# ------------------------------------------------------------------ elastic

NUM_CONTROL_POINTS = 7


def bspline_basis(u: np.ndarray) -> np.ndarray:
    """The four uniform cubic B-spline blending weights at local parameter ``u`` in [0, 1]."""
    u = np.asarray(u, dtype=np.float64)
    return np.stack([
        (1 - u) ** 3 / 6.0,
        (3 * u ** 3 - 6 * u ** 2 + 4) / 6.0,
        (-3 * u ** 3 + 3 * u ** 2 + 3 * u + 1) / 6.0,
        u ** 3 / 6.0,
    ], axis=-1)


def bspline_weights(n: int, num_ctrl: int = NUM_CONTROL_POINTS) -> np.ndarray:
    """``(n, num_ctrl)`` matrix mapping control values to voxel samples along one axis.

    Control points sit at ``(j - 1) * h`` for ``j = 0..num_ctrl-1`` with knot
    spacing ``h = (n - 1) / (num_ctrl - 3)``, so the grid spans the axis with
    one extra control point beyond each end.
    """
    segments = num_ctrl - 3
    weights = np.zeros((n, num_ctrl))
    if n == 1:
        t = np.zeros(1)
    else:
        t = np.arange(n, dtype=np.float64) * segments / (n - 1)
    seg = np.minimum(np.floor(t).astype(int), segments - 1)
    basis = bspline_basis(t - seg)
    for m in range(4):
        weights[np.arange(n), seg + m] = basis[:, m]
    return weights


def sample_control_displacements(disp_mm: float, rng: np.random.Generator,
                                 num_ctrl: int = NUM_CONTROL_POINTS) -> np.ndarray:
    """``(num_ctrl, num_ctrl, num_ctrl, 3)`` displacements in mm drawn from U(-d, d)."""
    if disp_mm < 0:
        raise VolumeError(f"disp_mm must be non-negative, got {disp_mm}")
    return rng.uniform(-disp_mm, disp_mm, size=(num_ctrl,) * 3 + (3,))


def elastic_displacement(shape: Sequence[int], spacing: Sequence[float],
                         control_disp_mm: np.ndarray) -> np.ndarray:
    """Dense ``(3, H, W, D)`` displacement in voxels interpolated from the control grid."""
    control = np.asarray(control_disp_mm, dtype=np.float64)
    num_ctrl = control.shape[0]
    wx, wy, wz = (bspline_weights(n, num_ctrl) for n in shape)
    field = np.empty((3,) + tuple(shape))
    for axis in range(3):
        field[axis] = np.einsum("ia,jb,kc,abc->ijk", wx, wy, wz, control[..., axis],
                                optimize=True) / spacing[axis]
    return field


def warp_elastic(v: Volume, control_disp_mm: np.ndarray,
                 mode: InterpolationMode | str = InterpolationMode.LINEAR) -> Volume:
    """``S(x) = I(x + u(x))`` for the spline field defined by ``control_disp_mm``."""
    if not np.any(control_disp_mm):
        return v
    field = elastic_displacement(v.shape, v.spacing, control_disp_mm)
    return v.with_data(sample_points(v.data, _voxel_grid(v.shape) + field, mode))


def apply_elastic(v: Volume, disp_mm: float, rng: np.random.Generator,
                  mode: InterpolationMode | str = InterpolationMode.LINEAR) -> Volume:
    return warp_elastic(v, sample_control_displacements(disp_mm, rng), mode)


# ------------------------------------------------------------------ downsampling


def linear_resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """``(n_out, n_in)`` linear interpolation matrix aligning the end samples."""
    if n_out == n_in:
        return np.eye(n_in)
    mat = np.zeros((n_out, n_in))
    if n_in == 1:
        mat[:, 0] = 1.0
        return mat
    if n_out == 1:
        mat[0, 0] = 1.0
        return mat
    pos = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    lo = np.minimum(np.floor(pos).astype(int), n_in - 2)
    frac = pos - lo
    rows = np.arange(n_out)
    mat[rows, lo] = 1.0 - frac
    mat[rows, lo + 1] += frac
    return mat


def downsampled_size(n: int, factor: float) -> int:
    if n < 2:
        return n
    return max(2, int(round(n / factor)))


def apply_downsample(v: Volume, factor: float, axes: Sequence[int] = (0, 1, 2)) -> Volume:
    """Linearly shrink the chosen axes by ``factor`` and linearly stretch them back."""
    if factor < 1:
        raise VolumeError(f"downsampling factor must be >= 1, got {factor}")
    axes = tuple(int(a) for a in axes)
    if len(axes) not in (1, 3) or len(set(axes)) != len(axes) or any(a not in (0, 1, 2) for a in axes):
        raise VolumeError(f"axes must be all three axes or exactly one, got {axes}")
    out = v.data
    changed = False
    for axis in axes:
        n = v.shape[axis]
        m = downsampled_size(n, factor)
        if m == n:
            continue
        resample = linear_resize_matrix(m, n) @ linear_resize_matrix(n, m)
        out = np.moveaxis(np.tensordot(resample, out, axes=([1], [axis])), 0, axis)
        changed = True
    return v.with_data(out) if changed else v
