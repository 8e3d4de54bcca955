"""k-space artifacts: ghosting from periodic plane dropout and spliced random motion.

k-space is the centred (``fftshift``-ed) 3D FFT of the image; the DC plane
along an axis of length ``n`` sits at index ``n // 2``. Outputs are the
magnitude of the inverse transform.
"""
from __future__ import annotations

from typing import Dict, List, Sequence

import numpy as np

from ..volume import InterpolationMode, Volume, VolumeError
from .spatial import rotation_matrix, sample_rigid, warp_affine

__all__ = [
    "to_kspace",
    "from_kspace",
    "phase_encoding_axes",
    "central_band",
    "ghost_planes",
    "zero_kspace_planes",
    "sample_ghosting",
    "ghosting_from_realized",
    "apply_ghosting",
    "sample_motion",
    "motion_segments",
    "motion_from_realized",
    "apply_random_motion",
]

_IN_PLANE_CODES = ("R", "L", "A", "P")


def to_kspace(data: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.fftn(data))


def from_kspace(k: np.ndarray) -> np.ndarray:
    return np.abs(np.fft.ifftn(np.fft.ifftshift(k)))


def phase_encoding_axes(v: Volume) -> List[int]:
    """Array axes running left-right or anterior-posterior."""
    return [i for i, code in enumerate(v.orientation) if code in _IN_PLANE_CODES]


def central_band(n: int) -> np.ndarray:
    """Indices of the central 1/16 of planes (at least one) around DC."""
    width = max(1, int(round(n / 16)))
    start = n // 2 - width // 2
    return np.arange(start, start + width)


def ghost_planes(n: int, num_ghosts: int) -> np.ndarray:
    """Every ``num_ghosts``-th plane counted from DC, minus the protected central band."""
    offsets = np.arange(n) - n // 2
    planes = np.flatnonzero(offsets % num_ghosts == 0)
    return np.setdiff1d(planes, central_band(n))


def zero_kspace_planes(data: np.ndarray, axis: int, planes: Sequence[int]) -> np.ndarray:
    """Zero the listed k-space planes along ``axis`` and return the magnitude image."""
    k = to_kspace(np.asarray(data, dtype=np.float64))
    planes = np.asarray(planes, dtype=int)
    if planes.size:
        index = [slice(None)] * 3
        index[axis] = planes
        k[tuple(index)] = 0.0
    return from_kspace(k)


def sample_ghosting(v: Volume, num_ghosts: int, rng: np.random.Generator) -> Dict[str, int]:
    if num_ghosts < 2:
        raise VolumeError(f"num_ghosts must be >= 2, got {num_ghosts}")
    axes = phase_encoding_axes(v)
    axis = int(axes[rng.integers(len(axes))])
    return {"num_ghosts": int(num_ghosts), "axis": axis}


def ghosting_from_realized(v: Volume, num_ghosts: int, axis: int) -> Volume:
    n = v.shape[axis]
    if n < 2 * num_ghosts:
        raise VolumeError(f"axis {axis} has {n} planes, fewer than 2 x {num_ghosts} ghosts")
    return v.with_data(zero_kspace_planes(v.data, axis, ghost_planes(n, num_ghosts)))


def apply_ghosting(v: Volume, num_ghosts: int, rng: np.random.Generator) -> Volume:
    """Ghost along a phase-encoding axis drawn from the in-plane axes."""
    p = sample_ghosting(v, num_ghosts, rng)
    return ghosting_from_realized(v, p["num_ghosts"], p["axis"])


def sample_motion(v: Volume, num_segments: int, theta_deg: float, trans_mm: float,
                  rng: np.random.Generator) -> Dict[str, object]:
    """Draw the k-space axis, cut points, and one rigid pose per moved segment."""
    if num_segments < 0:
        raise VolumeError(f"num_segments must be non-negative, got {num_segments}")
    axes = phase_encoding_axes(v)
    axis = int(axes[rng.integers(len(axes))])
    n = v.shape[axis]
    if num_segments + 1 > n:
        raise VolumeError(f"{num_segments + 1} k-space segments do not fit in {n} planes")
    cuts = np.sort(rng.choice(np.arange(1, n), size=num_segments, replace=False))
    poses = [sample_rigid(theta_deg, trans_mm, rng) for _ in range(num_segments)]
    return {
        "axis": axis,
        "cuts": [int(c) for c in cuts],
        "angles_deg": [p["angles_deg"] for p in poses],
        "trans_mm": [p["trans_mm"] for p in poses],
    }


def motion_segments(n: int, cuts: Sequence[int]) -> List[np.ndarray]:
    """Split ``range(n)`` at ``cuts``; the block holding DC is returned first, then the rest in order."""
    bounds = [0, *cuts, n]
    blocks = [np.arange(a, b) for a, b in zip(bounds, bounds[1:])]
    dc = n // 2
    first = next(i for i, b in enumerate(blocks) if b[0] <= dc <= b[-1])
    return [blocks[first]] + [b for i, b in enumerate(blocks) if i != first]


def motion_from_realized(v: Volume, axis: int, cuts: Sequence[int],
                         angles_deg: Sequence[Sequence[float]],
                         trans_mm: Sequence[Sequence[float]]) -> Volume:
    if not cuts:
        return v
    copies = [v.data] + [
        warp_affine(v, rotation_matrix(a), t, InterpolationMode.LINEAR).data
        for a, t in zip(angles_deg, trans_mm)
    ]
    blocks = motion_segments(v.shape[axis], cuts)
    spliced = np.empty(v.shape, dtype=np.complex128)
    index = [slice(None)] * 3
    for block, image in zip(blocks, copies):
        index[axis] = block
        spliced[tuple(index)] = to_kspace(image)[tuple(index)]
    return v.with_data(from_kspace(spliced))


def apply_random_motion(v: Volume, num_segments: int, theta_deg: float, trans_mm: float,
                        rng: np.random.Generator) -> Volume:
    """Splice k-space from the still image and ``num_segments`` rigidly moved copies."""
    p = sample_motion(v, num_segments, theta_deg, trans_mm, rng)
    return motion_from_realized(v, p["axis"], p["cuts"], p["angles_deg"], p["trans_mm"])
