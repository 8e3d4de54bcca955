"""Slow, independent reference implementations used only by the tests."""
from __future__ import annotations

import itertools
import math
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

Voxel = Tuple[int, int, int]


def voxel_set(mask: np.ndarray) -> Set[Voxel]:
    return {tuple(int(c) for c in idx) for idx in zip(*np.nonzero(mask))}


def dice_sets(a: np.ndarray, b: np.ndarray) -> float:
    sa, sb = voxel_set(a), voxel_set(b)
    if not sa and not sb:
        return 1.0
    return 2.0 * len(sa & sb) / (len(sa) + len(sb))


_FACE_OFFSETS = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]


def boundary_set(mask: np.ndarray) -> List[Voxel]:
    fg = voxel_set(mask)
    out = []
    for v in sorted(fg):
        if any((v[0] + o[0], v[1] + o[1], v[2] + o[2]) not in fg for o in _FACE_OFFSETS):
            out.append(v)
    return out


def percentile_linear(values: Iterable[float], q: float = 95.0) -> float:
    """Rank ``q/100 * (n-1)`` with linear interpolation, in the two-sided lerp form."""
    xs = sorted(values)
    rank = q / 100.0 * (len(xs) - 1)
    lo = int(math.floor(rank))
    hi = min(lo + 1, len(xs) - 1)
    t = rank - lo
    a, b = xs[lo], xs[hi]
    diff = b - a
    return b - diff * (1 - t) if t >= 0.5 else a + diff * t


def hd95_allpairs(a: np.ndarray, b: np.ndarray, spacing: Sequence[float] = (1, 1, 1)) -> Optional[float]:
    """Every boundary point of one mask against every boundary point of the other."""
    if not a.any() or not b.any():
        return None
    pa = np.array(boundary_set(a), dtype=np.float64) * np.asarray(spacing, dtype=np.float64)
    pb = np.array(boundary_set(b), dtype=np.float64) * np.asarray(spacing, dtype=np.float64)
    dist = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=-1))
    return max(percentile_linear(dist.min(axis=1)), percentile_linear(dist.min(axis=0)))


def trilinear(data: np.ndarray, p: Sequence[float]) -> float:
    """Explicit 8-neighbour trilinear interpolation with zero outside the grid."""
    base = [math.floor(c) for c in p]
    frac = [c - b for c, b in zip(p, base)]
    total = 0.0
    for corner in itertools.product((0, 1), repeat=3):
        idx = [b + c for b, c in zip(base, corner)]
        if all(0 <= i < n for i, n in zip(idx, data.shape)):
            w = 1.0
            for c, f in zip(corner, frac):
                w *= f if c else 1 - f
            total += w * data[tuple(idx)]
    return total


def wilcoxon_exact_enumeration(diffs: Sequence[float]) -> float:
    """Two-sided exact p by enumerating all 2**n sign patterns (zeros dropped, mid-ranks)."""
    d = [x for x in diffs if x != 0]
    n = len(d)
    mags = sorted(abs(x) for x in d)
    rank = {}
    i = 0
    while i < n:
        j = i
        while j + 1 < n and mags[j + 1] == mags[i]:
            j += 1
        for k in range(i, j + 1):
            rank[mags[k]] = (i + j + 2) / 2.0
        i = j + 1
    ranks = [rank[abs(x)] for x in d]
    observed = sum(r for r, x in zip(ranks, d) if x > 0)
    lower = upper = 0
    for signs in itertools.product((0, 1), repeat=n):
        w = sum(r for r, s in zip(ranks, signs) if s)
        lower += w <= observed + 1e-9
        upper += w >= observed - 1e-9
    return min(1.0, 2.0 * min(lower, upper) / 2 ** n)
