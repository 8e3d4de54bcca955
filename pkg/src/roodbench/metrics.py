"""Per-sample segmentation scores: Dice overlap and 95th-percentile Hausdorff distance."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import binary_erosion, generate_binary_structure
from scipy.spatial import cKDTree

from .volume import LabelVolume, VolumeError

__all__ = [
    "SampleMetrics",
    "dice",
    "boundary_points",
    "directed_distances",
    "hd95",
    "hd95_bruteforce",
    "percentile95",
    "evaluate_sample",
]

CLEAN = "clean"


@dataclass(frozen=True)
class SampleMetrics:
    """Scores for one (sample, transform, severity) prediction.

    ``hd95_mm`` is ``None`` exactly when the prediction is empty.
    """

    sample_id: str
    transform: str
    severity: int
    dsc: float
    hd95_mm: Optional[float]
    null_prediction: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.dsc <= 1.0:
            raise ValueError(f"dsc out of range: {self.dsc}")
        if self.null_prediction != (self.hd95_mm is None):
            raise ValueError("hd95_mm must be absent exactly for null predictions")

    def to_dict(self) -> dict:
        return asdict(self)


def _check_pair(a: LabelVolume, b: LabelVolume) -> None:
    if not a.same_grid(b):
        raise VolumeError(f"mask grids differ: {a.shape}/{a.spacing} vs {b.shape}/{b.spacing}")


def dice(a: LabelVolume, b: LabelVolume) -> float:
    """``2|A n B| / (|A| + |B|)``; two empty masks score 1."""
    _check_pair(a, b)
    ma, mb = a.mask, b.mask
    total = int(ma.sum()) + int(mb.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(ma, mb).sum()) / total


_FACES = generate_binary_structure(3, 1)


def boundary_points(label: LabelVolume) -> np.ndarray:
    """Physical (mm) coordinates of foreground voxels touching background across a face.

    Space outside the grid counts as background.
    """
    mask = label.mask
    interior = binary_erosion(mask, structure=_FACES, border_value=0)
    idx = np.argwhere(mask & ~interior)
    return idx * np.asarray(label.spacing)


def percentile95(values: np.ndarray) -> float:
    """95th percentile, linear interpolation at rank ``0.95 * (n - 1)``."""
    return float(np.percentile(np.asarray(values, dtype=np.float64), 95, method="linear"))


def directed_distances(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Distance from each point of ``src`` to its nearest point in ``dst``."""
    return cKDTree(dst).query(src, k=1)[0]


def _bruteforce_directed(src: np.ndarray, dst: np.ndarray, chunk: int = 2048) -> np.ndarray:
    out = np.empty(len(src))
    for start in range(0, len(src), chunk):
        block = src[start:start + chunk]
        d2 = ((block[:, None, :] - dst[None, :, :]) ** 2).sum(axis=-1)
        out[start:start + chunk] = np.sqrt(d2.min(axis=1))
    return out


def _hd95(a: LabelVolume, b: LabelVolume, directed) -> Optional[float]:
    _check_pair(a, b)
    if not a.mask.any() or not b.mask.any():
        return None
    pa, pb = boundary_points(a), boundary_points(b)
    return max(percentile95(directed(pa, pb)), percentile95(directed(pb, pa)))


def hd95(a: LabelVolume, b: LabelVolume) -> Optional[float]:
    """Larger of the two directed 95th-percentile surface distances, in mm.

    Returns ``None`` when either mask is empty.
    """
    return _hd95(a, b, directed_distances)


def hd95_bruteforce(a: LabelVolume, b: LabelVolume) -> Optional[float]:
    """All-pairs reference for :func:`hd95`; quadratic in boundary size."""
    return _hd95(a, b, _bruteforce_directed)


def evaluate_sample(pred: LabelVolume, gt: LabelVolume, sample_id: str,
                    transform: str = CLEAN, severity: int = 0) -> SampleMetrics:
    _check_pair(pred, gt)
    null = not pred.mask.any()
    if null:
        score = 1.0 if not gt.mask.any() else 0.0
        return SampleMetrics(sample_id, str(transform), int(severity), score, None, True)
    distance = hd95(pred, gt)
    if distance is None:
        # non-empty prediction against an empty ground truth has no defined distance
        raise VolumeError(f"{sample_id}: ground truth is empty, HD95 undefined")
    return SampleMetrics(sample_id, str(transform), int(severity), dice(pred, gt), distance, False)
