"""Severity-weighted performance and degradation metrics over a benchmark run.

For every transform T and severity s the per-sample Dice and HD95 values are
reduced to mean and standard deviation. Those curves are then collapsed with
exponential severity weights ``w_s = alpha ** s``:

* weighted metrics average s = 0..5 (s = 0 is the clean test set),
* degradation metrics average the change relative to clean over s = 1..5.

Aggregates across transforms are arithmetic means of the per-transform values.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .metrics import CLEAN, SampleMetrics
from .transforms.severity import NUM_LEVELS, TransformKind
from .wilcoxon import signed_rank_test

__all__ = [
    "DEFAULT_ALPHA",
    "RobustnessWeights",
    "SeverityStats",
    "severity_stats",
    "weighted_mean",
    "degradation",
    "TransformSummary",
    "RobustnessReport",
    "build_report",
    "ComparisonCell",
    "compare_models",
    "MetricsError",
]

DEFAULT_ALPHA = 2.0 / 3.0
WEIGHTED_KEYS = ("wmDSC", "wsDSC", "wmHD95", "wsHD95")
DEGRADATION_KEYS = ("mDDeg", "vDDeg", "mHDeg", "vHDeg")


class MetricsError(ValueError):
    """Record sets that cannot be aggregated as requested."""


@dataclass(frozen=True)
class RobustnessWeights:
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise MetricsError("alpha must be in (0, 1]")

    def weight(self, severity: int) -> float:
        return self.alpha ** severity

    def weights(self, severities: Iterable[int]) -> np.ndarray:
        return np.array([self.weight(s) for s in severities], dtype=np.float64)


@dataclass(frozen=True)
class SeverityStats:
    m_dsc: float
    s_dsc: float
    m_hd95: Optional[float]
    s_hd95: Optional[float]
    null_fraction: float
    n: int


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def severity_stats(records: Sequence[SampleMetrics]) -> SeverityStats:
    """Mean/std of Dice over all records and of HD95 over non-null records."""
    if not records:
        raise MetricsError("no records for this transform/severity")
    keys = {(r.transform, r.severity) for r in records}
    if len(keys) != 1:
        raise MetricsError(f"records mix several transform/severity cells: {sorted(keys)}")
    # fixed summation order keeps results independent of record order
    records = sorted(records, key=lambda r: r.sample_id)
    m_dsc, s_dsc = _mean_std([r.dsc for r in records])
    hd = [r.hd95_mm for r in records if not r.null_prediction]
    m_hd, s_hd = _mean_std(hd) if hd else (None, None)
    nulls = sum(r.null_prediction for r in records)
    return SeverityStats(m_dsc, s_dsc, m_hd, s_hd, nulls / len(records), len(records))


def weighted_mean(values: Sequence[float], weights: RobustnessWeights) -> float:
    """Weighted average of per-severity values for s = 0..5."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (NUM_LEVELS + 1,):
        raise MetricsError(f"expected {NUM_LEVELS + 1} per-severity values, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise MetricsError("per-severity values must be finite")
    w = weights.weights(range(NUM_LEVELS + 1))
    return float((w * values).sum() / w.sum())


def degradation(clean: float, values: Sequence[float], weights: RobustnessWeights,
                direction: str = "dsc") -> float:
    """Weighted change from ``clean`` over severities 1..5, positive when worse.

    ``direction="dsc"`` treats a drop as degradation (mean Dice); ``"hd"``
    treats a rise as degradation (HD95 and all standard deviations).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (NUM_LEVELS,):
        raise MetricsError(f"expected {NUM_LEVELS} per-severity values, got {values.shape}")
    if not (np.all(np.isfinite(values)) and math.isfinite(clean)):
        raise MetricsError("degradation inputs must be finite")
    if direction == "dsc":
        diff = clean - values
    elif direction == "hd":
        diff = values - clean
    else:
        raise ValueError(f"direction must be 'dsc' or 'hd', got {direction!r}")
    w = weights.weights(range(1, NUM_LEVELS + 1))
    return float((w * diff).sum() / w.sum())


@dataclass
class TransformSummary:
    transform: str
    per_severity: List[SeverityStats]  # index = severity, 0 is clean
    wmDSC: float
    wsDSC: float
    wmHD95: Optional[float]
    wsHD95: Optional[float]
    mDDeg: float
    vDDeg: float
    mHDeg: Optional[float]
    vHDeg: Optional[float]

    def metric(self, key: str) -> Optional[float]:
        return getattr(self, key)


@dataclass
class RobustnessReport:
    alpha: float
    clean: SeverityStats
    transforms: List[TransformSummary]
    aggregates: Dict[str, Optional[float]]
    null_percentage: float
    n_records: int

    def summary(self, transform: str) -> TransformSummary:
        for t in self.transforms:
            if t.transform == transform:
                return t
        raise KeyError(transform)

    def to_dict(self) -> dict:
        return asdict(self)


def _optional(fn, *args):
    if any(a is None for a in args) or any(
            isinstance(a, (list, tuple)) and any(x is None for x in a) for a in args):
        return None
    return fn(*args)


def _summarize(name: str, stats: List[SeverityStats], weights: RobustnessWeights) -> TransformSummary:
    m_dsc = [s.m_dsc for s in stats]
    s_dsc = [s.s_dsc for s in stats]
    m_hd = [s.m_hd95 for s in stats]
    s_hd = [s.s_hd95 for s in stats]
    return TransformSummary(
        transform=name,
        per_severity=stats,
        wmDSC=weighted_mean(m_dsc, weights),
        wsDSC=weighted_mean(s_dsc, weights),
        wmHD95=_optional(weighted_mean, m_hd, weights),
        wsHD95=_optional(weighted_mean, s_hd, weights),
        mDDeg=degradation(m_dsc[0], m_dsc[1:], weights, "dsc"),
        vDDeg=degradation(s_dsc[0], s_dsc[1:], weights, "hd"),
        mHDeg=_optional(lambda c, v: degradation(c, v, weights, "hd"), m_hd[0], m_hd[1:]),
        vHDeg=_optional(lambda c, v: degradation(c, v, weights, "hd"), s_hd[0], s_hd[1:]),
    )


def build_report(records: Iterable[SampleMetrics],
                 weights: RobustnessWeights = RobustnessWeights()) -> RobustnessReport:
    """Summaries per transform plus cross-transform means, sharing one clean row."""
    cells: Dict[Tuple[str, int], List[SampleMetrics]] = defaultdict(list)
    n = 0
    nulls = 0
    for r in records:
        cells[(r.transform, int(r.severity))].append(r)
        n += 1
        nulls += r.null_prediction
    clean_records = cells.pop((CLEAN, 0), None)
    if not clean_records:
        raise MetricsError("no clean (severity 0) records")
    clean = severity_stats(clean_records)
    names = sorted({t for t, _ in cells}, key=_transform_order)
    if not names:
        raise MetricsError("no transformed records")
    summaries = []
    for name in names:
        missing = [s for s in range(1, NUM_LEVELS + 1) if (name, s) not in cells]
        if missing:
            raise MetricsError(f"{name}: missing severity level(s) {missing}")
        stats = [clean] + [severity_stats(cells[(name, s)]) for s in range(1, NUM_LEVELS + 1)]
        summaries.append(_summarize(name, stats, weights))
    aggregates: Dict[str, Optional[float]] = {}
    for key in WEIGHTED_KEYS + DEGRADATION_KEYS:
        vals = [s.metric(key) for s in summaries]
        aggregates[key] = None if any(v is None for v in vals) else float(np.mean(vals))
    return RobustnessReport(
        alpha=weights.alpha,
        clean=clean,
        transforms=summaries,
        aggregates=aggregates,
        null_percentage=100.0 * nulls / n,
        n_records=n,
    )


def _transform_order(name: str) -> Tuple[int, str]:
    order = [k.value for k in TransformKind]
    return (order.index(name), name) if name in order else (len(order), name)


# ------------------------------------------------------------------ comparison


@dataclass(frozen=True)
class ComparisonCell:
    transform: str
    severity: int
    n: int
    statistic: Optional[float]
    p_raw: Optional[float]
    p_corrected: Optional[float]
    significant: bool
    decision: str  # "a_better" | "b_better" | "no_difference" | "insufficient data"
    mean_difference: Optional[float]


MIN_PAIRS = 5


def compare_models(records_a: Iterable[SampleMetrics], records_b: Iterable[SampleMetrics],
                   significance: float = 0.01, n_comparisons: int = NUM_LEVELS,
                   metric: str = "dsc") -> List[ComparisonCell]:
    """Paired signed-rank test per (transform, severity) with Bonferroni correction.

    ``metric="hd95"`` compares HD95 instead, skipping pairs where either side
    is a null prediction; for HD95 lower is better.
    """
    if metric not in ("dsc", "hd95"):
        raise ValueError(f"metric must be 'dsc' or 'hd95', got {metric!r}")
    if n_comparisons < 1:
        raise ValueError("n_comparisons must be >= 1")

    def index(records) -> Dict[Tuple[str, int], Dict[str, SampleMetrics]]:
        out: Dict[Tuple[str, int], Dict[str, SampleMetrics]] = defaultdict(dict)
        for r in records:
            key = (r.transform, int(r.severity))
            if r.sample_id in out[key]:
                raise MetricsError(f"duplicate record {r.sample_id} at {key}")
            out[key][r.sample_id] = r
        return out

    ia, ib = index(records_a), index(records_b)
    if set(ia) != set(ib):
        raise MetricsError(f"unpaired transform/severity cells: {sorted(set(ia) ^ set(ib))}")
    cells = []
    for key in sorted(ia, key=lambda k: (_transform_order(k[0]) if k[0] != CLEAN else (-1, ""), k[1])):
        a, b = ia[key], ib[key]
        if set(a) != set(b):
            raise MetricsError(f"unpaired samples at {key}: {sorted(set(a) ^ set(b))}")
        ids = sorted(a)
        if metric == "dsc":
            xa = [a[i].dsc for i in ids]
            xb = [b[i].dsc for i in ids]
        else:
            ids = [i for i in ids if not (a[i].null_prediction or b[i].null_prediction)]
            xa = [a[i].hd95_mm for i in ids]
            xb = [b[i].hd95_mm for i in ids]
        diff = np.asarray(xa, dtype=np.float64) - np.asarray(xb, dtype=np.float64)
        nonzero = int(np.count_nonzero(diff))
        mean_diff = float(diff.mean()) if diff.size else None
        if nonzero < MIN_PAIRS:
            cells.append(ComparisonCell(key[0], key[1], nonzero, None, None, None, False,
                                        "insufficient data", mean_diff))
            continue
        res = signed_rank_test(diff)
        p_corr = min(1.0, res.p_value * n_comparisons)
        significant = p_corr < significance
        if not significant:
            decision = "no_difference"
        else:
            a_higher = res.statistic > res.n * (res.n + 1) / 4.0
            a_better = a_higher if metric == "dsc" else not a_higher
            decision = "a_better" if a_better else "b_better"
        cells.append(ComparisonCell(key[0], key[1], res.n, res.statistic, res.p_value, p_corr,
                                    significant, decision, mean_diff))
    return cells
