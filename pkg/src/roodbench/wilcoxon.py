"""Two-sided Wilcoxon signed-rank test for paired samples.

Zero differences are discarded and tied magnitudes get mid-ranks. Up to
``EXACT_MAX_N`` non-zero pairs the p-value comes from the exact permutation
distribution of the positive rank sum (computed on doubled ranks so that
mid-ranks stay integral); above it, a normal approximation with the tie
correction to the variance is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm, rankdata

__all__ = ["WilcoxonResult", "signed_rank_test", "exact_null_distribution", "EXACT_MAX_N"]

EXACT_MAX_N = 25


@dataclass(frozen=True)
class WilcoxonResult:
    n: int
    statistic: float  # sum of ranks of positive differences
    p_value: float
    method: str  # "exact" | "normal"


def exact_null_distribution(doubled_ranks: Sequence[int]) -> np.ndarray:
    """``counts[k]`` = number of sign assignments whose positive doubled-rank sum is ``k``."""
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    reach = 0
    for r in doubled_ranks:
        r = int(r)
        shifted = counts[: reach + 1].copy()
        counts[r: r + reach + 1] += shifted
        reach += r
    return counts


def signed_rank_test(x: Sequence[float], y: Sequence[float] | None = None) -> WilcoxonResult:
    """Test whether the paired differences ``x - y`` are symmetric about zero."""
    d = np.asarray(x, dtype=np.float64)
    if y is not None:
        d = d - np.asarray(y, dtype=np.float64)
    d = d[d != 0]
    n = int(d.size)
    if n == 0:
        return WilcoxonResult(0, 0.0, 1.0, "exact")
    ranks = rankdata(np.abs(d), method="average")
    w_plus = float(ranks[d > 0].sum())

    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(int)
        counts = exact_null_distribution(doubled)
        observed = int(round(2 * w_plus))
        total = 2 ** n
        lower = int(counts[: observed + 1].sum())
        upper = int(counts[observed:].sum())
        p = min(1.0, 2.0 * min(lower, upper) / total)
        return WilcoxonResult(n, w_plus, p, "exact")

    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float((tie_counts ** 3 - tie_counts).sum()) / 48.0
    if var <= 0:
        return WilcoxonResult(n, w_plus, 1.0, "normal")
    z = (w_plus - mean) / math.sqrt(var)
    p = min(1.0, 2.0 * float(norm.sf(abs(z))))
    return WilcoxonResult(n, w_plus, p, "normal")
