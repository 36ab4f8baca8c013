"""Summary statistics: order stats, Pearson correlation, least squares.

Quartiles interpolate linearly between order statistics (numpy's default
"linear" method). The Pearson p-value is the conventional two-sided Student-t
test on n-2 degrees of freedom, evaluated through the regularized incomplete
beta function.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import betainc

from .errors import (
    EmptyInputError,
    LengthMismatchError,
    TooFewPointsError,
    ZeroVarianceError,
)


class DistributionStats(NamedTuple):
    mean: float
    median: float
    q1: float
    q3: float


class PearsonResult(NamedTuple):
    rho: float
    p_two_sided: float


class LinearFit(NamedTuple):
    slope: float
    intercept: float


def distribution_stats(scores: Sequence[float]) -> DistributionStats:
    """Mean, median, and quartiles of a nonempty score list."""
    if len(scores) == 0:
        raise EmptyInputError("no scores to summarize")
    arr = np.asarray(scores, dtype=float)
    q1, median, q3 = np.quantile(arr, [0.25, 0.5, 0.75])
    return DistributionStats(float(arr.mean()), float(median), float(q1), float(q3))


def pearson(x: Sequence[float], y: Sequence[float]) -> PearsonResult:
    """Sample Pearson coefficient with a two-sided p-value.

    Requires at least 3 paired points and nonzero variance on both sides.
    """
    if len(x) != len(y):
        raise LengthMismatchError(f"got {len(x)} x values vs {len(y)} y values")
    n = len(x)
    if n < 3:
        raise TooFewPointsError(f"Pearson correlation needs >= 3 points, got {n}")
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVarianceError("correlation undefined for a constant variable")
    rho = float(dx @ dy) / np.sqrt(sxx * syy)
    rho = float(min(1.0, max(-1.0, rho)))

    df = n - 2
    denom = 1.0 - rho * rho
    if denom <= 0.0:
        p = 0.0
    else:
        t_squared = rho * rho * df / denom
        p = float(betainc(df / 2.0, 0.5, df / (df + t_squared)))
    return PearsonResult(rho, p)


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    """Ordinary least squares line through (x, y) points."""
    if len(x) != len(y):
        raise LengthMismatchError(f"got {len(x)} x values vs {len(y)} y values")
    if len(x) < 2:
        raise TooFewPointsError(f"line fit needs >= 2 points, got {len(x)}")
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    dx = xa - xa.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise ZeroVarianceError("line fit undefined for constant x")
    slope = float(dx @ (ya - ya.mean())) / sxx
    return LinearFit(slope, float(ya.mean() - slope * xa.mean()))
