# stats_modules/significance.py

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from errors import DimensionError, DomainError
from stats_modules.student_t import t_sf_two_sided

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.05


@dataclass
class TTestResult:
    statistic: float
    pvalue: float
    df: int
    mean_difference: float
    degenerate: bool = False

    def to_dict(self):
        return {
            'statistic': self.statistic if math.isfinite(self.statistic) else None,
            'pvalue': self.pvalue,
            'df': self.df,
            'mean_difference': self.mean_difference,
            'degenerate': self.degenerate,
        }


@dataclass
class SignificanceResult:
    """BH-adjusted comparison family"""
    raw: list
    adjusted: list
    reject: list
    alpha: float = DEFAULT_ALPHA
    pairing_unit: str = 'fold'
    labels: list = field(default_factory=list)

    def to_dict(self):
        return {
            'raw': list(self.raw),
            'adjusted': list(self.adjusted),
            'reject': list(self.reject),
            'alpha': self.alpha,
            'pairing_unit': self.pairing_unit,
            'labels': list(self.labels),
        }


def paired_t_test(a, b):
    """Two-sided paired t-test on d = a - b with n - 1 degrees of freedom.

    Zero spread with a nonzero mean gives p = 0 flagged as degenerate;
    all-zero differences give p = 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"Paired samples must be equal-length vectors, got {a.shape} and {b.shape}")
    n = a.size
    if n < 2:
        raise DimensionError(f"Paired t-test needs at least 2 pairs, got {n}")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(statistic=0.0, pvalue=1.0, df=n - 1, mean_difference=0.0, degenerate=True)
        logger.warning(f"[STATS] Zero-variance differences with mean {mean:.6g}; reporting p=0")
        return TTestResult(statistic=math.copysign(math.inf, mean), pvalue=0.0, df=n - 1,
                           mean_difference=mean, degenerate=True)
    statistic = mean / (sd / math.sqrt(n))
    return TTestResult(statistic=statistic, pvalue=t_sf_two_sided(statistic, n - 1),
                       df=n - 1, mean_difference=mean)


def bh_adjust(pvals, alpha=DEFAULT_ALPHA, labels=None, pairing_unit='fold'):
    """Benjamini-Hochberg step-up procedure.

    Rejects the k smallest p-values, k = max{i : p_(i) <= i * alpha / m};
    adjusted p_(i) = min_{j >= i} (m / j) p_(j), capped at 1.
    """
    p = np.asarray(pvals, dtype=np.float64).reshape(-1)
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise DomainError("p-values must lie in [0, 1]")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    labels = list(labels) if labels is not None else [str(i) for i in range(p.size)]
    if len(labels) != p.size:
        raise DimensionError(f"{len(labels)} labels for {p.size} p-values")
    m = p.size
    if m == 0:
        return SignificanceResult([], [], [], alpha, pairing_unit, labels)

    order = np.argsort(p, kind='stable')
    ranked = p[order]
    ranks = np.arange(1, m + 1)
    passing = np.flatnonzero(ranked <= ranks * alpha / m)
    k = passing[-1] + 1 if passing.size else 0

    scaled = ranked * m / ranks
    adjusted_sorted = np.minimum(np.minimum.accumulate(scaled[::-1])[::-1], 1.0)
    adjusted = np.empty(m)
    adjusted[order] = adjusted_sorted
    reject = np.zeros(m, dtype=bool)
    reject[order[:k]] = True
    return SignificanceResult(raw=p.tolist(), adjusted=adjusted.tolist(), reject=reject.tolist(),
                              alpha=alpha, pairing_unit=pairing_unit, labels=labels)
