"""Two-tailed paired t-test with a Bonferroni-adjusted significance flag."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

_EPS = 1e-15
_TINY = 1e-300


def _beta_cf(a: float, b: float, x: float) -> float:
    # Modified Lentz evaluation of the incomplete beta continued fraction.
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, 1000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_cf(b, a, 1.0 - x) / b


def t_two_tailed_p(t: float, df: int) -> float:
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    pvalue: float
    df: int
    significant: bool
    degenerate: bool = False


def paired_ttest(
    scores_a: Sequence[float],
    scores_b: Sequence[float],
    num_comparisons: int = 1,
    alpha: float = 0.01,
) -> TTestResult:
    """Paired t-test on ``a - b``; significant iff ``p < alpha / num_comparisons``.

    Identical inputs give a degenerate, non-significant result.  Constant
    nonzero differences give an infinite statistic and ``p = 0``.
    """
    if len(scores_a) != len(scores_b):
        raise ValueError("score vectors must have equal length")
    n = len(scores_a)
    if n < 2:
        raise ValueError("need at least two paired samples")
    if num_comparisons < 1:
        raise ValueError("num_comparisons must be >= 1")
    diffs = [float(a) - float(b) for a, b in zip(scores_a, scores_b)]
    df = n - 1
    if all(d == 0.0 for d in diffs):
        return TTestResult(0.0, 1.0, df, False, degenerate=True)
    mean = math.fsum(diffs) / n
    var = math.fsum((d - mean) ** 2 for d in diffs) / df
    if var == 0.0:
        t = math.copysign(math.inf, mean)
    else:
        t = mean / math.sqrt(var / n)
    p = t_two_tailed_p(t, df)
    return TTestResult(t, p, df, p < alpha / num_comparisons)
