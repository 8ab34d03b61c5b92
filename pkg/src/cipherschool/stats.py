"""Paired t-test for pre/post classroom scores.

t = mean(d) / (sd(d) / sqrt(n)) over per-student differences d, with the
sample standard deviation (n-1 denominator). The two-tailed p-value comes
from the Student-t survival function, evaluated through the regularized
incomplete beta function with the classic continued-fraction scheme, so
the package needs no statistics dependency at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

_MAX_ITERATIONS = 300
_EPS = 3e-16
_TINY = 1e-300


class DegenerateSample(ValueError):
    """All differences identical: the t statistic is undefined."""


@dataclass(frozen=True)
class PairedSample:
    pre: tuple[float, ...]
    post: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.pre) != len(self.post):
            raise ValueError("pre and post must have the same length")
        if len(self.pre) < 2:
            raise ValueError("need at least two paired observations")

    @classmethod
    def of(cls, pre: Sequence[float], post: Sequence[float]) -> "PairedSample":
        return cls(tuple(float(x) for x in pre), tuple(float(x) for x in post))


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITERATIONS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    front = math.exp(
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def student_t_two_tailed_p(t: float, df: int) -> float:
    """P(|T| >= |t|) for T ~ Student-t with df degrees of freedom."""
    if df < 1:
        raise ValueError("df must be at least 1")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def paired_t_test(sample: PairedSample) -> TTestResult:
    """Two-tailed paired t-test on the per-pair differences."""
    n = len(sample.pre)
    diffs = [post - pre for pre, post in zip(sample.pre, sample.post)]
    mean = sum(diffs) / n
    variance = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if variance == 0.0:
        raise DegenerateSample("all differences are identical; t is undefined")
    t = mean / math.sqrt(variance / n)
    return TTestResult(t=t, p=student_t_two_tailed_p(t, n - 1), df=n - 1)
