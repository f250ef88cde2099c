"""Descriptive statistics and the dependent (paired) t-test.

The Student-t tail probability goes through the regularized incomplete beta
function, evaluated with the modified Lentz continued fraction.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroVariance

_TINY = 1e-300
_EPS = 1e-15
_MAX_ITER = 10_000


@dataclass(frozen=True)
class StatSummary:
    n: int
    mean: float
    std: float

    def to_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    n: int
    mean_diff: float
    std_diff: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean_diff,
            "std": self.std_diff,
            "t": self.t,
            "p": self.p,
            "df": self.df,
        }


def describe(xs) -> StatSummary:
    x = np.asarray(xs, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least 2 values")
    return StatSummary(int(x.size), float(x.mean()), float(x.std(ddof=1)))


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, _MAX_ITER + 1):
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
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)`` for ``a, b > 0``, ``0 <= x <= 1``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # the fraction converges fast only on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_tailed(t: float, df: float) -> float:
    """``P(|T| >= |t|)`` for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return min(1.0, max(0.0, betainc(df / 2.0, 0.5, x)))


def t_from_summary(mean_diff: float, std_diff: float, n: int) -> float:
    return mean_diff / (std_diff / math.sqrt(n))


def paired_ttest(a, b) -> TTestResult:
    """Dependent t-test on ``d = a - b``; two-tailed p, ``df = n - 1``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-d and of equal length")
    if a.size < 2:
        raise ValueError("need at least 2 pairs")
    d = a - b
    if np.all(d == d[0]):
        raise ZeroVariance("all paired differences are identical")
    n = int(d.size)
    mean, std = float(d.mean()), float(d.std(ddof=1))
    t = t_from_summary(mean, std, n)
    return TTestResult(t, t_two_tailed(t, n - 1), n - 1, n, mean, std)
