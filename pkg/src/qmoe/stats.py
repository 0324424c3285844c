"""Paired significance testing without a statistics library.

The two-sided p-value of a paired t statistic reduces to the regularized
incomplete beta function:

    p = I_x(nu/2, 1/2)   with   x = nu / (nu + t^2),  nu = n - 1.

I_x(a, b) is evaluated with the standard continued-fraction expansion
(modified Lentz iteration on the even/odd coefficient pairs), which
converges to ~1e-14 for the a, b > 0 arguments used here; closed-form
checks for nu = 1 and nu = 2 pin the accuracy in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError

_MAX_ITER = 300
_EPS = 1e-15
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
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
    raise NumericalError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0, 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise InputError("betainc requires a, b > 0")
    if x < 0 or x > 1:
        raise InputError("betainc requires 0 <= x <= 1")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    # the continued fraction converges fast below the distribution mean;
    # use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) on the other side
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, dof: int) -> float:
    """Two-sided tail probability P(|T| >= |t|) for Student's t."""
    if dof < 1:
        raise InputError(f"degrees of freedom must be >= 1, got {dof}")
    if not math.isfinite(t):
        raise NumericalError("non-finite t statistic")
    if t == 0.0:
        return 1.0
    return betainc(dof / 2.0, 0.5, dof / (dof + t * t))


@dataclass
class TTestResult:
    t_statistic: float
    raw_p: float
    corrected_p: float
    significant: bool
    num_pairs: int

    def marker(self) -> str:
        return "*" if self.significant else ""


def paired_ttest_bonferroni(per_query_a, per_query_b, num_comparisons: int = 1,
                            alpha: float = 0.001) -> TTestResult:
    """Two-sided paired Student's t-test with Bonferroni correction.

    Both lists must hold the same queries in the same order. The corrected
    p-value is min(1, raw_p * num_comparisons); significance is judged at
    ``alpha`` (default 0.001). All-zero differences report t=0, p=1; a
    nonzero mean with zero variance has no finite t statistic and raises.
    """
    a = np.asarray(per_query_a, dtype=np.float64)
    b = np.asarray(per_query_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"paired samples must be equal-length vectors, got "
                         f"{a.shape} and {b.shape}")
    n = a.shape[0]
    if n < 2:
        raise InputError(f"need at least 2 pairs, got {n}")
    if num_comparisons < 1:
        raise InputError("num_comparisons must be >= 1")
    diff = a - b
    mean = float(diff.mean())
    var = float(diff.var(ddof=1))
    if var == 0.0:
        if mean == 0.0:
            return TTestResult(t_statistic=0.0, raw_p=1.0, corrected_p=1.0,
                               significant=False, num_pairs=n)
        raise NumericalError(
            "degenerate paired t-test: identical nonzero differences have "
            "zero variance and no finite t statistic")
    t = mean / math.sqrt(var / n)
    raw_p = student_t_sf2(t, n - 1)
    corrected = min(1.0, raw_p * num_comparisons)
    return TTestResult(t_statistic=t, raw_p=raw_p, corrected_p=corrected,
                       significant=corrected < alpha, num_pairs=n)
