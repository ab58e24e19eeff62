"""Result aggregation: mean/std, percentile-bootstrap confidence interval of
the mean, and a two-sided paired t-test whose t CDF is evaluated through the
regularized incomplete beta function (continued fraction), so no statistics
package is needed at runtime."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_BETACF_MAX_ITER = 200
_BETACF_EPS = 3e-14
_BETACF_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETACF_FPMIN:
        d = _BETACF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_FPMIN:
            d = _BETACF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETACF_FPMIN:
            c = _BETACF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_FPMIN:
            d = _BETACF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETACF_FPMIN:
            c = _BETACF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    """CDF of Student's t with df degrees of freedom."""
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0 if t < 0 else 1.0
    tail = 0.5 * betainc(0.5 * df, 0.5, df / (df + t * t))
    return tail if t < 0 else 1.0 - tail


def paired_t_test(a, b) -> tuple[float, float]:
    """Two-sided paired t-test. Zero-variance differences fall back to the
    documented convention: p=1 when the lists are identical, p=0 when they
    differ by a constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"paired samples differ in length: {a.shape} vs {b.shape}")
    n = a.size
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = a - b
    mean_d = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean_d == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean_d), 0.0
    t = mean_d / (sd / math.sqrt(n))
    p = 2.0 * (1.0 - t_cdf(abs(t), n - 1))
    return t, p


def bootstrap_ci_mean(xs, n_boot: int, rng: np.random.Generator,
                      level: float = 0.95) -> tuple[float, float]:
    """Percentile bootstrap CI of the mean."""
    xs = np.asarray(xs, dtype=np.float64)
    idx = rng.integers(0, xs.size, size=(n_boot, xs.size))
    means = xs[idx].mean(axis=1)
    tail = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(means, [tail, 100.0 - tail])
    return float(lo), float(hi)


@dataclass
class StatsSummary:
    n: int
    mean: float
    std: float
    ci_low: float
    ci_high: float
    t_stat: float | None = None
    p_value: float | None = None


def aggregate_stats(accs, baseline_accs=None, n_boot: int = 10000,
                    rng: np.random.Generator | None = None) -> StatsSummary:
    """Mean, sample std, bootstrap 95% CI of the mean, and (when a paired
    baseline is supplied) the two-sided paired t-test p-value."""
    xs = np.asarray(accs, dtype=np.float64)
    if xs.size < 2:
        raise ValueError("aggregate_stats needs at least 2 observations")
    rng = rng if rng is not None else np.random.default_rng(0)
    lo, hi = bootstrap_ci_mean(xs, n_boot, rng)
    summary = StatsSummary(n=int(xs.size), mean=float(xs.mean()),
                           std=float(xs.std(ddof=1)), ci_low=lo, ci_high=hi)
    if baseline_accs is not None:
        summary.t_stat, summary.p_value = paired_t_test(xs, baseline_accs)
    return summary
