"""Self-contained statistical tests used by the experiment analyzer.

Implements the Shapiro-Wilk W test (Royston's AS R94 approximation), the
Wilcoxon rank-sum / Mann-Whitney U test with an exact small-sample branch,
Welch's t-test, the paired t-test, and a Monte Carlo chi-square uniformity
test.  Only elementary numerics are used: an inverse-normal rational
approximation and a continued-fraction regularized incomplete beta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import groupby
from typing import Optional, Sequence

import numpy as np


class StatsError(ValueError):
    pass


class DegenerateSample(StatsError):
    """The sample has no variance (or too few points) for the requested test."""


class EmptySample(StatsError):
    pass


class LengthMismatch(StatsError):
    pass


class EmptyCounts(StatsError):
    pass


@dataclass(frozen=True)
class Sample:
    values: tuple[float, ...]
    label: str = ""


@dataclass(frozen=True)
class TestResult:
    test_name: str
    statistic: float
    p_value: float
    n1: int
    n2: int
    notes: str = ""


def _values(x) -> list[float]:
    vals = [float(v) for v in (x.values if isinstance(x, Sample) else x)]
    if any(not math.isfinite(v) for v in vals):
        raise StatsError("samples must contain finite values only")
    return vals


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def _sample_var(xs: Sequence[float]) -> float:
    m = _mean(xs)
    return sum((v - m) ** 2 for v in xs) / (len(xs) - 1)


def norm_sf(z: float) -> float:
    """Upper tail of the standard normal distribution."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# Acklam's rational approximation of the normal quantile, sharpened with one
# Halley step; accurate to full double precision over (0, 1).
_PPF_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
          1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_PPF_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
          6.680131188771972e01, -1.328068155288572e01)
_PPF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
          -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_PPF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
          3.754408661907416e00)


def norm_ppf(p: float) -> float:
    """Standard normal quantile function."""
    if not 0.0 < p < 1.0:
        raise StatsError(f"norm_ppf requires p in (0, 1), got {p}")
    a, b, c, d = _PPF_A, _PPF_B, _PPF_C, _PPF_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
             / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = ((((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
             / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
              / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    # One Halley refinement against the exact CDF.
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided p-value for a t statistic with `df` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    if t == 0.0:
        return 1.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


# -- Shapiro-Wilk ------------------------------------------------------------

_SW_C1 = (-2.706056, 4.434685, -2.071190, -0.147981, 0.221157, 0.0)
_SW_C2 = (-3.582633, 5.682633, -1.752461, -0.293762, 0.042981, 0.0)
_SW_C3 = (-0.0006714, 0.025054, -0.39978, 0.544)
_SW_C4 = (-0.0020322, 0.062767, -0.77857, 1.3822)
_SW_C5 = (0.0038915, -0.083751, -0.31082, -1.5861)
_SW_C6 = (0.0030302, -0.082676, -0.4803)


def _polyval(coeffs: Sequence[float], x: float) -> float:
    acc = 0.0
    for c in coeffs:
        acc = acc * x + c
    return acc


def _sw_weights(n: int) -> list[float]:
    if n == 3:
        r = math.sqrt(0.5)
        return [-r, 0.0, r]
    m = [norm_ppf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)]
    ssq = sum(v * v for v in m)
    u = 1.0 / math.sqrt(n)
    a_n = m[-1] / math.sqrt(ssq) + _polyval(_SW_C1, u)
    if n > 5:
        a_n1 = m[-2] / math.sqrt(ssq) + _polyval(_SW_C2, u)
        phi = (ssq - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (1.0 - 2.0 * a_n ** 2 - 2.0 * a_n1 ** 2)
        a = [v / math.sqrt(phi) for v in m]
        a[-1], a[0] = a_n, -a_n
        a[-2], a[1] = a_n1, -a_n1
    else:
        phi = (ssq - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n ** 2)
        a = [v / math.sqrt(phi) for v in m]
        a[-1], a[0] = a_n, -a_n
    return a


def shapiro_wilk(x, label: str = "") -> TestResult:
    """Shapiro-Wilk normality test for 3 <= n <= 5000 (AS R94 approximation)."""
    vals = sorted(_values(x))
    n = len(vals)
    if n < 3:
        raise DegenerateSample(f"Shapiro-Wilk needs at least 3 observations, got {n}")
    if n > 5000:
        raise StatsError(f"Shapiro-Wilk approximation is valid up to n=5000, got {n}")
    if vals[-1] - vals[0] == 0.0:
        raise DegenerateSample("Shapiro-Wilk is undefined for a zero-variance sample")

    a = _sw_weights(n)
    mean = _mean(vals)
    numer = sum(w * v for w, v in zip(a, vals)) ** 2
    denom = sum((v - mean) ** 2 for v in vals)
    w_stat = min(numer / denom, 1.0 - 1e-15)

    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w_stat)) - math.asin(math.sqrt(0.75)))
        p = min(max(p, 0.0), 1.0)
        return TestResult("shapiro_wilk", w_stat, p, n, 0, label or "exact n=3")

    w1 = 1.0 - w_stat
    if n <= 11:
        gamma = 0.459 * n - 2.273
        if gamma - math.log(w1) <= 0.0:
            return TestResult("shapiro_wilk", w_stat, 1e-19, n, 0, label)
        y = -math.log(gamma - math.log(w1))
        mu = _polyval(_SW_C3, float(n))
        sigma = math.exp(_polyval(_SW_C4, float(n)))
    else:
        y = math.log(w1)
        ln_n = math.log(n)
        mu = _polyval(_SW_C5, ln_n)
        sigma = math.exp(_polyval(_SW_C6, ln_n))
    p = norm_sf((y - mu) / sigma)
    return TestResult("shapiro_wilk", w_stat, p, n, 0, label)


# -- rank-sum ----------------------------------------------------------------

def _midranks(pooled: Sequence[float]) -> list[float]:
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    ranks = [0.0] * len(pooled)
    pos = 0
    for _, grp in groupby(order, key=lambda i: pooled[i]):
        idx = list(grp)
        avg = pos + (len(idx) + 1) / 2.0
        for i in idx:
            ranks[i] = avg
        pos += len(idx)
    return ranks


def _exact_u_tail_counts(n1: int, n2: int) -> list[int]:
    """Count rank subsets of size n1 from 1..n1+n2 by their U statistic."""
    max_u = n1 * n2
    # ways[k][u]: subsets of k ranks seen so far with U = (rank sum) - k(k+1)/2 = u
    ways = [[0] * (max_u + 1) for _ in range(n1 + 1)]
    ways[0][0] = 1
    for rank in range(1, n1 + n2 + 1):
        for k in range(min(rank, n1), 0, -1):
            row, prev = ways[k], ways[k - 1]
            shift = rank - k  # U contribution of taking this rank as the k-th pick
            for u in range(max_u, shift - 1, -1):
                if prev[u - shift]:
                    row[u] += prev[u - shift]
    return ways[n1]


def _exact_two_sided_p(u1: float, n1: int, n2: int) -> float:
    small, large = min(n1, n2), max(n1, n2)
    counts = _exact_u_tail_counts(small, large)
    total = sum(counts)
    u_int = int(round(u1))
    lower = sum(counts[: u_int + 1])
    upper = sum(counts[u_int:])
    return min(1.0, 2.0 * min(lower, upper) / total)


def _normal_two_sided_p(u1: float, n1: int, n2: int, pooled: Sequence[float]) -> tuple[float, float]:
    """Tie-corrected, continuity-corrected approximation; returns (p, tie_term)."""
    mu = n1 * n2 / 2.0
    n = n1 + n2
    tie_term = 0.0
    for _, grp in groupby(sorted(pooled)):
        t = len(list(grp))
        tie_term += t ** 3 - t
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0.0:
        return 1.0, tie_term
    diff = u1 - mu
    z = (diff - math.copysign(0.5, diff)) / math.sqrt(var) if diff != 0.0 else 0.0
    return min(1.0, 2.0 * norm_sf(abs(z))), tie_term


def wilcoxon_rank_sum(x, y, label: str = "") -> TestResult:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney U) test.

    Small tie-free samples (min size <= 8) get an exact enumeration p-value;
    otherwise the normal approximation with midrank tie correction and a 0.5
    continuity correction is used.  The statistic reported is U for the first
    sample; the rank sum and the counterpart U are carried in the notes.
    """
    xs, ys = _values(x), _values(y)
    n1, n2 = len(xs), len(ys)
    if n1 == 0 or n2 == 0:
        raise EmptySample("both samples must be non-empty")
    pooled = xs + ys
    ranks = _midranks(pooled)
    w1 = sum(ranks[:n1])
    u1 = w1 - n1 * (n1 + 1) / 2.0
    u2 = n1 * n2 - u1
    has_ties = len(set(pooled)) != len(pooled)

    if min(n1, n2) <= 8 and not has_ties:
        p = _exact_two_sided_p(u1, n1, n2)
        notes = f"W1={w1:g}, U2={u2:g}, method=exact"
    else:
        p, tie_term = _normal_two_sided_p(u1, n1, n2, pooled)
        notes = f"W1={w1:g}, U2={u2:g}, method=normal, tie_term={tie_term:g}"
    return TestResult("wilcoxon_rank_sum", u1, p, n1, n2, (label + " " if label else "") + notes)


def welch_t_test(x, y, label: str = "") -> TestResult:
    """Welch's unequal-variance t-test with Satterthwaite degrees of freedom."""
    xs, ys = _values(x), _values(y)
    n1, n2 = len(xs), len(ys)
    if n1 < 2 or n2 < 2:
        raise DegenerateSample("Welch's t-test needs at least 2 observations per group")
    v1, v2 = _sample_var(xs), _sample_var(ys)
    if v1 == 0.0 or v2 == 0.0:
        raise DegenerateSample("Welch's t-test is undefined for a zero-variance group")
    se1, se2 = v1 / n1, v2 / n2
    t = (_mean(xs) - _mean(ys)) / math.sqrt(se1 + se2)
    df = (se1 + se2) ** 2 / (se1 ** 2 / (n1 - 1) + se2 ** 2 / (n2 - 1))
    p = t_sf_two_sided(t, df)
    return TestResult("welch_t", t, p, n1, n2, (label + " " if label else "") + f"df={df:.4f}")


def paired_t_test(x, y, label: str = "") -> TestResult:
    """Two-sided paired t-test on elementwise differences."""
    xs, ys = _values(x), _values(y)
    if len(xs) != len(ys):
        raise LengthMismatch(f"paired samples differ in length: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise DegenerateSample("paired t-test needs at least 2 pairs")
    d = [a - b for a, b in zip(xs, ys)]
    if all(v == 0.0 for v in d):
        raise DegenerateSample("paired t-test is undefined for identical samples")
    mean_d = _mean(d)
    var_d = _sample_var(d)
    if var_d == 0.0:
        t = math.copysign(math.inf, mean_d)
        return TestResult("paired_t", t, 0.0, n, n, "constant non-zero differences")
    t = mean_d / math.sqrt(var_d / n)
    p = t_sf_two_sided(t, n - 1)
    return TestResult("paired_t", t, p, n, n, (label + " " if label else "") + f"df={n - 1}")


def chi_square_uniform_mc(counts: Sequence[int], draws: int = 10000, seed: int = 0) -> TestResult:
    """Chi-square goodness of fit against uniform, with a Monte Carlo p-value.

    The p-value is the add-one tail estimate (1 + #{simulated >= observed}) /
    (draws + 1) under multinomial resampling with a dedicated seeded generator,
    so it is never exactly zero.
    """
    counts = [int(c) for c in counts]
    k = len(counts)
    total = sum(counts)
    if k < 2 or total <= 0:
        raise EmptyCounts("need at least two categories with a positive total")
    if any(c < 0 for c in counts):
        raise EmptyCounts("counts must be non-negative")
    expected = total / k
    observed = float(((np.asarray(counts, dtype=float) - expected) ** 2 / expected).sum())
    gen = np.random.default_rng(seed)
    sims = gen.multinomial(total, [1.0 / k] * k, size=draws).astype(float)
    sim_stats = ((sims - expected) ** 2 / expected).sum(axis=1)
    exceed = int((sim_stats >= observed - 1e-9).sum())
    p = (1 + exceed) / (draws + 1)
    return TestResult(
        "chi_square_uniform_mc", observed, p, k, draws, f"total={total}, seed={seed}"
    )
