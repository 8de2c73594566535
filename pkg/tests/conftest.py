"""Shared oracle helpers for the test suite.

These deliberately avoid the package's own statistical machinery where they
serve as independent checks (brute-force enumeration, mpmath-based normal
CDF), so each dual-route comparison keeps one side independent.
"""

import math

import numpy as np


def phi_oracle(x: float) -> float:
    """High-precision standard normal CDF via mpmath."""
    import mpmath as mp

    with mp.workdps(40):
        return float(0.5 * mp.erfc(-mp.mpf(x) / mp.sqrt(2)))


def phi_inverse_oracle(p: float, lo: float = -10.0, hi: float = 10.0) -> float:
    """Bisection against the mpmath CDF; independent of the package quantile."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi_oracle(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ks_distance_to_normal(values: np.ndarray, mean: float, sd: float) -> float:
    """One-sample KS distance of `values` against N(mean, sd^2)."""
    z = np.sort((np.asarray(values, dtype=float) - mean) / sd)
    cdf = np.array([0.5 * math.erfc(-v / math.sqrt(2)) for v in z])
    n = len(z)
    upper = np.max(np.arange(1, n + 1) / n - cdf)
    lower = np.max(cdf - np.arange(0, n) / n)
    return float(max(upper, lower))


def brute_ecdf(sample: np.ndarray, t: float) -> float:
    return float(np.mean(np.asarray(sample) <= t))


def brute_ks_statistic(x, y) -> float:
    """Sup |F_x - F_y| by direct evaluation at every pooled point."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    grid = np.concatenate([x, y])
    return max(abs(brute_ecdf(x, t) - brute_ecdf(y, t)) for t in grid)


def brute_kuiper_statistic(x, y) -> float:
    """D+ + D- by direct evaluation (sup over pooled points and the baseline 0)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    grid = np.concatenate([x, y])
    diffs = [brute_ecdf(x, t) - brute_ecdf(y, t) for t in grid]
    return max(max(diffs), 0.0) + max(max(-d for d in diffs), 0.0)


def brute_wmw_u(x, y) -> float:
    """Count of pairs x_i > y_j, ties counted half."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    u = 0.0
    for xi in x:
        for yj in y:
            if xi > yj:
                u += 1.0
            elif xi == yj:
                u += 0.5
    return u


def monotone_with_tolerance(values, nondecreasing: bool = True,
                            allowed_inversions: int = 1) -> bool:
    """True when the sequence is monotone up to the allowed adjacent inversions."""
    bad = 0
    for a, b in zip(values, values[1:]):
        if (b < a) if nondecreasing else (b > a):
            bad += 1
    return bad <= allowed_inversions
