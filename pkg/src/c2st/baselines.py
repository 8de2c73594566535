"""Reference two-sample tests: rank, CDF-distance, and linear-time kernel tests.

All four return the same :class:`~c2st.core.TestOutcome` record the
classifier test uses, so benchmark drivers can treat them uniformly.

p-value conventions:

* MMD (linear-time): one-sided Gaussian with the empirical variance of the
  paired kernel terms.
* KS / WMW: exact permutation enumeration when the pooled sample is small
  enough (at most ``MAX_EXACT_COMBINATIONS`` label assignments), otherwise
  the classical asymptotic forms (Kolmogorov tail series with effective size
  n m / (n + m); tie-corrected normal with continuity correction).
* Kuiper: asymptotic tail series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import TestOutcome
from .numerics import Rng, as_sample, normal_cdf

__all__ = [
    "KernelConfig",
    "mmd_linear_test",
    "ks_test",
    "kuiper_test",
    "wmw_test",
    "median_heuristic_bandwidth",
    "kolmogorov_sf",
    "kuiper_sf",
]

# Enumeration bound for exact small-sample p-values: C(16, 8) = 12870 fits,
# C(18, 9) = 48620 does not.
MAX_EXACT_COMBINATIONS = 20_000
_MEDIAN_CAP = 2048


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel exp(-||a-b||^2 / (2 sigma^2)); None = median heuristic."""

    bandwidth: float | None = None

    def __post_init__(self):
        if self.bandwidth is not None and not self.bandwidth > 0.0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")


def median_heuristic_bandwidth(pooled: np.ndarray, cap: int = _MEDIAN_CAP) -> float:
    """Median pairwise Euclidean distance of the pooled sample.

    For very large samples an evenly strided subset of ``cap`` rows is used,
    which keeps the computation deterministic and O(cap^2).
    """
    x = np.asarray(pooled, dtype=np.float64)
    if x.shape[0] > cap:
        x = x[np.linspace(0, x.shape[0] - 1, cap).astype(np.int64)]
    sq = np.einsum("ij,ij->i", x, x)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0)
    upper = d2[np.triu_indices(x.shape[0], k=1)]
    sigma = float(np.median(np.sqrt(upper)))
    if not sigma > 0.0:
        raise ValueError("median pairwise distance is zero; bandwidth undefined")
    return sigma


def _kernel_rowwise(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    d2 = np.einsum("ij,ij->i", a - b, a - b)
    return np.exp(-d2 / (2.0 * sigma * sigma))


def mmd_linear_test(s_p, s_q, kernel: KernelConfig = KernelConfig(),
                    alpha: float = 0.05, rng: Rng | None = None) -> TestOutcome:
    """Linear-time kernel mean-discrepancy test.

    The statistic averages h over disjoint index pairs (2i-1, 2i):

        h = k(x1, x2) + k(y1, y2) - k(x1, y2) - k(x2, y1).

    Because the pairing depends on row order, both samples are first
    permuted by one shared shuffle drawn from the test's own rng (default
    seed 0); identical samples therefore still give a statistic of exactly
    zero.  Odd trailing rows are dropped after the shuffle.  The p-value is
    the one-sided Gaussian tail using the sample variance of the h terms.
    """
    x = as_sample(s_p, "s_p")
    y = as_sample(s_q, "s_q")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"samples must have equal size, got {x.shape[0]} and {y.shape[0]}")
    n = x.shape[0]
    if n < 4:
        raise ValueError(f"need at least 4 rows per sample, got {n}")
    if rng is None:
        rng = Rng(0)
    perm = rng.gen.permutation(n)
    x, y = x[perm], y[perm]
    m2 = 2 * (n // 2)
    x, y = x[:m2], y[:m2]
    sigma = kernel.bandwidth
    if sigma is None:
        sigma = median_heuristic_bandwidth(np.vstack([x, y]))
    x1, x2 = x[0::2], x[1::2]
    y1, y2 = y[0::2], y[1::2]
    h = (_kernel_rowwise(x1, x2, sigma) + _kernel_rowwise(y1, y2, sigma)
         - _kernel_rowwise(x1, y2, sigma) - _kernel_rowwise(x2, y1, sigma))
    stat = float(h.mean())
    n_h = m2 // 2
    var = float(h.var(ddof=1))
    if var == 0.0:
        if stat <= 0.0:
            pvalue = 1.0
        else:
            raise ValueError("degenerate h terms: zero variance with positive statistic")
    else:
        pvalue = normal_cdf(-stat / math.sqrt(var / n_h))
    return TestOutcome(
        test="mmd", statistic=stat, pvalue=pvalue, alpha=alpha,
        reject=bool(pvalue < alpha),
        details={"bandwidth": sigma, "n_h": n_h, "h_sd": math.sqrt(var)},
    )


def _as_1d(sample, name: str) -> np.ndarray:
    x = as_sample(sample, name)
    if x.shape[1] != 1:
        raise ValueError(f"{name} must be one-dimensional, got d={x.shape[1]}")
    return x[:, 0]


def _cdf_differences(x: np.ndarray, y: np.ndarray):
    """Signed F_x - F_y evaluated at every pooled point."""
    xs = np.sort(x)
    ys = np.sort(y)
    grid = np.concatenate([xs, ys])
    fx = np.searchsorted(xs, grid, side="right") / xs.shape[0]
    fy = np.searchsorted(ys, grid, side="right") / ys.shape[0]
    return fx - fy


def kolmogorov_sf(lam: float) -> float:
    """Kolmogorov tail Q(lam) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2)."""
    if lam <= 0.0:
        return 1.0
    total = 0.0
    sign = 1.0
    for k in range(1, 100_001):
        term = math.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < 1e-12:
            break
        sign = -sign
    return min(max(2.0 * total, 0.0), 1.0)


def kuiper_sf(lam: float) -> float:
    """Kuiper tail Q(lam) = 2 sum_{k>=1} (4 k^2 lam^2 - 1) exp(-2 k^2 lam^2)."""
    if lam <= 0.0:
        return 1.0
    total = 0.0
    for k in range(1, 100_001):
        e = math.exp(-2.0 * k * k * lam * lam)
        total += (4.0 * k * k * lam * lam - 1.0) * e
        if e < 1e-12 and k > 3:
            break
    return min(max(2.0 * total, 0.0), 1.0)


def _midranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their midrank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.shape[0]:
        j = i
        while j + 1 < values.shape[0] and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_feasible(n: int, m: int) -> bool:
    return math.comb(n + m, n) <= MAX_EXACT_COMBINATIONS


def _ks_statistic_for_labels(sorted_vals: np.ndarray, group_sizes: list[int],
                             is_x: np.ndarray, n: int, m: int) -> float:
    """Sup CDF difference for one labelling, honouring ties via value groups."""
    d = 0.0
    cx = 0
    cy = 0
    pos = 0
    for size in group_sizes:
        cx += int(is_x[pos:pos + size].sum())
        cy += size - int(is_x[pos:pos + size].sum())
        pos += size
        diff = abs(cx / n - cy / m)
        if diff > d:
            d = diff
    return d


def _tie_groups(sorted_vals: np.ndarray) -> list[int]:
    sizes = []
    i = 0
    n = sorted_vals.shape[0]
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        sizes.append(j - i + 1)
        i = j + 1
    return sizes


def _ks_exact_pvalue(x: np.ndarray, y: np.ndarray, d_obs: float) -> float:
    """P[D >= d_obs] by full enumeration of label assignments."""
    n, m = x.shape[0], y.shape[0]
    pooled = np.sort(np.concatenate([x, y]))
    groups = _tie_groups(pooled)
    total = 0
    hits = 0
    is_x = np.zeros(n + m, dtype=bool)
    for combo in combinations(range(n + m), n):
        is_x[:] = False
        is_x[list(combo)] = True
        d = _ks_statistic_for_labels(pooled, groups, is_x, n, m)
        total += 1
        if d >= d_obs - 1e-12:
            hits += 1
    return hits / total


def ks_test(s_p, s_q, alpha: float = 0.05, method: str = "auto") -> TestOutcome:
    """Two-sample Kolmogorov-Smirnov test, D = sup |F_p - F_q|.

    ``method`` is "auto" (exact enumeration when feasible, else asymptotic),
    "exact", or "asymptotic".  The asymptotic tail uses the effective size
    n m / (n + m).
    """
    x = _as_1d(s_p, "s_p")
    y = _as_1d(s_q, "s_q")
    diffs = _cdf_differences(x, y)
    d = float(np.max(np.abs(diffs)))
    n, m = x.shape[0], y.shape[0]
    if method not in ("auto", "exact", "asymptotic"):
        raise ValueError(f"unknown method {method!r}")
    use_exact = method == "exact" or (method == "auto" and _exact_feasible(n, m))
    if use_exact:
        if not _exact_feasible(n, m):
            raise ValueError("samples too large for exact enumeration")
        pvalue = _ks_exact_pvalue(x, y, d)
        mode = "exact"
    else:
        lam = math.sqrt(n * m / (n + m)) * d
        pvalue = kolmogorov_sf(lam)
        mode = "asymptotic"
    return TestOutcome(
        test="ks", statistic=d, pvalue=pvalue, alpha=alpha,
        reject=bool(pvalue < alpha),
        details={"n": n, "m": m, "method": mode},
    )


def kuiper_test(s_p, s_q, alpha: float = 0.05) -> TestOutcome:
    """Kuiper test, V = D+ + D- (both one-sided sup CDF differences)."""
    x = _as_1d(s_p, "s_p")
    y = _as_1d(s_q, "s_q")
    diffs = _cdf_differences(x, y)
    d_plus = float(max(np.max(diffs), 0.0) + 0.0)
    d_minus = float(max(np.max(-diffs), 0.0) + 0.0)
    v = d_plus + d_minus
    n, m = x.shape[0], y.shape[0]
    lam = math.sqrt(n * m / (n + m)) * v
    pvalue = kuiper_sf(lam)
    return TestOutcome(
        test="kuiper", statistic=v, pvalue=pvalue, alpha=alpha,
        reject=bool(pvalue < alpha),
        details={"n": n, "m": m, "d_plus": d_plus, "d_minus": d_minus},
    )


def _wmw_u(x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """U statistic of the first sample (pairs with x > y; ties count half)."""
    pooled = np.concatenate([x, y])
    ranks = _midranks(pooled)
    n = x.shape[0]
    u = float(ranks[:n].sum() - n * (n + 1) / 2.0)
    return u, pooled


def _wmw_exact_pvalue(pooled: np.ndarray, n: int, m: int, u_obs: float) -> float:
    """Two-sided P[|U - nm/2| >= |u_obs - nm/2|] by full enumeration."""
    ranks = _midranks(pooled)
    center = n * m / 2.0
    target = abs(u_obs - center)
    offset = n * (n + 1) / 2.0
    total = 0
    hits = 0
    for combo in combinations(range(n + m), n):
        u = ranks[list(combo)].sum() - offset
        total += 1
        if abs(u - center) >= target - 1e-9:
            hits += 1
    return hits / total


def wmw_test(s_p, s_q, alpha: float = 0.05, method: str = "auto") -> TestOutcome:
    """Wilcoxon-Mann-Whitney rank test (two-sided).

    The statistic is U for the first sample via midranks.  Large samples use
    the normal approximation with the standard tie correction and a 0.5
    continuity correction; small samples are enumerated exactly (see
    ``method`` in :func:`ks_test`).  All pooled values identical is an error
    (zero variance).
    """
    x = _as_1d(s_p, "s_p")
    y = _as_1d(s_q, "s_q")
    n, m = x.shape[0], y.shape[0]
    if n < 2 or m < 2:
        raise ValueError("need at least 2 observations per sample")
    u, pooled = _wmw_u(x, y)
    big_n = n + m
    _, tie_counts = np.unique(pooled, return_counts=True)
    if tie_counts.shape[0] < 2:
        raise ValueError("all pooled values identical: rank variance is zero")
    if method not in ("auto", "exact", "asymptotic"):
        raise ValueError(f"unknown method {method!r}")
    use_exact = method == "exact" or (method == "auto" and _exact_feasible(n, m))
    if use_exact:
        if not _exact_feasible(n, m):
            raise ValueError("samples too large for exact enumeration")
        pvalue = _wmw_exact_pvalue(pooled, n, m, u)
        mode = "exact"
    else:
        tie_term = float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts))
        var = n * m / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
        z = max(abs(u - n * m / 2.0) - 0.5, 0.0) / math.sqrt(var)
        pvalue = min(2.0 * normal_cdf(-z), 1.0)
        mode = "asymptotic"
    return TestOutcome(
        test="wmw", statistic=u, pvalue=pvalue, alpha=alpha,
        reject=bool(pvalue < alpha),
        details={"n": n, "m": m, "method": mode},
    )
