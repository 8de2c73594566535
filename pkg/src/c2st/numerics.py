"""Special functions, seedable random streams, and the samplers used across the toolkit.

Every stochastic routine in this package draws from an :class:`Rng`, a thin
wrapper over numpy's PCG64 generator.  The same seed always reproduces the
same stream, and independent child streams can be derived from a parent seed
plus an integer index path, which is what makes parallel Monte Carlo trials
reproducible cell-by-cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Rng",
    "GaussianApprox",
    "normal_cdf",
    "normal_quantile",
    "binomial_half_tail",
    "sample_normal",
    "sample_student_t",
    "sample_sinusoid",
    "standardize",
    "as_sample",
]

_SQRT2 = math.sqrt(2.0)


class Rng:
    """Deterministic PCG64 stream with derivable child streams.

    ``Rng(seed)`` always produces the same draws.  ``child(i, j, ...)`` mixes
    the parent seed with the integer key path through numpy's SeedSequence
    spawn-key mechanism, so children with distinct keys are statistically
    independent and reproducible without sharing any mutable state.

    An Rng instance is single-owner: callers that need parallel randomness
    derive children instead of sharing one generator.
    """

    __slots__ = ("seed", "key", "gen")

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, *key: int) -> "Rng":
        """Derive an independent stream keyed by ``key`` under this seed."""
        return Rng(self.seed, self.key + tuple(key))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Rng(seed={self.seed}, key={self.key})"


def normal_cdf(x: float) -> float:
    """Standard normal CDF.

    Uses the complementary error function, accurate to a few ulp (far below
    the 1e-10 budget needed by the power formula).
    """
    return 0.5 * math.erfc(-float(x) / _SQRT2)


# Acklam's rational approximation to the standard normal quantile.
_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
             6.680131188771972e+01, -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
             3.754408661907416e+00)
_P_LOW = 0.02425


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF on (0, 1).

    Acklam's rational approximation polished by one Halley step against
    :func:`normal_cdf`, which brings the error near machine precision.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_quantile requires 0 < p < 1, got {p}")
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    # One Halley refinement: e is the CDF error, u the Newton step.
    e = normal_cdf(x) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def binomial_half_tail(n: int, k: int, mid_p: bool = False) -> float:
    """Upper tail P[Binomial(n, 1/2) >= k].

    With ``mid_p=True`` returns the mid-p variant P[X > k] + P[X = k]/2,
    which is the quantity the continuity-uncorrected Gaussian approximation
    actually targets on the lattice.  Computed by log-space summation from
    the far tail inward, accurate to ~1e-14 relative for n up to 1e4.
    """
    n = int(n)
    k = int(k)
    if n < 1:
        raise ValueError(f"binomial_half_tail requires n >= 1, got {n}")
    if k <= 0:
        tail = 1.0
    elif k > n:
        tail = 0.0
    else:
        log_half_n = -n * math.log(2.0)
        lg_n1 = math.lgamma(n + 1)
        total = 0.0
        for j in range(n, k - 1, -1):  # smallest terms first
            total += math.exp(lg_n1 - math.lgamma(j + 1) - math.lgamma(n - j + 1) + log_half_n)
        tail = min(total, 1.0)
    if mid_p and 0 <= k <= n:
        pmf = math.exp(math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
                       - n * math.log(2.0))
        tail -= 0.5 * pmf
    return min(max(tail, 0.0), 1.0)


@dataclass(frozen=True)
class GaussianApprox:
    """Normal approximation N(mean, variance) to a statistic's distribution."""

    mean: float
    variance: float

    def __post_init__(self):
        if not (self.variance > 0.0 and math.isfinite(self.variance)):
            raise ValueError(f"variance must be positive, got {self.variance}")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def cdf(self, x: float) -> float:
        return normal_cdf((x - self.mean) / self.sd)

    def sf(self, x: float) -> float:
        return normal_cdf(-(x - self.mean) / self.sd)


def as_sample(values, name: str = "sample") -> np.ndarray:
    """Coerce to an n x d float64 matrix, rejecting non-finite entries."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"{name} must be a nonempty n x d matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def sample_normal(rng: Rng, n: int, mean: float = 0.0, sd: float = 1.0) -> np.ndarray:
    """n i.i.d. draws from N(mean, sd^2), as an n x 1 column."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not sd > 0.0:
        raise ValueError(f"sd must be positive, got {sd}")
    return mean + sd * rng.gen.standard_normal((int(n), 1))


def sample_student_t(rng: Rng, n: int, nu: float) -> np.ndarray:
    """n i.i.d. Student-t draws with nu > 0 degrees of freedom, n x 1.

    Uses the ratio construction Z / sqrt(V / nu) with V ~ chi-square(nu),
    exact for every real nu > 0.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not nu > 0.0:
        raise ValueError(f"degrees of freedom must be positive, got {nu}")
    z = rng.gen.standard_normal((int(n), 1))
    v = rng.gen.chisquare(float(nu), (int(n), 1))
    return z / np.sqrt(v / float(nu))


def sample_sinusoid(rng: Rng, n: int, delta: float, gamma: float) -> np.ndarray:
    """Paired draws (x, cos(delta * x) + eps) with x ~ N(0,1), eps ~ N(0, gamma^2).

    Returns an n x 2 matrix; column 0 is x, column 1 is y.  gamma = 0 gives
    the noiseless curve.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if gamma < 0.0:
        raise ValueError(f"noise sd must be nonnegative, got {gamma}")
    x = rng.gen.standard_normal(int(n))
    y = np.cos(float(delta) * x)
    if gamma > 0.0:
        y = y + float(gamma) * rng.gen.standard_normal(int(n))
    return np.column_stack([x, y])


def standardize(sample) -> np.ndarray:
    """Shift and scale each column to empirical mean 0 and variance 1.

    Uses the population convention (divide by n).  Idempotent up to 1e-12.
    Raises on constant columns, whose scale is undefined.
    """
    x = as_sample(sample)
    if x.shape[0] < 2:
        raise ValueError("standardize needs at least 2 rows")
    mean = x.mean(axis=0)
    var = x.var(axis=0)  # population variance
    if np.any(var <= 0.0):
        bad = int(np.argmax(var <= 0.0))
        raise ValueError(f"column {bad} is constant; cannot standardize")
    return (x - mean) / np.sqrt(var)
