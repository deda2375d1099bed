"""GEV laws, order-statistic oracles, contamination and without-replacement samplers.

Every ground-truth value used by the estimators' tests comes from here.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from .samples import INLIER, OUTLIER, ObservationSample

# Below this |xi| every xi-dependent formula switches to its Gumbel limit.
XI_ZERO_TOL = 1e-9
EULER_GAMMA = float(np.euler_gamma)

ORACLE_DISTS = ("uniform01", "exponential1", "gumbel01")


# --------------------------------------------------------------------------
# Random streams
# --------------------------------------------------------------------------


def stream_key(*parts):
    """Stable 63-bit integer derived from ``parts`` (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


@dataclass(frozen=True)
class RandomStream:
    """A reproducible random stream identified by ``(master_seed, stream_index)``.

    Streams are Philox generators keyed through :class:`numpy.random.SeedSequence`
    with ``stream_index`` as spawn key, so distinct indices give independent
    sequences and any stream can be regenerated without replaying others.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ValueError("stream_index must be non-negative")

    @classmethod
    def for_key(cls, master_seed, *key):
        return cls(master_seed, stream_key(*key))

    def generator(self):
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.Philox(seq))


def as_generator(stream):
    if isinstance(stream, np.random.Generator):
        return stream
    if isinstance(stream, RandomStream):
        return stream.generator()
    raise TypeError(f"expected RandomStream or numpy Generator, got {type(stream).__name__}")


def uniform_open(rng, size):
    """Uniform draws strictly inside (0, 1) on a 2**-53 grid."""
    return (rng.integers(0, 2**53, size=size) + 0.5) / 2.0**53


# --------------------------------------------------------------------------
# GEV
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GevParams:
    """Generalized extreme value law with shape ``xi``, location ``mu``, scale ``sigma``."""

    xi: float
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.xi, self.mu, self.sigma)):
            raise ValueError("GEV parameters must be finite")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def is_gumbel(self):
        return abs(self.xi) < XI_ZERO_TOL

    @property
    def upper_endpoint(self):
        return self.mu - self.sigma / self.xi if self.xi < 0 and not self.is_gumbel else math.inf

    @property
    def lower_endpoint(self):
        return self.mu - self.sigma / self.xi if self.xi > 0 and not self.is_gumbel else -math.inf


def _scalar_or_array(out, like):
    return float(out) if np.ndim(like) == 0 else out


def gev_cdf(x, p):
    z = (np.asarray(x, dtype=np.float64) - p.mu) / p.sigma
    if p.is_gumbel:
        out = np.exp(-np.exp(-z))
    else:
        t = 1.0 + p.xi * z
        inside = t > 0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = np.exp(-np.exp(-np.log1p(p.xi * z) / p.xi))
        out = np.where(inside, val, 0.0 if p.xi > 0 else 1.0)
    return _scalar_or_array(out, x)


def gev_quantile(prob, p):
    u = np.asarray(prob, dtype=np.float64)
    if not np.all((u > 0) & (u < 1)):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    y = -np.log(u)
    if p.is_gumbel:
        z = -np.log(y)
    else:
        z = np.expm1(-p.xi * np.log(y)) / p.xi
    return _scalar_or_array(p.mu + p.sigma * z, prob)


def gev_sample(stream, p, n):
    """Draw ``n`` i.i.d. GEV values by inversion."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = as_generator(stream)
    return ObservationSample(gev_quantile(uniform_open(rng, n), p))


def _standard_theta(j, xi):
    if abs(xi) < XI_ZERO_TOL:
        return EULER_GAMMA + math.log(j)
    return math.expm1(xi * math.log(j) + special.gammaln(1.0 - xi)) / xi


def gev_pwm_theta(j, p):
    """Mean of the maximum of ``j`` i.i.d. draws from ``p``."""
    if j < 1 or int(j) != j:
        raise ValueError("j must be a positive integer")
    if p.xi >= 1:
        raise ValueError("the GEV mean does not exist for xi >= 1")
    return p.mu + p.sigma * _standard_theta(int(j), p.xi)


def gev_order_stat_mean(k, m, p):
    """Mean of the k-th smallest of ``m`` i.i.d. GEV draws.

    Expands the order-statistic density in powers of F, so that
    ``E X(k:m) = k C(m,k) sum_i C(m-k,i) (-1)^i theta_{k+i} / (k+i)``.
    Alternating; fine for the small ``m`` used here.
    """
    if not 1 <= k <= m:
        raise ValueError("need 1 <= k <= m")
    total = 0.0
    for i in range(m - k + 1):
        total += (-1) ** i * math.comb(m - k, i) * gev_pwm_theta(k + i, p) / (k + i)
    return k * math.comb(m, k) * total


def gev_max_variance(j, p):
    """Variance of the maximum of ``j`` i.i.d. draws (finite for xi < 1/2)."""
    if p.xi >= 0.5:
        raise ValueError("the GEV variance does not exist for xi >= 1/2")
    if p.is_gumbel:
        return p.sigma**2 * math.pi**2 / 6.0
    xi = p.xi
    g1 = special.gammaln(1.0 - xi)
    excess = math.expm1(special.gammaln(1.0 - 2.0 * xi) - 2.0 * g1)
    return p.sigma**2 * j ** (2.0 * xi) * math.exp(2.0 * g1) * excess / xi**2


# --------------------------------------------------------------------------
# Order statistics oracles
# --------------------------------------------------------------------------


def _gumbel_order_moment(k, m, power):
    dens = stats.beta(k, m - k + 1).pdf

    def f(u):
        return (-math.log(-math.log(u))) ** power * dens(u)

    val = 0.0
    # split at the mode region to keep quad accurate near both log singularities
    for a, b in ((0.0, 0.5), (0.5, 1.0)):
        part, _ = integrate.quad(f, a, b, limit=200, epsabs=1e-13, epsrel=1e-12)
        val += part
    return val


def order_stat_oracle(dist, k, m):
    """Exact mean and variance of the k-th order statistic of an i.i.d. m-sample."""
    if not 1 <= k <= m:
        raise ValueError("need 1 <= k <= m")
    if dist == "uniform01":
        mean = k / (m + 1)
        var = k * (m - k + 1) / ((m + 1) ** 2 * (m + 2))
    elif dist == "exponential1":
        idx = range(m - k + 1, m + 1)
        mean = sum(1.0 / i for i in idx)
        var = sum(1.0 / i**2 for i in idx)
    elif dist == "gumbel01":
        mean = _gumbel_order_moment(k, m, 1)
        var = _gumbel_order_moment(k, m, 2) - mean**2
    else:
        raise ValueError(f"unsupported distribution {dist!r}; choose from {ORACLE_DISTS}")
    return mean, var


def uniform_order_stat_v1(k, m):
    """``var(E[X(k:m) | X_1])`` for uniform(0, 1) samples.

    Given ``X_1 = x`` the conditional mean is a polynomial of degree <= m in x,
    so Gauss-Legendre with m + 2 nodes integrates its square exactly.
    """
    if not 1 <= k <= m:
        raise ValueError("need 1 <= k <= m")
    nodes, weights = np.polynomial.legendre.leggauss(m + 2)
    x = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    g = np.zeros_like(x)
    for J in range(m):
        pmf = math.comb(m - 1, J) * x**J * (1 - x) ** (m - 1 - J)
        if J == k - 1:
            h = x
        elif J >= k:
            h = x * k / (J + 1)
        else:
            h = x + (1 - x) * (k - 1 - J) / (m - J)
        g += pmf * h
    mean = np.dot(w, g)
    return float(np.dot(w, g**2) - mean**2)


def sample_oracle_dist(dist, rng, size):
    """Draws from one of the oracle distributions."""
    if dist == "uniform01":
        return rng.random(size)
    if dist == "exponential1":
        return rng.standard_exponential(size)
    if dist == "gumbel01":
        return gev_quantile(uniform_open(rng, size), GevParams(0.0))
    raise ValueError(f"unsupported distribution {dist!r}; choose from {ORACLE_DISTS}")


# --------------------------------------------------------------------------
# Contamination
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ContaminationScheme:
    """``n_inliers`` GEV draws mixed with ``n_outliers`` gross errors.

    Outlier law, expressed on the standard scale and mapped through
    ``mu + sigma * (.)``: uniform on ``[0, 20 - 1/xi]`` when ``xi < 0``,
    otherwise normal with unit variance centred at the standard GEV
    ``1 - 1e-4`` quantile.
    """

    inlier_params: GevParams
    n_inliers: int
    n_outliers: int = 0

    def __post_init__(self):
        if self.n_inliers < 1:
            raise ValueError("n_inliers must be positive")
        if self.n_outliers < 0:
            raise ValueError("n_outliers must be non-negative")

    @property
    def n(self):
        return self.n_inliers + self.n_outliers

    @property
    def outlier_law(self):
        xi = self.inlier_params.xi
        if xi < 0 and abs(xi) >= XI_ZERO_TOL:
            return ("uniform", 0.0, 20.0 - 1.0 / xi)
        return ("normal", gev_quantile(1.0 - 1e-4, GevParams(xi)), 1.0)

    def draw_outliers(self, rng):
        kind, a, b = self.outlier_law
        if kind == "uniform":
            z = rng.uniform(a, b, self.n_outliers)
        else:
            z = rng.normal(a, b, self.n_outliers)
        p = self.inlier_params
        return p.mu + p.sigma * z


def contaminate(stream, scheme, shuffle=True):
    """Draw an O-and-I contaminated sample with provenance tags.

    With ``shuffle=False`` the outliers occupy the last ``n_outliers``
    positions (adversarial placement for contiguous blocks).
    """
    rng = as_generator(stream)
    inliers = gev_quantile(uniform_open(rng, scheme.n_inliers), scheme.inlier_params)
    inliers = np.atleast_1d(inliers)
    outliers = scheme.draw_outliers(rng)
    values = np.concatenate([inliers, outliers])
    tags = np.array([INLIER] * scheme.n_inliers + [OUTLIER] * scheme.n_outliers, dtype=object)
    if shuffle:
        perm = rng.permutation(values.size)
        values, tags = values[perm], tags[perm]
    return ObservationSample(values, tags)


# --------------------------------------------------------------------------
# Exchangeable negatively associated samples
# --------------------------------------------------------------------------


def cna_sample(stream, population, n):
    """Simple random sample of size ``n`` without replacement, in random order."""
    population = np.asarray(population, dtype=np.float64).reshape(-1)
    if n < 1:
        raise ValueError("n must be positive")
    if n > population.size:
        raise ValueError(f"cannot draw {n} values without replacement from {population.size}")
    rng = as_generator(stream)
    return ObservationSample(rng.choice(population, size=n, replace=False, shuffle=True))
