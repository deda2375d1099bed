"""U-statistics, block partitions and median-of-means estimators.

Order-statistic kernels go through the closed-form weighting of the sorted
sample; any other symmetric kernel is averaged over explicit subsets.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import _kernels
from .samples import ObservationSample

# Sample sizes up to this use exact integer binomials for the weights.
EXACT_WEIGHT_MAX_N = 60
NAIVE_SUBSET_CAP = 10**6
# Relative slack when deciding whether log(1/delta) is an integer.
_K_SNAP_RTOL = 1e-6


def as_sample(sample):
    if isinstance(sample, ObservationSample):
        return sample
    return ObservationSample(np.asarray(sample, dtype=np.float64))


# --------------------------------------------------------------------------
# Kernels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric kernel of arity ``m``.

    Either the k-th order statistic of its arguments (``k`` set) or an
    arbitrary symmetric ``func``. ``q`` is the declared degeneracy order and
    is only consumed by the bound formulas. With ``vectorized=True`` the
    function receives an array of shape ``(..., m)``; otherwise it is called
    once per subset with a 1-d array.
    """

    m: int
    k: int | None = None
    func: Callable | None = None
    q: int = 1
    vectorized: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("kernel arity must be positive")
        if (self.k is None) == (self.func is None):
            raise ValueError("give exactly one of k (order statistic) or func")
        if self.k is not None and not 1 <= self.k <= self.m:
            raise ValueError("order-statistic kernel needs 1 <= k <= m")
        if not 1 <= self.q <= self.m:
            raise ValueError("degeneracy order q must lie in [1, m]")
        if self.k is not None and self.q != 1:
            raise ValueError("order-statistic kernels are non-degenerate (q = 1)")

    @classmethod
    def order_statistic(cls, k, m):
        return cls(m=m, k=k)

    @classmethod
    def general(cls, func, m, q=1, vectorized=False):
        return cls(m=m, func=func, q=q, vectorized=vectorized)

    @property
    def is_order_statistic(self):
        return self.k is not None

    def __call__(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.m:
            raise ValueError(f"kernel expects {self.m} arguments, got {X.shape[-1]}")
        if self.is_order_statistic:
            return np.partition(X, self.k - 1, axis=-1)[..., self.k - 1]
        if self.vectorized:
            return np.asarray(self.func(X), dtype=np.float64)
        flat = X.reshape(-1, self.m)
        out = np.fromiter((self.func(row) for row in flat), dtype=np.float64, count=flat.shape[0])
        return out.reshape(X.shape[:-1])


def check_symmetry(kernel, rng, trials=20, atol=1e-12):
    """Spot-check that permuting the arguments leaves the kernel unchanged."""
    X = rng.standard_normal((trials, kernel.m))
    base = kernel(X)
    for _ in range(3):
        perm = rng.permutation(kernel.m)
        if not np.allclose(kernel(X[:, perm]), base, atol=atol, rtol=0):
            return False
    return True


# --------------------------------------------------------------------------
# Closed-form PWM U-statistic
# --------------------------------------------------------------------------


def pwm_weight_numerators(n, k, m):
    """Integer numerators ``C(n-i, m-k) C(i-1, k-1)``, i = 1..n; they sum to C(n, m)."""
    return [math.comb(n - i, m - k) * math.comb(i - 1, k - 1) for i in range(1, n + 1)]


@lru_cache(maxsize=1024)
def _pwm_weights_cached(n, k, m):
    if n <= EXACT_WEIGHT_MAX_N:
        total = math.comb(n, m)
        w = np.array([c / total for c in pwm_weight_numerators(n, k, m)])
    else:
        # w_{i+1} / w_i = (n-i-m+k)/(n-i) * i/(i-k+1) on the support k <= i <= n-m+k
        w = np.zeros(n)
        lo, hi = k, n - m + k
        i = np.arange(lo, hi, dtype=np.float64)
        log_ratio = np.log((n - i - m + k) / (n - i)) + np.log(i / (i - k + 1))
        log_first = (
            math.lgamma(n - k + 1) - math.lgamma(m - k + 1) - math.lgamma(n - m + 1)
            - (math.lgamma(n + 1) - math.lgamma(m + 1) - math.lgamma(n - m + 1))
        )
        logs = log_first + np.concatenate([[0.0], np.cumsum(log_ratio)])
        w[lo - 1 : hi] = np.exp(logs)
        w /= w.sum()
    w.flags.writeable = False
    return w


def pwm_weights(n, k, m):
    """Weights of the sorted sample in the order-statistic U-statistic T(k:m)."""
    if not 1 <= k <= m:
        raise ValueError("need 1 <= k <= m")
    if m > n:
        raise ValueError(f"kernel arity m={m} exceeds sample size n={n}")
    return _pwm_weights_cached(int(n), int(k), int(m))


def linear_combination_pwm(sample, k, m):
    """The U-statistic of the k-th order statistic kernel over the whole sample.

    Computed as a weighted sum of the sorted sample, without visiting the
    ``C(n, m)`` subsets.
    """
    x = as_sample(sample).values
    n = x.size
    W = pwm_weights(n, k, m)[None, :]
    offsets = np.array([0, n])
    return float(_kernels.block_weighted_sums(x[None, :], np.arange(n), offsets, W)[0, 0])


def naive_u_statistic(sample, kernel, cap=NAIVE_SUBSET_CAP):
    """Average of ``kernel`` over every size-m subset (brute force)."""
    x = as_sample(sample).values
    n, m = x.size, kernel.m
    if m > n:
        raise ValueError(f"kernel arity m={m} exceeds sample size n={n}")
    count = math.comb(n, m)
    if count > cap:
        raise ValueError(f"C({n}, {m}) = {count} subsets exceeds the cap of {cap}")
    idx = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(n), m)),
        dtype=np.intp,
        count=count * m,
    ).reshape(count, m)
    return float(np.mean(kernel(x[idx])))


# --------------------------------------------------------------------------
# Blocks and the median rule
# --------------------------------------------------------------------------


def blocks_for_delta(delta):
    """``K = ceil(log(1/delta))``; values of delta within 1e-6 (relative, in
    log scale) of ``exp(-j)`` give ``K = j``."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    L = -math.log(delta)
    j = round(L)
    if j >= 1 and abs(L - j) <= _K_SNAP_RTOL * j:
        return int(j)
    return max(1, math.ceil(L))


@dataclass(frozen=True)
class MomConfig:
    """Error level and partitioning strategy for a median-of-means estimate."""

    delta: float
    partition: str = "contiguous"
    seed: int | None = None

    def __post_init__(self):
        blocks_for_delta(self.delta)
        if self.partition not in ("contiguous", "shuffled"):
            raise ValueError("partition must be 'contiguous' or 'shuffled'")
        if self.partition == "shuffled" and self.seed is None:
            raise ValueError("shuffled partitions need a seed")

    @classmethod
    def from_blocks(cls, K, **kwargs):
        return cls(math.exp(-K), **kwargs)

    @property
    def K(self):
        return blocks_for_delta(self.delta)

    def validate(self, n, m):
        if self.K > n // m:
            raise ValueError(
                f"delta={self.delta} gives K={self.K} blocks but at most "
                f"floor(n/m) = {n // m} fit (need delta >= exp(-{n // m}))"
            )


@dataclass(frozen=True)
class BlockPartition:
    """K disjoint index blocks covering ``range(n)`` (0-based indices).

    Block j is ``order[offsets[j]:offsets[j + 1]]``.
    """

    order: np.ndarray
    offsets: np.ndarray

    @property
    def K(self):
        return len(self.offsets) - 1

    @property
    def n(self):
        return len(self.order)

    @property
    def sizes(self):
        return tuple(int(s) for s in np.diff(self.offsets))

    @property
    def blocks(self):
        return tuple(self.order[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:]))


def partition_blocks(n, config, m=1):
    """Split ``range(n)`` into K blocks of sizes ``n // K`` or ``n // K + 1``.

    The first ``n % K`` blocks take the extra element. The shuffled strategy
    permutes the indices with ``config.seed`` before cutting.
    """
    config.validate(n, m)
    K = config.K
    base, extra = divmod(n, K)
    sizes = [base + 1] * extra + [base] * (K - extra)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.intp)
    if config.partition == "shuffled":
        order = np.random.default_rng(config.seed).permutation(n).astype(np.intp)
    else:
        order = np.arange(n, dtype=np.intp)
    order.flags.writeable = False
    offsets.flags.writeable = False
    return BlockPartition(order, offsets)


def paper_median(values):
    """Smallest z among the values with at least half of them on each side.

    This is the lower middle order statistic, so the result is always one of
    the inputs.
    """
    z = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    if z.size == 0:
        raise ValueError("median of an empty list")
    return float(z[(z.size - 1) // 2])


# --------------------------------------------------------------------------
# Median of means
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimateReport:
    point: float
    block_estimates: tuple
    config: MomConfig
    partition: BlockPartition
    kernel: KernelSpec


def block_weight_matrix(partition, k, m):
    sizes = partition.sizes
    W = np.zeros((partition.K, max(sizes)))
    for j, s in enumerate(sizes):
        W[j, :s] = pwm_weights(s, k, m)
    return W


def order_stat_block_estimates(X, partition, k, m):
    """Block U-statistics of the (k, m) order-statistic kernel for each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != partition.n:
        raise ValueError("partition does not match the sample size")
    W = block_weight_matrix(partition, k, m)
    return _kernels.block_weighted_sums(X, partition.order, partition.offsets, W)


def mom_order_stat_batch(X, partition, k, m):
    """Median-of-means estimates for many samples at once.

    Returns ``(points, block_estimates)`` with shapes ``(R,)`` and ``(R, K)``.
    """
    E = order_stat_block_estimates(X, partition, k, m)
    return _kernels.row_lower_median(E), E


def mom_estimate(sample, kernel, config):
    """Median of the per-block U-statistics of ``kernel``."""
    s = as_sample(sample)
    partition = partition_blocks(s.n, config, kernel.m)
    if kernel.is_order_statistic:
        E = order_stat_block_estimates(s.values[None, :], partition, kernel.k, kernel.m)[0]
    else:
        E = np.array([naive_u_statistic(s.values[b], kernel) for b in partition.blocks])
    return EstimateReport(
        point=paper_median(E),
        block_estimates=tuple(float(e) for e in E),
        config=config,
        partition=partition,
        kernel=kernel,
    )


def intersect_tail(lowers, uppers):
    """Smallest (1-based) k whose tail intersection of intervals k..end is non-empty.

    Returns ``(k_hat, lo, hi)`` with ``[lo, hi]`` that intersection.
    """
    lowers = np.asarray(lowers, dtype=np.float64)
    uppers = np.asarray(uppers, dtype=np.float64)
    if lowers.size == 0 or lowers.shape != uppers.shape:
        raise ValueError("need matching non-empty interval bounds")
    lo, hi = lowers[-1], uppers[-1]
    k_hat = lowers.size
    for j in range(lowers.size - 2, -1, -1):
        new_lo, new_hi = max(lo, lowers[j]), min(hi, uppers[j])
        if new_lo > new_hi:
            break
        lo, hi, k_hat = new_lo, new_hi, j + 1
    return k_hat, float(lo), float(hi)


def adaptive_estimate(sample, kernel, v_star_m, return_details=False):
    """Confidence-level-free estimate from nested median-of-means intervals.

    For every K = 1..floor(n/m) the K-block estimate is surrounded by the
    half-width ``2e sqrt(2 m v* K / n)``; the result is the midpoint of the
    longest non-empty tail intersection of those intervals.
    """
    s = as_sample(sample)
    n, m = s.n, kernel.m
    if m > n:
        raise ValueError(f"kernel arity m={m} exceeds sample size n={n}")
    if not v_star_m > 0:
        raise ValueError("v_star_m must be positive")
    kmax = n // m
    centers = np.array(
        [mom_estimate(s, kernel, MomConfig.from_blocks(K)).point for K in range(1, kmax + 1)]
    )
    half = 2 * math.e * np.sqrt(2 * m * v_star_m * np.arange(1, kmax + 1) / n)
    k_hat, lo, hi = intersect_tail(centers - half, centers + half)
    mid = 0.5 * (lo + hi)
    if return_details:
        return mid, {"k_hat": k_hat, "centers": centers, "half_widths": half, "interval": (lo, hi)}
    return mid
