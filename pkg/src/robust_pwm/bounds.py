"""Variance bounds, concentration radii and variance-proxy estimation.

All radii use ``ceil(log(1/delta))`` (natural log), the same integer as
the number of blocks.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .distributions import as_generator
from .estimators import blocks_for_delta
from .exceptions import NonIdentifiable

MOM_CONSTANT = 2 * math.e
CONTAMINATED_CONSTANT = 16 * math.e**2 / (3 * math.sqrt(3))
# Ratio between the contaminated and clean constants, 8e / (3 sqrt 3).
CONTAMINATION_FACTOR = CONTAMINATED_CONSTANT / MOM_CONSTANT

REGIMES = ("clean", "contaminated")
FLAVORS = ("sub_gaussian", "sub_gamma")


@dataclass(frozen=True)
class VarianceProxies:
    """``v[k-1] = var(E[psi(X_1..X_m) | X_1..X_k])`` for k = 1..m.

    Entries may be ``None`` when unknown; the bound formulas only read
    ``v_q`` and ``v_m``. ``stderr`` holds Monte Carlo standard errors when
    the proxies were estimated.
    """

    v: tuple
    provenance: str = "closed_form"
    stderr: tuple | None = None

    def __post_init__(self):
        v = tuple(None if x is None else float(x) for x in self.v)
        if not v:
            raise ValueError("need at least one proxy")
        if any(x is not None and (x < 0 or not math.isfinite(x)) for x in v):
            raise ValueError("variance proxies must be finite and non-negative")
        object.__setattr__(self, "v", v)

    @classmethod
    def from_endpoints(cls, m, v_m, v_1=None, provenance="closed_form"):
        if m == 1:
            return cls((v_m,), provenance)
        return cls((v_1,) + (None,) * (m - 2) + (v_m,), provenance)

    @property
    def m(self):
        return len(self.v)

    @property
    def v_m(self):
        return self.at(self.m)

    def at(self, k):
        if not 1 <= k <= self.m:
            raise IndexError(f"proxy index {k} outside 1..{self.m}")
        val = self.v[k - 1]
        if val is None:
            raise ValueError(f"v_{k} is required but unknown")
        return val

    def hoeffding_ordered(self, atol=0.0):
        """Whether known entries satisfy ``v_k / k <= v_l / l`` for k <= l."""
        known = [(k, x) for k, x in enumerate(self.v, start=1) if x is not None]
        for (k, vk), (l, vl) in zip(known, known[1:]):
            if vk / k > vl / l + atol:
                return False
        return True


def _check_orders(n, m, q):
    if not (1 <= q <= m <= n):
        raise ValueError(f"need 1 <= q <= m <= n, got q={q}, m={m}, n={n}")


def variance_bound_general(n, m, q, v_m):
    """``C(m-1, q-1) m^q v_m / n^q``, an upper bound on var(U_n)."""
    _check_orders(n, m, q)
    if not v_m > 0:
        raise ValueError("v_m must be positive")
    return math.comb(m - 1, q - 1) * (m / n) ** q * v_m


def variance_bound_split(n, m, q, v_q, v_m):
    """``C(m, q) m^q v_q / n^q + C(m-1, q) m^(q+1) v_m / n^(q+1)``."""
    _check_orders(n, m, q)
    if v_q < 0 or not v_m > 0:
        raise ValueError("need v_q >= 0 and v_m > 0")
    return math.comb(m, q) * (m / n) ** q * v_q + math.comb(m - 1, q) * (m / n) ** (q + 1) * v_m


def u_statistic_variance(n, m, v):
    """Exact var(U_n) from Hoeffding's decomposition, given all of v_1..v_m."""
    if len(v) != m or m > n:
        raise ValueError("need m proxies and m <= n")
    total = sum(math.comb(m, k) * math.comb(n - m, m - k) * v[k - 1] for k in range(1, m + 1))
    return total / math.comb(n, m)


def _regime_constant(regime):
    if regime == "clean":
        return MOM_CONSTANT
    if regime == "contaminated":
        return CONTAMINATED_CONSTANT
    raise ValueError(f"regime must be one of {REGIMES}")


def _checked_blocks(n, m, delta):
    K = blocks_for_delta(delta)
    if K > n // m:
        raise ValueError(f"delta={delta} is below exp(-floor(n/m)) = exp(-{n // m})")
    return K


def mom_radius(n, m, q, delta, proxies, regime="clean", flavor="sub_gaussian"):
    """Deviation radius exceeded by the median-of-means estimate with probability <= delta.

    ``sub_gaussian`` only needs ``v_m``; ``sub_gamma`` also needs ``v_q``.
    For q = 1 the sub-gamma radius takes the closed form
    ``2e sqrt(2 m^2 v_1 K / n + 4 m^3 v_m K^2 / n^2)``.
    """
    _check_orders(n, m, q)
    K = _checked_blocks(n, m, delta)
    c = _regime_constant(regime)
    v_m = proxies.v_m
    r = 2 * m * K / n
    if flavor == "sub_gaussian":
        inner = math.comb(m - 1, q - 1) * r**q * v_m
    elif flavor == "sub_gamma":
        v_q = proxies.at(q)
        if q == 1:
            inner = 2 * m**2 * v_q * K / n + 4 * m**3 * v_m * K**2 / n**2
        else:
            inner = math.comb(m, q) * r**q * v_q + math.comb(m - 1, q) * r ** (q + 1) * v_m
    else:
        raise ValueError(f"flavor must be one of {FLAVORS}")
    return c * math.sqrt(inner)


@dataclass(frozen=True)
class BoundReport:
    t1: float
    t2: float | None
    regime: str
    constant: float
    inputs: dict


def bound_report(n, m, q, delta, proxies, regime="clean"):
    """Both radii at once; ``t2`` is None when ``v_q`` is unknown."""
    t1 = mom_radius(n, m, q, delta, proxies, regime, "sub_gaussian")
    try:
        t2 = mom_radius(n, m, q, delta, proxies, regime, "sub_gamma")
    except ValueError:
        t2 = None
    return BoundReport(
        t1=t1,
        t2=t2,
        regime=regime,
        constant=_regime_constant(regime),
        inputs={"n": n, "m": m, "q": q, "delta": delta, "K": blocks_for_delta(delta),
                "proxies": proxies.v},
    )


def adaptive_radius(n, m, v_star_m, delta):
    """Radius for the delta-free adaptive estimator (holds with probability >= 1 - delta)."""
    lower = math.exp(-(n // m)) / (1 - math.exp(-1))
    if not lower <= delta < 1:
        raise ValueError(f"delta must lie in [{lower:.3g}, 1)")
    slack = 1 + math.log(1 / (1 - math.exp(-1))) + math.log(1 / delta)
    return 4 * math.e * math.sqrt(2 * m * v_star_m * slack / n)


def xi_radius(n, delta, proxies_max, xi_hat, theta2_hat, theta1_hat, regime="clean", xi=None):
    """Deviation radius for the PWM tail-index estimate; returns ``(radius, confidence)``.

    With ``xi`` given this is the oracle radius; otherwise ``xi_hat`` is
    plugged in wherever the true shape appears. ``proxies_max`` is
    ``max(v_1, v_2, v_4)``, the largest variance of a maximum of 1, 2 or 4
    draws. The confidence level is ``1 - 3 delta``.
    """
    if theta2_hat <= theta1_hat:
        raise NonIdentifiable("theta2_hat <= theta1_hat: radius undefined",
                              theta_hats=(theta1_hat, theta2_hat))
    if not proxies_max > 0:
        raise ValueError("proxies_max must be positive")
    K = _checked_blocks(n, 4, delta)
    shape = xi_hat if xi is None else xi
    c = _regime_constant(regime)
    factor = (2**shape + 1) * (2 ** (-xi_hat) + 2 ** (-shape)) / (math.log(2) * (theta2_hat - theta1_hat))
    radius = c * factor * math.sqrt(8 * proxies_max * K / n)
    return radius, 1 - 3 * delta


def bernoulli_tail(K, a, p):
    """Chernoff bound on P(sum of K Bernoulli(<= p) >= aK), evaluated in log space."""
    if not (0 < a < 1 and 0 < p < 1):
        raise ValueError("need 0 < a < 1 and 0 < p < 1")
    if K < 1:
        raise ValueError("K must be positive")
    log_b = K * (a * (math.log(p) - math.log(a)) + (1 - a) * (math.log1p(-p) - math.log1p(-a)))
    return math.exp(log_b)


# --------------------------------------------------------------------------
# Variance proxies by Monte Carlo
# --------------------------------------------------------------------------


def _var_and_se(x):
    x = np.asarray(x, dtype=np.float64)
    v = float(np.var(x, ddof=1))
    c = x - x.mean()
    m4 = float(np.mean(c**4))
    se = math.sqrt(max(m4 - v**2, 0.0) / x.size)
    return v, se


def estimate_variance_proxies(sampler, kernel, reps, inner_reps, stream, tol=0.0):
    """Monte Carlo estimates of v_1..v_m.

    ``sampler(rng, shape)`` returns i.i.d. draws. ``v_m`` is the sample
    variance of the kernel over ``reps`` draws. For k < m each of ``reps``
    prefixes ``(X_1..X_k)`` is completed ``inner_reps`` times; the variance
    of the per-prefix means is debiased by subtracting the mean within-prefix
    variance over ``inner_reps``. Estimates below ``-tol`` after the
    correction are clamped to zero with a warning.
    """
    if reps < 2 or inner_reps < 2:
        raise ValueError("reps and inner_reps must be at least 2")
    rng = as_generator(stream)
    m = kernel.m
    v, se = [], []
    for k in range(1, m):
        head = sampler(rng, (reps, 1, k))
        tail = sampler(rng, (reps, inner_reps, m - k))
        psi = kernel(np.concatenate([np.broadcast_to(head, (reps, inner_reps, k)), tail], axis=-1))
        cell_mean = psi.mean(axis=1)
        within = psi.var(axis=1, ddof=1).mean()
        between, between_se = _var_and_se(cell_mean)
        est = between - within / inner_reps
        if est < 0:
            if est < -tol:
                warnings.warn(f"v_{k} estimate {est:.3g} < 0 after bias correction; clamped to 0",
                              RuntimeWarning, stacklevel=2)
            est = 0.0
        v.append(est)
        se.append(between_se)
    vm, vm_se = _var_and_se(kernel(sampler(rng, (reps, m))))
    v.append(vm)
    se.append(vm_se)
    return VarianceProxies(tuple(v), provenance=f"monte_carlo(reps={reps}, inner={inner_reps})",
                           stderr=tuple(se))
