"""Tail-index estimation from the PWMs E(max of 1, 2, 4 draws), GEV fitting and quantiles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .distributions import EULER_GAMMA, XI_ZERO_TOL, GevParams, gev_quantile
from .estimators import (
    MomConfig,
    as_sample,
    mom_order_stat_batch,
    order_stat_block_estimates,
    partition_blocks,
)
from .exceptions import InsufficientSample, InvalidFit, NonIdentifiable

METHODS = ("mom", "lc")
MAX_ORDERS = (1, 2, 4)
LOG2 = math.log(2.0)


@dataclass(frozen=True)
class XiEstimate:
    xi_hat: float
    theta_hats: tuple
    delta: float | None
    method: str
    K: int
    diagnostics: dict = field(default_factory=dict)


def xi_from_thetas(theta1, theta2, theta4):
    """Shape from the means of maxima: ``log2((t4 - t2) / (t2 - t1))``."""
    d21, d42 = theta2 - theta1, theta4 - theta2
    if not (d21 > 0 and d42 > 0):
        ratio = d42 / d21 if d21 != 0 else math.nan
        raise NonIdentifiable(
            f"non-positive PWM increments (theta2-theta1={d21:.6g}, theta4-theta2={d42:.6g})",
            theta_hats=(theta1, theta2, theta4),
            ratio=ratio,
        )
    return math.log(d42 / d21) / LOG2


def _max_thetas(x, method, delta, partition="contiguous", seed=None):
    """Block-median estimates of E(max of j draws), j = 1, 2, 4, on one shared partition."""
    n = x.size
    if n < 4:
        raise InsufficientSample(f"need at least 4 observations, got {n}")
    if method == "lc":
        config = MomConfig.from_blocks(1)
    elif method == "mom":
        if delta is None:
            raise ValueError("the median-of-means method needs delta")
        config = MomConfig(delta, partition=partition, seed=seed)
    else:
        raise ValueError(f"method must be one of {METHODS}")
    part = partition_blocks(n, config, m=4)
    thetas = []
    for j in MAX_ORDERS:
        pts, _ = mom_order_stat_batch(x[None, :], part, j, j)
        thetas.append(float(pts[0]))
    return tuple(thetas), config.K


def estimate_xi(sample, delta=None, method="mom", partition="contiguous", seed=None):
    """GEV shape estimate from median-of-means (or whole-sample) PWMs.

    Raises :class:`NonIdentifiable` when the estimated maxima means are not
    strictly increasing.
    """
    x = as_sample(sample).values
    thetas, K = _max_thetas(x, method, delta, partition, seed)
    xi_hat = xi_from_thetas(*thetas)
    t1, t2, t4 = thetas
    return XiEstimate(
        xi_hat=xi_hat,
        theta_hats=thetas,
        delta=delta if method == "mom" else None,
        method=method,
        K=K,
        diagnostics={"d21": t2 - t1, "d42": t4 - t2, "ratio": (t4 - t2) / (t2 - t1)},
    )


def gev_from_thetas(xi, theta1, theta2):
    """Location and scale matching E(X) = theta1 and E(max of 2) = theta2 at shape ``xi``."""
    if xi >= 1:
        raise InvalidFit(f"shape {xi:.4g} >= 1: the fitted law has no mean")
    d21 = theta2 - theta1
    if not d21 > 0:
        raise NonIdentifiable("theta2 <= theta1", theta_hats=(theta1, theta2))
    if abs(xi) < XI_ZERO_TOL:
        sigma = d21 / LOG2
        mu = theta1 - sigma * EULER_GAMMA
    else:
        lg = special.gammaln(1.0 - xi)
        # (2^xi - 1)/xi and (Gamma(1-xi) - 1)/xi via expm1, stable near xi = 0
        sigma = d21 / (math.exp(lg) * math.expm1(xi * LOG2) / xi)
        mu = theta1 - sigma * math.expm1(lg) / xi
    return GevParams(xi, mu, sigma)


@dataclass(frozen=True)
class GevFit:
    params: GevParams
    source: XiEstimate


def fit_gev(sample, delta=None, method="mom", partition="contiguous", seed=None):
    est = estimate_xi(sample, delta, method, partition, seed)
    t1, t2, _ = est.theta_hats
    return GevFit(gev_from_thetas(est.xi_hat, t1, t2), est)


def estimate_quantile(sample, prob, delta=None, method="mom", partition="contiguous", seed=None):
    """Plug-in quantile of the PWM-fitted GEV."""
    fit = fit_gev(sample, delta, method, partition, seed)
    return float(gev_quantile(prob, fit.params))


def max_thetas_batch(X, partition):
    """Estimates of E(max of j draws), j = 1, 2, 4, for each row of X; shape (R, 3)."""
    X = np.atleast_2d(X)
    return np.column_stack([mom_order_stat_batch(X, partition, j, j)[0] for j in MAX_ORDERS])


def max_block_estimates(X, partition):
    """Per-block estimates for j = 1, 2, 4; shape (R, 3, K)."""
    X = np.atleast_2d(X)
    return np.stack([order_stat_block_estimates(X, partition, j, j) for j in MAX_ORDERS], axis=1)
