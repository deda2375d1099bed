"""Median-of-means estimators for probability weighted moments and the GEV tail index."""

__version__ = "0.1.0"

from ._kernels import BACKEND  # noqa: E402
from .distributions import (  # noqa: E402
    ContaminationScheme,
    GevParams,
    RandomStream,
    cna_sample,
    contaminate,
    gev_cdf,
    gev_pwm_theta,
    gev_quantile,
    gev_sample,
    order_stat_oracle,
)
from .estimators import (  # noqa: E402
    BlockPartition,
    EstimateReport,
    KernelSpec,
    MomConfig,
    adaptive_estimate,
    linear_combination_pwm,
    mom_estimate,
    naive_u_statistic,
    paper_median,
    partition_blocks,
)
from .exceptions import DataError, InsufficientSample, InvalidFit, NonIdentifiable  # noqa: E402
from .samples import ObservationSample  # noqa: E402
from .tail_index import estimate_quantile, estimate_xi, fit_gev  # noqa: E402
