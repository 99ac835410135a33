"""Resampling-free Poisson-bootstrap confidence intervals for quantiles."""

__version__ = "0.1.0"

from .bootstrap_ci import (  # noqa: E402
    CiRequest,
    ConfidenceInterval,
    TwoSampleData,
    classic_ci_one_sample,
    classic_ci_two_sample,
    conservative_empirical_quantiles,
    fast_ci_one_sample,
    fast_ci_two_sample,
)
from .index_distribution import (  # noqa: E402
    ExactPmfConfig,
    IndexPmf,
    binomial_index_pmf,
    binomial_index_quantile,
    exact_index_pmf,
    max_abs_pmf_diff,
    simulate_index_pmf,
)
from .quantile_core import (  # noqa: E402
    QuantileQuery,
    SortedSample,
    g_index,
    quantile_estimate,
    sort_sample,
)
from .rng import RandomSource  # noqa: E402

__all__ = [
    "CiRequest",
    "ConfidenceInterval",
    "ExactPmfConfig",
    "IndexPmf",
    "QuantileQuery",
    "RandomSource",
    "SortedSample",
    "TwoSampleData",
    "binomial_index_pmf",
    "binomial_index_quantile",
    "classic_ci_one_sample",
    "classic_ci_two_sample",
    "conservative_empirical_quantiles",
    "exact_index_pmf",
    "fast_ci_one_sample",
    "fast_ci_two_sample",
    "g_index",
    "max_abs_pmf_diff",
    "quantile_estimate",
    "simulate_index_pmf",
    "sort_sample",
]
