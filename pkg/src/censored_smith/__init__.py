"""Censored Gaussian extreme-value (Smith) process models for time series
observed at arbitrary instants: composite-likelihood fitting, simulation,
cluster return levels and bootstrap intervals.
"""

__version__ = "0.1.0"

from .distributions import (
    GevMargin,
    GpdMargin,
    censored_marginal_logdensity,
    from_frechet,
    gev_cdf,
    gev_logpdf,
    gev_quantile,
    gpd_cdf,
    gpd_logpdf,
    to_frechet,
)
from .errors import (
    CensoredSmithError,
    ConfigError,
    DataError,
    InsufficientSimulationError,
    NonIdentifiableError,
    NumericalError,
)
from .estimation import (
    EstimatorKind,
    EstimatorSpec,
    FitResult,
    OptimizerConfig,
    fit,
    fit_mile,
    fit_mmle,
    fit_mple,
    threshold_scan,
)
from .extremes import (
    BootstrapDistribution,
    ClusterStats,
    PotFit,
    SeasonTemplate,
    cluster_lengths,
    parametric_bootstrap,
    pot_fit,
    pot_return_level,
    qq_data,
    return_level,
    return_levels,
    upcrossings,
)
from .likelihood import (
    CensoredSample,
    PairStrategy,
    PairWeightPlan,
    build_pair_plan,
    independent_loglik,
    markov_loglik,
    pairwise_loglik,
)
from .series import TimeSeries
from .simulation import (
    PoissonPointConfig,
    ReferenceModelSpec,
    SamplingScheme,
    apply_censoring,
    make_times,
    simulate_reference,
    simulate_smith,
)
from .smith import (
    SmithParams,
    bivariate_cdf_frechet,
    bivariate_cdf_gev,
    censored_pair_logdensity,
    exponent_V,
    pair_density_grad_check,
)
