"""Gaussian-coupling error budgets for suprema of empirical processes.

The package evaluates explicit non-asymptotic coupling bounds between the
supremum of an empirical process and the supremum of its Gaussian analogue,
and verifies them by Monte Carlo simulation in kernel (local) and series
scenarios, including undersmoothed uniform confidence bands.
"""

from .bands import BandResult, CoverageReport, build_band, coverage_experiment, critical_value
from .bounds import (
    AnalyticVectorMoments,
    CouplingBudget,
    MomentInputs,
    SampleVectorMoments,
    SteinCouplingTerms,
    VcBudget,
    coupling_budget,
    crossover_sweep,
    deviation_bound,
    kolmogorov_conversion,
    maximal_bound,
    stein_coupling_terms,
    vc_class_budget,
    vc_maximal_bound,
    yurinskii_bound,
)
from .funcclass import (
    CoveringReport,
    DiscreteMeasure,
    DiscretizedClass,
    EntropyProfile,
    covering_number,
    covering_report,
    entropy_integral,
    entropy_profile,
    exhaustive_min_cover,
    product_class,
    vc_entropy_bound,
)
from .scenarios import (
    KernelScenario,
    SeriesScenario,
    build_kernel_class,
    build_series_class,
    design_kernel,
    design_series,
    kernel_density_scenario,
    rate_experiment,
    series_linear_statistic,
    series_mean_scenario,
    xi_n,
)
from .simulate import (
    CovarianceError,
    CovarianceModel,
    RngPolicy,
    SupSample,
    empirical_sup_sample,
    gaussian_covariance,
    gaussian_sup_sample,
    ks_distance,
    levy_concentration,
    quantile_coupling,
    sup_quantile,
)
from .smoothmax import (
    IndicatorSmoothing,
    SmoothMaxDerivs,
    epsilon_beta_delta,
    smooth_max,
    smooth_max_derivs,
    smoothed_indicator,
)

__version__ = "0.1.0"
