"""Simulation and identification laboratory for ordered subjective reports
with heterogeneous reporting functions."""

__version__ = "0.1.0"

from .latent import (
    LatentDistribution,
    LogLinear,
    LogNormal,
    LinearIndex,
    Mixture,
    Normal,
    Shifted,
    StructuralModel,
    Truncated,
    Uniform,
    evaluate,
    quantile,
    sample,
    treatment_effect,
)
from .reporting import (
    DenseScale,
    PiecewiseLinearMap,
    ReportingMixture,
    ThresholdProfile,
    avg_slope,
    compose_subjective,
    dense_refine,
    dense_slope,
    linear_profile,
    report,
    sampled_profile,
)
from .weights import (
    BoundsReport,
    WeightBreakdown,
    bounds_check,
    cdf_slope_weight,
    convolution_diag,
    delta_ratio,
    dense_totals,
    discrete_total,
    mean_slope_total,
    ratio_table,
)
from .simulate import (
    Dataset,
    DgpSpec,
    IllustrativeSpec,
    analytic_cef_illustrative,
    build_illustrative,
    draw,
    draw_pair,
    preset,
    reporting_mixture,
    reproduce_figure,
    scale_population,
)
from .estimate import (
    CefFit,
    RegressionResult,
    avg_discrete_contrast,
    avg_marginal_effect,
    bootstrap,
    control_function,
    local_ratio,
    npreg_fit,
    ols,
    recover_g,
)
from .diagnose import (
    DiagnosticReport,
    dominance_check,
    invariance_ratios,
    quantile_expansion_check,
    sign_overidentification,
    yitzhaki_weights,
)
