"""Distribution-free loss-CDF bands and certified dispersion bounds."""

from .bands import (
    band_covers,
    band_from_json,
    band_to_json,
    build_band,
    discretize_cdf,
    exact_plugin_band,
    lower_band,
    upper_band,
    var_bounds,
)
from .crossing import (
    BoundVector,
    calibrate_berk_jones,
    calibrate_dkw,
    calibrate_truncated_bj,
    mc_noncrossing_oracle,
    noncrossing_gradient,
    noncrossing_probability,
)
from .errors import CalibrationError, DivergenceError, SchemaError
from .functionals import (
    BvDecomposition,
    ValueInterval,
    qbrm_interval,
    qbrm_lower,
    qbrm_upper,
    signed_weight_bounds,
    transform_abs,
    transform_bv,
    transform_polynomial,
)
from .measures import (
    GroupBounds,
    MeasureBoundReport,
    atkinson_upper,
    atkinson_upper_family,
    cvar_fairness_upper,
    extended_gini_upper,
    extreme_cdf_bands,
    generalized_entropy_upper,
    gini_upper,
    group_diff_upper,
    hoover_upper,
    lorenz_band,
    max_pairwise_diff_upper,
    mean_range_upper,
    risk_uncertainty_variance_upper,
)
from .multidim import (
    build_marginal_bands,
    multidim_band_query,
    multidim_dkw_radius,
    multidim_ecdf,
)
from .optimizer import (
    OptimizerConfig,
    QbrmObjective,
    SumObjective,
    TrainedBound,
    enforce_constraint,
    split_optimize_apply,
    stage1_fit,
    stage2_optimize,
)
from .samples import (
    CdfBand,
    LossSamples,
    OrderStats,
    StepCdf,
    WeightFunction,
    order_statistics,
    step_inverse,
    weight_integral,
)
from .selection import (
    HypothesisLossTable,
    ObjectiveSpec,
    ObjectiveTerm,
    corrected_delta,
    empirical_measure,
    evaluate_objective,
    select_hypothesis,
)

__version__ = "0.1.0"
