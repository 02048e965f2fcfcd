"""Regularized least-squares learning in an RKHS with a sublinear penalty,
plus the synthetic spectral laboratory that checks the underlying
localization bounds at desk scale."""

from .complexity import (
    IntersectionEllipsoid,
    MCConfig,
    dual_sudakov_bound,
    dudley_gamma2_bound,
    ellipsoid_axes,
    ellipsoid_support,
    isomorphism_mc,
    low_excess_inclusion,
    sup_ratio_floor,
    localized_gaussian_complexity,
    localized_gaussian_sweep,
)
from .experiments import (
    CheckParams,
    ExperimentConfig,
    RateResult,
    run_checks,
    run_complexity,
    run_rates,
)
from .regfunc import (
    Constants,
    localized_width,
    RegularizerSpec,
    threshold_scale,
    sublinear_penalty,
    evaluate_regularizer,
    fixed_point,
    localization_sum_ratio,
    process_bound,
    improved_penalty,
    quadratic_penalty,
    sum_min,
    confidence_shift,
    localization_threshold,
)
from .solver import (
    FittedFunction,
    Frontier,
    build_frontier,
    fit_sample,
    frontier_for_sample,
    sup_ratio_diagnostic,
    regularized_erm,
    ridge_solve,
    ridge_solve_info,
)
from .spectrum import (
    EigenSpec,
    build_spec,
    feature_vector,
    gram_matrix,
    kernel_eval,
    weak_lp_norm,
)
from .synth import (
    RegressionTask,
    SampleSet,
    best_in_ball,
    check_approx_bound,
    default_g,
    draw_sample,
    make_target,
    population_risk_excess,
    with_noise,
)

__version__ = "0.1.0"
