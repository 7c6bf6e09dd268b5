"""Langevin sampling toolkit for weakly smooth mixture potentials.

Pieces: potential definitions and assumption validators, generalized-Gaussian
smoothing, the constant-step Langevin kernel and multi-chain runner, explicit
constant/step-size evaluators, convergence diagnostics, and a batch CLI.
"""

from .bounds import (
    BoundSet,
    PlannerIneligibleError,
    descent_constants,
    grad_moment_bound,
    kl_transport_budget,
    initial_kl_surrogate,
    moment_growth_Cs,
    plan_step_size,
    poincare_lower_bound,
    smoothed_sampler_constants,
    stationary_grad_second_moment,
    tilde_constants,
    wasserstein_budget,
)
from .diagnostics import (
    QuadratureGrid,
    auto_grid,
    conversions,
    geometric_checkpoints,
    gaussian_stationary_cov,
    kl_gaussian_exact,
    kl_quadrature,
    moment_Ms,
    propagate_gaussian_chain,
    quantile_reference_1d,
    smoothed_target_w2_gap_1d,
    target_quadrature,
    tv_histogram,
    ula_gaussian_bias_floor,
    w2_densities_1d,
    w2_empirical,
)
from .pgauss import (
    SmoothedEstimate,
    SmoothingConfig,
    grad_estimate,
    grad_estimator_variance_bound,
    kappa_log,
    np_moment_exact,
    np_moment_sandwich,
    sample_np,
    smoothed_grad_oracle,
    smoothed_value,
    smoothing_bias_grad,
    smoothing_bias_value,
    smoothing_lipschitz,
)
from .potential import (
    CheckReport,
    PotentialSpec,
    builtin,
    check_dissipative,
    check_lower_envelope,
    check_mixture_smooth,
    check_origin_stationary,
    descent_upper_bound,
    lower_envelope,
)
from .sampler import (
    ChainState,
    RunConfig,
    RunResult,
    init_gaussian,
    run,
    ula_smoothed_step,
    ula_step,
)

__version__ = "0.1.0"
