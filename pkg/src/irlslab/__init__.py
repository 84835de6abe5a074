"""irlslab: iteratively reweighted least squares for sparse recovery.

Two smoothing-parameter schedules (the original rule and a tail-sum rule
with a provable convergence guarantee), a constructive family of instances
on which the original rule stalls, a sampling null-space-property checker,
and a seeded experiment harness with CSV and figure output.
"""

from .instances import (
    CounterexampleInstance,
    CounterexampleParams,
    NspReport,
    build_A_gamma,
    build_counterexample,
    build_tilde_A,
    nsp_check,
    nu_critical,
    perturb_counterexample,
    random_gaussian_instance,
    scalar_recursion_oracle,
)
from .linalg import (
    InfeasibleError,
    SingularSystemError,
    constrained_weighted_ls,
    nonincreasing_rearrangement,
    sigma_tail,
    smoothed_objective,
    weighted_inner,
    weighted_norm,
    weighted_regression_ls,
)
from .problems import CsInstance, RegressionInstance
from .solver import (
    DDFG,
    MODIFIED,
    IrlsConfig,
    IrlsResult,
    IterationTrace,
    LinearRateReport,
    eps_update_ddfg,
    eps_update_modified,
    linear_rate_certificate,
    local_rate_constant,
    run_irls_cs,
    run_irls_l1r,
    weights_from_iterate,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "DDFG",
    "MODIFIED",
    "CsInstance",
    "RegressionInstance",
    "CounterexampleInstance",
    "CounterexampleParams",
    "NspReport",
    "IrlsConfig",
    "IrlsResult",
    "IterationTrace",
    "LinearRateReport",
    "SingularSystemError",
    "InfeasibleError",
    "nonincreasing_rearrangement",
    "sigma_tail",
    "smoothed_objective",
    "weighted_inner",
    "weighted_norm",
    "constrained_weighted_ls",
    "weighted_regression_ls",
    "weights_from_iterate",
    "eps_update_ddfg",
    "eps_update_modified",
    "run_irls_cs",
    "run_irls_l1r",
    "local_rate_constant",
    "linear_rate_certificate",
    "nu_critical",
    "build_tilde_A",
    "build_A_gamma",
    "build_counterexample",
    "scalar_recursion_oracle",
    "perturb_counterexample",
    "random_gaussian_instance",
    "nsp_check",
]
