"""safegain: online synthesis of safety-constrained state-feedback gains."""

from .adversary import (
    AttackConfig,
    AttackKind,
    CostPerturbConfig,
    bounded_disturbance,
    dos_disturbance,
    ensure_identity_disturbance_channel,
    perturbed_costs,
)
from .benchcli import (
    TRACE_COLUMNS,
    ExperimentConfig,
    FileSeed,
    ModelParams,
    StationarySeed,
    bundled_model_path,
    default_trace_stride,
    emit_bound_curve,
    load_model,
    run_experiment,
    write_model,
)
from .errors import InvalidInput, SafegainError, SolverFailure
from .estimator import OnlineGainSynthesizer
from .numkernel import (
    DEFAULT_TOLERANCE,
    Definiteness,
    Tolerance,
    definiteness,
    matrix_exponential,
    operator_norm,
    solve_discrete_lyapunov,
    spectral_radius,
)
from .online import (
    BoundConstants,
    HistoryRow,
    OnlineConfig,
    OnlineState,
    RegretTrace,
    bound_constants,
    counterfactual_optimum,
    estimate_m,
    init,
    regret,
    regret_bound,
    running_average_update,
    step,
    telescoped_regret,
)
from .riccati import (
    RICCATI_TOLERANCE,
    RiccatiMembership,
    RiccatiSolution,
    StabilityCertificate,
    h2_bootstrap_gain,
    h2_cost_bound,
    inflate_value,
    policy_improvement,
    riccati_validity_check,
    sequential_transition_norm,
    solve_policy_riccati,
    solve_stationary,
    stability_certificate,
)
from .sysmodel import (
    LtiSystem,
    Trajectory,
    ValidityReport,
    closed_loop,
    hinf_norm,
    is_valid_controller,
    simulate,
    zoh_discretize,
)

__all__ = [
    "AttackConfig",
    "AttackKind",
    "BoundConstants",
    "CostPerturbConfig",
    "DEFAULT_TOLERANCE",
    "Definiteness",
    "ExperimentConfig",
    "FileSeed",
    "HistoryRow",
    "InvalidInput",
    "LtiSystem",
    "ModelParams",
    "OnlineConfig",
    "OnlineGainSynthesizer",
    "OnlineState",
    "RICCATI_TOLERANCE",
    "RegretTrace",
    "RiccatiMembership",
    "RiccatiSolution",
    "SafegainError",
    "SolverFailure",
    "StabilityCertificate",
    "StationarySeed",
    "TRACE_COLUMNS",
    "Tolerance",
    "Trajectory",
    "ValidityReport",
    "bound_constants",
    "bounded_disturbance",
    "bundled_model_path",
    "closed_loop",
    "counterfactual_optimum",
    "default_trace_stride",
    "definiteness",
    "dos_disturbance",
    "emit_bound_curve",
    "ensure_identity_disturbance_channel",
    "estimate_m",
    "h2_bootstrap_gain",
    "h2_cost_bound",
    "hinf_norm",
    "inflate_value",
    "init",
    "is_valid_controller",
    "load_model",
    "matrix_exponential",
    "operator_norm",
    "perturbed_costs",
    "policy_improvement",
    "regret",
    "regret_bound",
    "riccati_validity_check",
    "run_experiment",
    "running_average_update",
    "sequential_transition_norm",
    "simulate",
    "solve_discrete_lyapunov",
    "solve_policy_riccati",
    "solve_stationary",
    "spectral_radius",
    "stability_certificate",
    "step",
    "telescoped_regret",
    "write_model",
    "zoh_discretize",
]

__version__ = "0.1.0"
