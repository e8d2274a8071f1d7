"""Online gain synthesis against adversarial quadratic costs.

The loop maintains running averages of the cost matrices revealed so far,
re-solves the disturbance-adjusted value equation for the gain currently in
play, and commits the greedy improvement of that value as the gain for the
next step.  Because averages move by O(1/t), consecutive value matrices
drift slowly enough that every committed gain stays inside the feasible set
fixed at initialization.  Once past a computable burn-in step the state has
settled enough for a one-shot inner refinement, after which the per-step
value drift obeys an explicit 1/t envelope and the cumulative-cost gap to
the best static gain in hindsight grows only logarithmically.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    CostBoundViolation,
    DimensionMismatch,
    GammaInfeasible,
    HorizonBelowBurnIn,
    InfeasibleInit,
    InsufficientTrace,
    NonPositiveParameter,
)
from .numkernel import Tolerance, operator_norm, spectral_radius
from .riccati import (
    RICCATI_TOLERANCE,
    RiccatiSolution,
    StabilityCertificate,
    policy_improvement,
    solve_policy_riccati,
    solve_stationary,
    stability_certificate,
)
from .sysmodel import LtiSystem, hinf_norm, is_valid_controller
from .validation import as_matrix, check_gain, check_positive, check_symmetric

logger = logging.getLogger(__name__)

_ADMISSIBILITY_SLACK = 1e-9


@dataclass(frozen=True)
class OnlineConfig:
    """Tuning constants fixed before the first step.

    mu lower-bounds every cost eigenvalue, sigma caps every cost trace;
    both are promises about the incoming cost stream that the loop enforces
    by rejection.  m scales the burn-in term of the performance envelope
    and can be replaced after the fact by the fitted estimate.
    """

    mu: float
    sigma: float
    m: float = 1.0
    nu_init: float = 0.0
    refine_max_iters: int = 1000
    monitor_stride: int = 1
    monitor_grid_points: int = 2048
    value_tolerance: Tolerance = RICCATI_TOLERANCE

    def __post_init__(self):
        check_positive(self.mu, "mu")
        check_positive(self.sigma, "sigma")
        check_positive(self.m, "m")
        if self.nu_init < 0.0:
            raise NonPositiveParameter("nu_init must be nonnegative")
        if self.refine_max_iters < 1 or self.monitor_stride < 1:
            raise NonPositiveParameter("iteration controls must be at least 1")


@dataclass(frozen=True)
class BoundConstants:
    """Derived constants that parameterize the performance envelope."""

    mu: float
    nu: float
    sigma: float
    kappa: float
    epsilon: float
    t_star: float
    p_star: float
    m: float


@dataclass(frozen=True)
class HistoryRow:
    t: int
    pdiff: float
    j: float
    specrad: float
    hinf: float


@dataclass
class RegretTrace:
    """Dense per-step record of realized and counterfactual cost rates.

    j_star (and the derived regret) is populated only at emission times;
    missing entries are nan.  bound is nan before the burn-in step.
    """

    steps: list = field(default_factory=list)
    j: list = field(default_factory=list)
    j_star: list = field(default_factory=list)
    regret: list = field(default_factory=list)
    bound: list = field(default_factory=list)
    pdiff: list = field(default_factory=list)

    def append_row(self, t, j, j_star=math.nan, bound=math.nan, pdiff=math.nan):
        if self.steps and t != self.steps[-1] + 1:
            raise InsufficientTrace(f"trace rows must be consecutive, got t={t}")
        self.steps.append(int(t))
        self.j.append(float(j))
        self.j_star.append(float(j_star))
        self.regret.append(float(j) - float(j_star))
        self.bound.append(float(bound))
        self.pdiff.append(float(pdiff))

    def __len__(self):
        return len(self.steps)


@dataclass
class OnlineState:
    """Everything the loop carries between steps.

    K is the gain committed for the *next* time index; P is the value
    matrix of the gain that was just in play (value_gain), so the pair
    (value_gain, P) is always mutually consistent.
    """

    sys: LtiSystem
    gamma: float
    config: OnlineConfig
    t: int
    Qbar: np.ndarray
    Rbar: np.ndarray
    K: np.ndarray
    P: RiccatiSolution
    value_gain: np.ndarray
    constants: BoundConstants
    certificate: StabilityCertificate
    refined: bool = False
    history: list = field(default_factory=list)
    refinement_diffs: list = field(default_factory=list)
    recompute_log: list = field(default_factory=list)

    @property
    def m_hat(self) -> float:
        """Quadratic-convergence constant fitted from the refinement sweep."""
        return estimate_m(self.refinement_diffs, fallback=self.config.m)


def running_average_update(Qbar, Rbar, Q_t, R_t, t: int):
    """Fold one cost pair into the running means; t=1 resets to the new pair."""
    Q_t = check_symmetric(as_matrix(Q_t, "Q_t"), "Q_t")
    R_t = check_symmetric(as_matrix(R_t, "R_t"), "R_t")
    t = int(t)
    if t < 1:
        raise NonPositiveParameter(f"t must be at least 1, got {t}")
    if t == 1:
        return Q_t, R_t
    Qbar = check_symmetric(as_matrix(Qbar, "Qbar"), "Qbar")
    Rbar = check_symmetric(as_matrix(Rbar, "Rbar"), "Rbar")
    if Qbar.shape != Q_t.shape or Rbar.shape != R_t.shape:
        raise DimensionMismatch("running averages and new costs must share shapes")
    w = (t - 1.0) / t
    return w * Qbar + Q_t / t, w * Rbar + R_t / t


def bound_constants(mu, nu, sigma, B_norm, m: float = 1.0) -> BoundConstants:
    """Burn-in step and drift envelope implied by the problem constants.

    kappa measures how far value matrices can rise above the cost floor;
    everything else is a closed-form expression in kappa and the scale
    parameters.  p_star is the per-step drift budget, t_star the step after
    which the 1/t envelope is guaranteed.
    """
    mu = check_positive(mu, "mu")
    nu = check_positive(nu, "nu")
    sigma = check_positive(sigma, "sigma")
    B_norm = check_positive(B_norm, "B_norm")
    m = check_positive(m, "m")
    kappa = math.sqrt(nu / mu)
    epsilon = 1.0 / (2.0 * kappa**2)
    k2 = kappa**2
    t_star = (8.0 * sigma * k2**2 * B_norm / (epsilon * mu)) * (
        1.0 + k2 * B_norm * (1.0 + k2) / epsilon
    )
    p_star = 2.0 * sigma / B_norm + 4.0 * k2 * sigma * (1.0 + k2) / epsilon
    return BoundConstants(
        mu=mu,
        nu=nu,
        sigma=sigma,
        kappa=kappa,
        epsilon=epsilon,
        t_star=t_star,
        p_star=p_star,
        m=m,
    )


def estimate_m(diffs, fallback: float = 1.0) -> float:
    """Fit the constant c in ``d_next <= c * d_prev**2`` from refinement diffs."""
    best = None
    for prev, nxt in zip(diffs, diffs[1:]):
        if prev > 1e-14:
            ratio = nxt / prev**2
            best = ratio if best is None else max(best, ratio)
    return float(best) if best is not None else float(fallback)


def _check_admissible(M, mu, sigma, name):
    M = check_symmetric(as_matrix(M, name), name)
    smallest = float(np.linalg.eigvalsh(M)[0])
    if smallest < mu - _ADMISSIBILITY_SLACK:
        raise CostBoundViolation(
            f"{name}: smallest eigenvalue {smallest:.6g} below the floor {mu:.6g}"
        )
    tr = float(np.trace(M))
    if tr > sigma + _ADMISSIBILITY_SLACK:
        raise CostBoundViolation(f"{name}: trace {tr:.6g} exceeds the cap {sigma:.6g}")
    return M


def _monitor(sys, K, gamma, t, config):
    """Spectral radius always; peak gain only on the monitoring stride."""
    A_cl = sys.A - sys.B @ K
    rho = spectral_radius(A_cl)
    if t == 1 or t % config.monitor_stride == 0:
        if rho < 1.0:
            peak = hinf_norm(
                A_cl, sys.C - sys.E @ K, sys.D, grid_points=config.monitor_grid_points
            )
        else:
            peak = math.inf
    else:
        peak = math.nan
    return rho, peak


def init(sys: LtiSystem, Q_1, R_1, gamma, K_1, config: OnlineConfig) -> OnlineState:
    """Validate the starting gain, solve its value, and commit the next gain.

    The starting gain must stabilize the plant, keep the closed-loop peak
    disturbance gain under gamma, and admit a feasible value matrix for the
    first cost pair; each failure is reported separately.
    """
    K_1 = check_gain(K_1, sys.n_states, sys.n_inputs, "K_1")
    Q_1 = _check_admissible(Q_1, config.mu, config.sigma, "Q_1")
    R_1 = _check_admissible(R_1, config.mu, config.sigma, "R_1")
    report = is_valid_controller(sys, K_1, gamma)
    if report.spectral_radius >= 1.0:
        raise InfeasibleInit(
            f"starting gain does not stabilize: spectral radius {report.spectral_radius:.6f}"
        )
    if not report.valid:
        raise InfeasibleInit(
            f"starting gain violates the disturbance budget: peak gain "
            f"{report.hinf:.6f} >= gamma {gamma:g}"
        )
    try:
        solution = solve_policy_riccati(sys, K_1, Q_1, R_1, gamma, config.value_tolerance)
    except GammaInfeasible as exc:
        raise InfeasibleInit(f"starting gain admits no feasible value matrix: {exc}") from exc

    nu = max(config.nu_init, float(np.linalg.eigvalsh(solution.P)[-1]))
    constants = bound_constants(config.mu, nu, config.sigma, operator_norm(sys.B), config.m)
    certificate = stability_certificate(sys, K_1, solution, config.mu)
    K_next = policy_improvement(sys, solution, R_1)

    state = OnlineState(
        sys=sys,
        gamma=float(gamma),
        config=config,
        t=1,
        Qbar=Q_1,
        Rbar=R_1,
        K=K_next,
        P=solution,
        value_gain=K_1,
        constants=constants,
        certificate=certificate,
    )
    rho, peak = _monitor(sys, K_1, gamma, 1, config)
    state.history.append(
        HistoryRow(t=1, pdiff=math.nan, j=_cost_rate(solution, sys), specrad=rho, hinf=peak)
    )
    return state


def _cost_rate(solution: RiccatiSolution, sys: LtiSystem) -> float:
    D = sys.D
    return float(np.sum((solution.P @ D) * D))


def _refine(state: OnlineState, Qbar, Rbar):
    """Inner alternation at the burn-in step; returns the settled pair.

    Alternates greedy improvement with fresh value solves under the frozen
    averages until successive values move less than p_star / t_star, and
    records the diff sequence for the quadratic-convergence fit.
    """
    target = state.constants.p_star / state.constants.t_star
    solution = state.P
    gain = state.value_gain
    diffs = []
    for _ in range(state.config.refine_max_iters):
        gain_next = policy_improvement(state.sys, solution, Rbar)
        next_solution = solve_policy_riccati(
            state.sys, gain_next, Qbar, Rbar, state.gamma, state.config.value_tolerance
        )
        diffs.append(operator_norm(next_solution.P - solution.P))
        solution, gain = next_solution, gain_next
        if diffs[-1] <= target:
            break
    else:
        logger.warning("refinement hit its iteration cap before reaching %.3e", target)
    return solution, gain, diffs


def step(state: OnlineState, Q_t, R_t) -> OnlineState:
    """Advance one time index: fold costs, re-solve, refine once, commit.

    The returned object is the same state advanced in place; steps are
    strictly sequential.
    """
    cfg = state.config
    Q_t = _check_admissible(Q_t, cfg.mu, cfg.sigma, "Q_t")
    R_t = _check_admissible(R_t, cfg.mu, cfg.sigma, "R_t")
    t = state.t + 1
    Qbar, Rbar = running_average_update(state.Qbar, state.Rbar, Q_t, R_t, t)

    active_gain = state.K
    solution = solve_policy_riccati(
        state.sys, active_gain, Qbar, Rbar, state.gamma, cfg.value_tolerance
    )
    value_gain = active_gain

    nu = float(np.linalg.eigvalsh(solution.P)[-1])
    if nu > state.constants.nu:
        state.constants = bound_constants(
            cfg.mu, nu, cfg.sigma, operator_norm(state.sys.B), cfg.m
        )
        state.recompute_log.append((t, nu, state.constants.t_star, state.constants.p_star))
        logger.info(
            "value ceiling rose to %.6g at t=%d; burn-in recomputed to %.6g",
            nu,
            t,
            state.constants.t_star,
        )

    prev_P = state.P.P
    state.P = solution
    state.value_gain = value_gain
    state.t = t
    state.Qbar, state.Rbar = Qbar, Rbar

    if not state.refined and t >= math.ceil(state.constants.t_star):
        refined_solution, refined_gain, diffs = _refine(state, Qbar, Rbar)
        state.P = refined_solution
        state.value_gain = refined_gain
        state.refinement_diffs = diffs
        state.refined = True
        lam = float(np.linalg.eigvalsh(refined_solution.P)[-1])
        if lam > state.constants.nu:
            state.constants = bound_constants(
                cfg.mu, lam, cfg.sigma, operator_norm(state.sys.B), cfg.m
            )
            state.recompute_log.append(
                (t, lam, state.constants.t_star, state.constants.p_star)
            )

    state.certificate = stability_certificate(
        state.sys, state.value_gain, state.P, cfg.mu
    )
    state.K = policy_improvement(state.sys, state.P, Rbar)

    rho, peak = _monitor(state.sys, active_gain, state.gamma, t, cfg)
    state.history.append(
        HistoryRow(
            t=t,
            pdiff=operator_norm(state.P.P - prev_P),
            j=_cost_rate(state.P, state.sys),
            specrad=rho,
            hinf=peak,
        )
    )
    return state


def regret(trace: RegretTrace, T: int) -> float:
    """Cost-rate gap at horizon T against the best static gain in hindsight."""
    T = int(T)
    if T < 1 or len(trace) < T:
        raise InsufficientTrace(f"trace has {len(trace)} rows, need {T}")
    j_star = trace.j_star[T - 1]
    if not math.isfinite(j_star):
        raise InsufficientTrace(f"no counterfactual optimum recorded at t={T}")
    return trace.j[T - 1] - j_star


def telescoped_regret(trace: RegretTrace, T: int) -> float:
    """Same quantity accumulated as a telescoping sum of per-step changes."""
    T = int(T)
    if T < 1 or len(trace) < T:
        raise InsufficientTrace(f"trace has {len(trace)} rows, need {T}")
    j_star = trace.j_star[T - 1]
    if not math.isfinite(j_star):
        raise InsufficientTrace(f"no counterfactual optimum recorded at t={T}")
    previous = [0.0] + trace.j[: T - 1]
    return math.fsum(j - p for j, p in zip(trace.j[:T], previous)) - j_star


def _bound_value(constants: BoundConstants, trace_dd: float, T: float) -> float:
    """Envelope kernel shared by regret_bound and the curve emitter."""
    if T < constants.t_star:
        raise HorizonBelowBurnIn(
            f"horizon {T:g} is below the burn-in step {constants.t_star:.6g}"
        )
    return trace_dd * (
        math.log(T)
        + 2.0 * constants.m * constants.p_star / (constants.t_star + 1.0)
        - math.log(constants.t_star)
    )


def regret_bound(constants: BoundConstants, D, T: int) -> float:
    """Logarithmic performance envelope valid from the burn-in step onward."""
    D = as_matrix(D, "D")
    return _bound_value(constants, float(np.sum(D * D)), int(T))


def counterfactual_optimum(sys: LtiSystem, Qbar, Rbar, gamma, K_seed):
    """Best static cost rate for the averaged costs, via the stationary solver."""
    K_star, solution = solve_stationary(sys, Qbar, Rbar, gamma, K_seed)
    return K_star, _cost_rate(solution, sys)
