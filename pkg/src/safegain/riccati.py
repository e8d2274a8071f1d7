"""Value-matrix recursions and gain synthesis under a disturbance-gain budget.

Everything here works with a single quadratic value matrix P for a fixed
state-feedback gain.  The twist relative to plain LQ analysis is a
worst-case disturbance adjustment: the one-step value seen through the
dynamics is not P but an inflated matrix that accounts for the most harmful
disturbance a gain-bounded adversary can inject.  The inflation is only
well defined while ``gamma**2 * I - D' P D`` stays positive definite;
losing that margin is exactly what disqualifies a gain from the feasible
set, and the solvers below treat it as a first-class outcome rather than a
numerical accident.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import (
    CertificateFailure,
    DimensionMismatch,
    GammaInfeasible,
    InfeasibleInit,
    NonConvergence,
    NonPositiveParameter,
    SingularInnerMatrix,
    UnstabilizableModel,
    UnstableGain,
)
from .numkernel import Tolerance, operator_norm, solve_discrete_lyapunov, spectral_radius
from .sysmodel import LtiSystem, is_valid_controller
from .validation import as_matrix, check_gain, check_symmetric

logger = logging.getLogger(__name__)

#: Fixed-point solves stop when the iterate changes by less than
#: ``relative * max(1, ||P||_F)`` per sweep.
RICCATI_TOLERANCE = Tolerance(absolute=0.0, relative=1e-10, max_iters=10_000)

_MARGIN_FLOOR = 1e-12
_BLOWUP_LIMIT = 1e12
_EIG_FLOOR = 1e-12


def _sym(M):
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class RiccatiSolution:
    """Converged value matrix for one gain, with its feasibility evidence.

    feasibility_margin is the smallest eigenvalue of gamma^2*I - D'PD;
    residual is the Frobenius defect of the defining fixed-point equation.
    """

    P: np.ndarray
    gamma: float
    feasibility_margin: float
    residual: float
    iterations: int


@dataclass(frozen=True)
class StabilityCertificate:
    """Similarity-transform witness that a closed loop contracts uniformly.

    H conjugates the closed-loop matrix to L with ``norm(L) <= 1 - epsilon``,
    so every trajectory decays geometrically with a rate and transient
    constant read off from kappa.  alpha lower-bounds the smallest singular
    value of H and beta upper-bounds its largest, so kappa >= beta / alpha
    controls the conditioning of the change of coordinates.
    """

    kappa: float
    epsilon: float
    gamma: float
    H: np.ndarray
    L: np.ndarray
    alpha: float
    beta: float


class RiccatiMembership(Enum):
    VALID_BY_RICCATI = "valid_by_riccati"
    INVALID = "invalid"


def _check_gamma(gamma) -> float:
    gamma = float(gamma)
    if not math.isfinite(gamma) or gamma <= 0.0:
        raise NonPositiveParameter(f"gamma must be a positive finite real, got {gamma}")
    return gamma


def _disturbance_inner(P, D, gamma):
    """gamma^2 * I - D' P D, symmetrized, along with its smallest eigenvalue."""
    inner = _sym(gamma**2 * np.eye(D.shape[1]) - D.T @ P @ D)
    margin = float(np.linalg.eigvalsh(inner)[0])
    return inner, margin


def inflate_value(P, D, gamma):
    """Adjust a value matrix for the worst disturbance within the gain budget.

    Returns ``P + P D (gamma^2 I - D'PD)^{-1} D' P``.  The result dominates
    P in the semidefinite order; it collapses back to P when D = 0 or
    gamma -> infinity.
    """
    P = check_symmetric(as_matrix(P, "P"))
    D = as_matrix(D, "D")
    if D.shape[0] != P.shape[0]:
        raise DimensionMismatch(
            f"D has {D.shape[0]} rows but P is {P.shape[0]}x{P.shape[0]}"
        )
    gamma = _check_gamma(gamma)
    inner, margin = _disturbance_inner(P, D, gamma)
    if margin < _MARGIN_FLOOR:
        raise GammaInfeasible(
            f"disturbance budget exhausted: margin {margin:.3e} below {_MARGIN_FLOOR:.0e}"
        )
    PD = P @ D
    return _sym(P + PD @ np.linalg.solve(inner, PD.T))


def solve_policy_riccati(
    sys: LtiSystem, K, Qbar, Rbar, gamma, tol: Tolerance = RICCATI_TOLERANCE
) -> RiccatiSolution:
    """Value matrix of a fixed gain under worst-case bounded disturbances.

    Solves ``P = (A-BK)' Ptil (A-BK) + Qbar + K' Rbar K`` where Ptil is the
    disturbance inflation of P itself.  The equation is implicit, so we
    iterate the map from the plain (disturbance-free) Lyapunov solution
    upward; the iteration is monotone nondecreasing and converges exactly
    when the gain admits a feasible value matrix at this gamma.  Divergence
    shows up as the feasibility margin collapsing or the iterate blowing
    up, both reported as GammaInfeasible.
    """
    K = check_gain(K, sys.n_states, sys.n_inputs)
    Qbar = check_symmetric(as_matrix(Qbar, "Qbar"))
    Rbar = check_symmetric(as_matrix(Rbar, "Rbar"))
    if Qbar.shape[0] != sys.n_states:
        raise DimensionMismatch(f"Qbar must be {sys.n_states}x{sys.n_states}")
    if Rbar.shape[0] != sys.n_inputs:
        raise DimensionMismatch(f"Rbar must be {sys.n_inputs}x{sys.n_inputs}")
    gamma = _check_gamma(gamma)

    A_cl = sys.A - sys.B @ K
    rho = spectral_radius(A_cl)
    if rho >= 1.0:
        raise UnstableGain(f"closed-loop spectral radius {rho:.6f} >= 1")

    cost = _sym(Qbar + K.T @ Rbar @ K)
    P = solve_discrete_lyapunov(A_cl, cost)

    D = sys.D
    converged = False
    iterations = 0
    for iterations in range(1, tol.max_iters + 1):
        inner, margin = _disturbance_inner(P, D, gamma)
        if margin < _MARGIN_FLOOR:
            raise GammaInfeasible(
                f"no feasible value matrix: margin {margin:.3e} after "
                f"{iterations} sweeps (gain outside the valid set at gamma={gamma:g})"
            )
        PD = P @ D
        P_next = _sym(A_cl.T @ (P + PD @ np.linalg.solve(inner, PD.T)) @ A_cl + cost)
        step = float(np.linalg.norm(P_next - P))
        P = P_next
        norm_P = float(np.linalg.norm(P))
        if norm_P > _BLOWUP_LIMIT:
            raise GammaInfeasible(
                f"iterate norm {norm_P:.3e} exceeded {_BLOWUP_LIMIT:.0e}; "
                "no bounded solution exists at this gamma"
            )
        if step <= tol.threshold(max(1.0, norm_P)):
            converged = True
            break
    if not converged:
        raise NonConvergence(
            f"policy value iteration did not settle within {tol.max_iters} sweeps "
            f"(last step {step:.3e})"
        )

    inner, margin = _disturbance_inner(P, D, gamma)
    if margin < _MARGIN_FLOOR:
        raise GammaInfeasible(f"converged iterate lost its margin ({margin:.3e})")
    PD = P @ D
    Ptil = _sym(P + PD @ np.linalg.solve(inner, PD.T))
    residual = float(np.linalg.norm(A_cl.T @ Ptil @ A_cl + cost - P))
    P.setflags(write=False)
    return RiccatiSolution(
        P=P,
        gamma=gamma,
        feasibility_margin=margin,
        residual=residual,
        iterations=iterations,
    )


def policy_improvement(sys: LtiSystem, solution: RiccatiSolution, Rbar) -> np.ndarray:
    """One-step greedy gain against an (inflated) value matrix.

    Returns ``(Rbar + B' Ptil B)^{-1} B' Ptil A`` with Ptil the disturbance
    inflation of the solution's value matrix.
    """
    Rbar = check_symmetric(as_matrix(Rbar, "Rbar"))
    if Rbar.shape[0] != sys.n_inputs:
        raise DimensionMismatch(f"Rbar must be {sys.n_inputs}x{sys.n_inputs}")
    Ptil = inflate_value(solution.P, sys.D, solution.gamma)
    M = _sym(Rbar + sys.B.T @ Ptil @ sys.B)
    smallest = float(np.linalg.eigvalsh(M)[0])
    if smallest <= _MARGIN_FLOOR * max(1.0, float(np.linalg.norm(M))):
        raise SingularInnerMatrix(
            f"input-weight matrix not positive definite (min eig {smallest:.3e})"
        )
    return np.linalg.solve(M, sys.B.T @ Ptil @ sys.A)


def _cost_channel_system(sys: LtiSystem, Q, R) -> LtiSystem:
    """Rebuild the performance channel so its quadratic weights equal (Q, R)."""

    def psd_sqrt(M):
        vals, vecs = np.linalg.eigh(M)
        return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T

    n, m = sys.n_states, sys.n_inputs
    C = np.vstack([psd_sqrt(Q), np.zeros((m, n))])
    E = np.vstack([np.zeros((n, m)), psd_sqrt(R)])
    return LtiSystem(A=sys.A, B=sys.B, D=sys.D, C=C, E=E)


def solve_stationary(
    sys: LtiSystem,
    Q,
    R,
    gamma,
    K_init,
    tol: Tolerance = RICCATI_TOLERANCE,
):
    """Best static gain for fixed costs (Q, R) under the disturbance budget.

    Alternates value solves with greedy improvement starting from a gain
    that must already be feasible; returns ``(K_star, solution)`` where the
    gain is a fixed point of its own improvement step.
    """
    Q = check_symmetric(as_matrix(Q, "Q"))
    R = check_symmetric(as_matrix(R, "R"))
    gamma = _check_gamma(gamma)
    K = check_gain(K_init, sys.n_states, sys.n_inputs)

    channel = _cost_channel_system(sys, Q, R)
    report = is_valid_controller(channel, K, gamma)
    if not report.valid:
        raise InfeasibleInit(
            f"initial gain rejected: spectral radius {report.spectral_radius:.6f}, "
            f"peak disturbance gain {report.hinf:.6f} vs budget {gamma:g}"
        )
    try:
        solution = solve_policy_riccati(sys, K, Q, R, gamma, tol)
    except (UnstableGain, GammaInfeasible) as exc:
        raise InfeasibleInit(f"initial gain has no feasible value matrix: {exc}") from exc

    for _ in range(tol.max_iters):
        K_next = policy_improvement(sys, solution, R)
        next_solution = solve_policy_riccati(sys, K_next, Q, R, gamma, tol)
        drift = float(np.linalg.norm(next_solution.P - solution.P))
        K, solution = K_next, next_solution
        if drift <= tol.threshold(max(1.0, float(np.linalg.norm(solution.P)))):
            return K, solution
    raise NonConvergence(
        f"gain/value alternation did not settle within {tol.max_iters} rounds"
    )


def h2_cost_bound(P, D) -> float:
    """Steady-state cost proxy Tr(P D D'): the certified quadratic cost rate."""
    P = as_matrix(getattr(P, "P", P), "P")
    D = as_matrix(D, "D")
    if D.shape[0] != P.shape[0]:
        raise DimensionMismatch(
            f"D has {D.shape[0]} rows but P is {P.shape[0]}x{P.shape[0]}"
        )
    return float(np.sum((P @ D) * D))


def _escalated_membership(A_cl, D, cost, gamma) -> bool:
    """Decide feasibility when the plain fixed point converges too slowly.

    The iteration is monotone nondecreasing from the disturbance-free
    solution, so we run it in bursts, estimate the linear contraction ratio
    from the tail of each burst, and jump toward the limit with a damped
    geometric extrapolation.  Feasible instances settle onto a limit with a
    positive margin; infeasible ones collapse the margin (or keep a
    sustained ratio >= 1).
    """
    P = solve_discrete_lyapunov(A_cl, cost)
    sustained_up = 0
    for _ in range(60):
        diffs = []
        step_mat = None
        for _ in range(400):
            inner, margin = _disturbance_inner(P, D, gamma)
            if margin < _MARGIN_FLOOR:
                return False
            PD = P @ D
            P_next = _sym(A_cl.T @ (P + PD @ np.linalg.solve(inner, PD.T)) @ A_cl + cost)
            step_mat = P_next - P
            diffs.append(float(np.linalg.norm(step_mat)))
            P = P_next
            if float(np.linalg.norm(P)) > _BLOWUP_LIMIT:
                return False
            if diffs[-1] <= 1e-12 * max(1.0, float(np.linalg.norm(P))):
                _, margin = _disturbance_inner(P, D, gamma)
                return margin >= _MARGIN_FLOOR
        lag = 40
        ratio = (diffs[-1] / diffs[-1 - lag]) ** (1.0 / lag) if diffs[-1 - lag] > 0 else 0.0
        if ratio >= 1.0:
            sustained_up += 1
            if sustained_up >= 3:
                return False
            continue
        sustained_up = 0
        # Damped Aitken jump; undershooting keeps us below the monotone limit.
        P_jump = _sym(P + step_mat * (0.95 * ratio / (1.0 - ratio)))
        _, margin = _disturbance_inner(P_jump, D, gamma)
        if margin < _MARGIN_FLOOR:
            return False
        P = P_jump
    logger.debug("membership escalation exhausted its budget; classifying invalid")
    return False


def riccati_validity_check(sys: LtiSystem, K, gamma) -> RiccatiMembership:
    """Feasible-set membership decided purely through the value recursion.

    A gain is accepted exactly when the closed loop is stable and the
    implicit value equation admits a solution with positive disturbance
    margin.  This is an algebraic route to the same set that
    ``is_valid_controller`` decides in the frequency domain; the two must
    agree away from the budget boundary.  Numerical failures classify as
    INVALID with a logged diagnostic instead of raising.
    """
    try:
        K = check_gain(K, sys.n_states, sys.n_inputs)
        gamma = _check_gamma(gamma)
    except Exception as exc:  # malformed query -> not a member
        logger.debug("membership query rejected: %s", exc)
        return RiccatiMembership.INVALID

    A_cl = sys.A - sys.B @ K
    if spectral_radius(A_cl) >= 1.0:
        return RiccatiMembership.INVALID
    try:
        solution = solve_policy_riccati(sys, K, sys.Q, sys.R, gamma)
    except GammaInfeasible:
        return RiccatiMembership.INVALID
    except NonConvergence:
        cost = _sym(sys.Q + K.T @ sys.R @ K)
        ok = _escalated_membership(A_cl, sys.D, cost, gamma)
        return RiccatiMembership.VALID_BY_RICCATI if ok else RiccatiMembership.INVALID
    if solution.feasibility_margin > 0.0:
        return RiccatiMembership.VALID_BY_RICCATI
    return RiccatiMembership.INVALID


def _psd_power(P, exponent):
    vals, vecs = np.linalg.eigh(P)
    vals = np.clip(vals, _EIG_FLOOR, None)
    return (vecs * vals**exponent) @ vecs.T


def stability_certificate(
    sys: LtiSystem, K, solution: RiccatiSolution, mu
) -> StabilityCertificate:
    """Contraction certificate for a gain from its converged value matrix.

    Uses H = P^{-1/2} as the change of coordinates: the conjugated
    closed-loop matrix L = P^{1/2} (A-BK) P^{-1/2} contracts with margin
    epsilon = 1 / (2 kappa^2) where kappa = sqrt(lambda_max(P) / mu).  All
    claimed inequalities are re-verified numerically before returning;
    a violation means the caller's preconditions (cost floor mu, gain
    feasibility) did not actually hold.
    """
    mu = float(mu)
    if mu <= 0.0:
        raise NonPositiveParameter(f"mu must be positive, got {mu}")
    K = check_gain(K, sys.n_states, sys.n_inputs)
    P = solution.P
    lam_max = float(np.linalg.eigvalsh(P)[-1])
    kappa = math.sqrt(max(lam_max, _EIG_FLOOR) / mu)
    epsilon = 1.0 / (2.0 * kappa**2)

    A_cl = sys.A - sys.B @ K
    H = _psd_power(P, -0.5)
    H_inv = _psd_power(P, 0.5)
    L = H_inv @ A_cl @ H

    gain_norm = operator_norm(K)
    if gain_norm > kappa * (1.0 + 1e-8):
        raise CertificateFailure(
            f"gain norm {gain_norm:.6f} exceeds kappa {kappa:.6f}; "
            "cost floor mu likely violated"
        )
    L_norm = operator_norm(L)
    if L_norm > 1.0 - epsilon + 1e-9:
        raise CertificateFailure(
            f"conjugated loop norm {L_norm:.9f} exceeds contraction level "
            f"{1.0 - epsilon:.9f}"
        )
    beta = operator_norm(H)
    alpha = 1.0 / operator_norm(H_inv)
    if beta / alpha > kappa * (1.0 + 1e-8):
        raise CertificateFailure(
            f"coordinate conditioning {beta / alpha:.6f} exceeds kappa {kappa:.6f}"
        )
    reconstruction = float(
        np.linalg.norm(H @ L @ H_inv - A_cl) / max(1.0, np.linalg.norm(A_cl))
    )
    if reconstruction > 1e-8:
        raise CertificateFailure(
            f"similarity reconstruction error {reconstruction:.3e} above 1e-8"
        )
    return StabilityCertificate(
        kappa=kappa, epsilon=epsilon, gamma=solution.gamma, H=H, L=L, alpha=alpha, beta=beta
    )


def sequential_transition_norm(
    previous: StabilityCertificate, current: StabilityCertificate
) -> float:
    """Norm of the coordinate handoff between two consecutive certificates.

    Values close to 1 mean the two contraction frames are compatible, which
    is what lets per-step certificates chain into a statement about the
    time-varying loop.
    """
    return operator_norm(np.linalg.solve(current.H, previous.H))


def h2_bootstrap_gain(A, B, Q, R) -> np.ndarray:
    """Unconstrained-LQ gain used to seed solvers and probe stabilizability."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    Q = check_symmetric(as_matrix(Q, "Q"))
    R = check_symmetric(as_matrix(R, "R"))
    try:
        P = scipy.linalg.solve_discrete_are(A, B, Q, R)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        raise UnstabilizableModel(f"LQ seed synthesis failed: {exc}") from exc
    K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    if spectral_radius(A - B @ K) >= 1.0:
        raise UnstabilizableModel("LQ seed gain does not stabilize the model")
    return K
