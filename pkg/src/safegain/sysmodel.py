"""Plant representation, discretization, closed-loop maps, and safety checks.

The plant is x_{t+1} = A x_t + B u_t + D w_t with performance output
z_t = C x_t + E u_t. Cost weights Q = C'C and R = E'E are derived; the
cross term E'C is required to vanish so state and input costs separate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssumptionViolation,
    DimensionMismatch,
    NonPositiveDt,
    StateOverflow,
    UnstableClosedLoop,
)
from .numkernel import matrix_exponential, operator_norm, spectral_radius
from .validation import as_matrix, as_vector, check_gain, check_positive, check_square

STATE_OVERFLOW_LIMIT = 1e12

# interior points per bracket-zoom round of the peak-gain refinement
_ZOOM_POINTS = 17


@dataclass(frozen=True)
class LtiSystem:
    """Immutable discrete-time plant with derived cost weights.

    Construction validates dimensions and the cross-term condition
    ||E'C|| <= 1e-10 (1 + ||E|| ||C||). Stabilizability of (A, B) is a
    separate certificate (see the synthesis layer) so this module stays
    free of solver dependencies.
    """

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    C: np.ndarray
    E: np.ndarray
    Q: np.ndarray = field(init=False, repr=False)
    R: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = check_square(self.A, "A")
        n = A.shape[0]
        B = as_matrix(self.B, "B")
        D = as_matrix(self.D, "D")
        C = as_matrix(self.C, "C")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B must have {n} rows, got {B.shape}")
        if D.shape[0] != n:
            raise DimensionMismatch(f"D must have {n} rows, got {D.shape}")
        if C.shape[1] != n:
            raise DimensionMismatch(f"C must have {n} columns, got {C.shape}")
        E = as_matrix(self.E, "E")
        if E.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch(
                f"E must have shape {(C.shape[0], B.shape[1])}, got {E.shape}"
            )
        cross = operator_norm(E.T @ C)
        limit = 1e-10 * (1.0 + operator_norm(E) * operator_norm(C))
        if cross > limit:
            raise AssumptionViolation(
                f"||E'C|| = {cross:.3e} exceeds {limit:.3e}; state and input "
                "costs must not couple"
            )
        for name, value in (("A", A), ("B", B), ("D", D), ("C", C), ("E", E)):
            object.__setattr__(self, name, value)
            value.setflags(write=False)
        Q = C.T @ C
        R = E.T @ E
        Q.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_disturbances(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class Trajectory:
    """Recorded rollout: states x[0..T], controls/disturbances/outputs [0..T-1]."""

    x: np.ndarray
    u: np.ndarray
    w: np.ndarray
    z: np.ndarray

    @property
    def horizon(self) -> int:
        return self.u.shape[0]

    def transition_residual(self, sys: LtiSystem) -> float:
        """Worst-case defect of the stored transitions against the dynamics."""
        worst = 0.0
        for t in range(self.horizon):
            pred = sys.A @ self.x[t] + (sys.B @ self.u[t] + sys.D @ self.w[t])
            worst = max(worst, float(np.linalg.norm(self.x[t + 1] - pred)))
        return worst


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    spectral_radius: float
    hinf: float


def zoh_discretize(Ac, Bc, Dc, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Zero-order-hold discretization of (Ac, Bc, Dc) at sample time dt.

    Exponentiates the augmented block matrix [[Ac, Bc, Dc], [0, 0, 0]] * dt;
    the top blocks of the result are exp(Ac dt) and the held-input integrals
    int_0^dt exp(Ac s) ds @ {Bc, Dc}.
    """
    Ac = check_square(Ac, "Ac")
    n = Ac.shape[0]
    Bc = as_matrix(Bc, "Bc")
    Dc = as_matrix(Dc, "Dc")
    if Bc.shape[0] != n or Dc.shape[0] != n:
        raise DimensionMismatch("Bc and Dc must have as many rows as Ac")
    if not (np.isfinite(dt) and dt > 0.0):
        raise NonPositiveDt(f"dt must be positive, got {dt!r}")
    m, p = Bc.shape[1], Dc.shape[1]
    aug = np.zeros((n + m + p, n + m + p))
    aug[:n, :n] = Ac
    aug[:n, n : n + m] = Bc
    aug[:n, n + m :] = Dc
    E = matrix_exponential(aug * dt)
    return E[:n, :n].copy(), E[:n, n : n + m].copy(), E[:n, n + m :].copy()


def closed_loop(sys: LtiSystem, K) -> tuple[np.ndarray, np.ndarray]:
    """Closed-loop state and output maps under u = -K x."""
    K = check_gain(K, sys.n_states, sys.n_inputs, "K")
    return sys.A - sys.B @ K, sys.C - sys.E @ K


def _response_peak(A_cl, C_cl, D, omegas) -> tuple[np.ndarray, int]:
    """Largest singular values of the response at each frequency, batched."""
    zetas = np.exp(1j * omegas)
    lhs = zetas[:, None, None] * np.eye(A_cl.shape[0]) - A_cl[None, :, :]
    rhs = np.broadcast_to(D.astype(complex), (omegas.size,) + D.shape)
    X = np.linalg.solve(lhs, rhs)
    sigmas = np.linalg.svd(C_cl[None, :, :] @ X, compute_uv=False)[:, 0]
    return sigmas, int(np.argmax(sigmas))


def hinf_norm(A_cl, C_cl, D, grid_points: int = 2048, refine_tol: float = 1e-8) -> float:
    """Peak gain of the disturbance-to-output map over the unit circle.

    Evaluates sigma_max(C_cl (zI - A_cl)^-1 D) on a uniform frequency grid
    over [0, pi], then sharpens the best bracket by repeatedly re-sampling
    it with a finer grid until its width drops below refine_tol. The result
    is a lower bound of the true peak, tight to the refinement.
    """
    A_cl = check_square(A_cl, "A_cl")
    C_cl = as_matrix(C_cl, "C_cl")
    D = as_matrix(D, "D")
    n = A_cl.shape[0]
    if C_cl.shape[1] != n or D.shape[0] != n:
        raise DimensionMismatch("C_cl columns and D rows must match A_cl")
    rho = spectral_radius(A_cl)
    if rho >= 1.0:
        raise UnstableClosedLoop(f"spectral radius {rho:.6f} >= 1")
    if grid_points < 2:
        raise DimensionMismatch("grid_points must be at least 2")

    omegas = np.linspace(0.0, math.pi, grid_points)
    sigmas, k = _response_peak(A_cl, C_cl, D, omegas)
    best = float(sigmas[k])

    a = omegas[max(k - 1, 0)]
    b = omegas[min(k + 1, grid_points - 1)]
    while (b - a) > refine_tol:
        ws = np.linspace(a, b, _ZOOM_POINTS)
        sig, j = _response_peak(A_cl, C_cl, D, ws)
        best = max(best, float(sig[j]))
        a = ws[max(j - 1, 0)]
        b = ws[min(j + 1, _ZOOM_POINTS - 1)]
    return best


def is_valid_controller(
    sys: LtiSystem, K, gamma: float, grid_points: int = 2048, refine_tol: float = 1e-8
) -> ValidityReport:
    """Membership test for the admissible gain set: stability plus attenuation.

    A destabilizing gain yields valid=False with hinf reported as +inf.
    """
    check_positive(gamma, "gamma")
    A_cl, C_cl = closed_loop(sys, K)
    rho = spectral_radius(A_cl)
    if rho >= 1.0:
        return ValidityReport(False, rho, math.inf)
    peak = hinf_norm(A_cl, C_cl, sys.D, grid_points=grid_points, refine_tol=refine_tol)
    return ValidityReport(bool(peak < gamma), rho, peak)


def simulate(sys: LtiSystem, gains, disturbances, x0) -> Trajectory:
    """Roll the closed loop forward under a per-step gain schedule.

    The update is grouped as A x + (B u + D w) so that an input-cancelling
    disturbance w = -B u produces x_{t+1} = A x_t without rounding residue.
    """
    x0 = as_vector(x0, "x0")
    if x0.shape[0] != sys.n_states:
        raise DimensionMismatch(f"x0 must have length {sys.n_states}")
    gains = [check_gain(K, sys.n_states, sys.n_inputs, f"gains[{i}]") for i, K in enumerate(gains)]
    w_seq = [as_vector(w, f"disturbances[{i}]") for i, w in enumerate(disturbances)]
    if len(w_seq) != len(gains):
        raise DimensionMismatch(
            f"{len(gains)} gains but {len(w_seq)} disturbances"
        )
    for i, w in enumerate(w_seq):
        if w.shape[0] != sys.n_disturbances:
            raise DimensionMismatch(f"disturbances[{i}] must have length {sys.n_disturbances}")

    T = len(gains)
    x = np.zeros((T + 1, sys.n_states))
    u = np.zeros((T, sys.n_inputs))
    w = np.zeros((T, sys.n_disturbances))
    z = np.zeros((T, sys.n_outputs))
    x[0] = x0
    for t in range(T):
        u[t] = -(gains[t] @ x[t])
        w[t] = w_seq[t]
        z[t] = sys.C @ x[t] + sys.E @ u[t]
        x[t + 1] = sys.A @ x[t] + (sys.B @ u[t] + sys.D @ w[t])
        if np.linalg.norm(x[t + 1]) > STATE_OVERFLOW_LIMIT:
            raise StateOverflow(f"state norm exceeded {STATE_OVERFLOW_LIMIT:g} at t={t + 1}")
    return Trajectory(x=x, u=u, w=w, z=z)
