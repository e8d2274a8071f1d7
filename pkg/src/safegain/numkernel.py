"""Dense matrix kernels used by the synthesis layers.

Everything here is small-matrix, float64, and deterministic. Iterative
routines take a Tolerance and fail loudly instead of returning junk.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    NonPositiveParameter,
    NumericalFailure,
    Overflow,
    UnstableF,
)
from .validation import check_square, check_symmetric


@dataclass(frozen=True)
class Tolerance:
    """Stopping control for fixed-point iterations.

    absolute and relative are combined as ``abs_tol + rel_tol * scale``;
    at least one of them must be positive.
    """

    absolute: float = 1e-10
    relative: float = 1e-9
    max_iters: int = 10_000

    def __post_init__(self):
        if self.absolute < 0.0 or self.relative < 0.0:
            raise NonPositiveParameter("tolerances must be nonnegative")
        if self.absolute + self.relative <= 0.0:
            raise NonPositiveParameter("at least one tolerance must be positive")
        if self.max_iters < 1:
            raise NonPositiveParameter("max_iters must be at least 1")

    def threshold(self, scale: float) -> float:
        return self.absolute + self.relative * scale


DEFAULT_TOLERANCE = Tolerance()


class Definiteness(enum.Enum):
    POSITIVE_DEFINITE = "positive_definite"
    POSITIVE_SEMIDEFINITE = "positive_semidefinite"
    INDEFINITE = "indefinite"


def spectral_radius(M) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    A = check_square(M, "M")
    try:
        eigs = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK breakdown
        raise NumericalFailure(f"eigenvalue computation failed: {exc}") from exc
    if not np.all(np.isfinite(eigs)):
        raise NumericalFailure("eigenvalues are not finite")
    return float(np.max(np.abs(eigs))) if eigs.size else 0.0


def operator_norm(M) -> float:
    """Largest singular value (induced 2-norm); works for rectangular input."""
    A = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NumericalFailure("matrix contains non-finite entries")
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def definiteness(M, tol: float = 1e-10) -> Definiteness:
    """Classify a symmetric matrix by its smallest eigenvalue.

    The eigenvalue is compared against ``tol * max(1, ||M||)``: strictly
    above the threshold is positive definite, within it is semidefinite,
    below it is indefinite. Asymmetric input (beyond tol, relative) raises.
    """
    A = check_symmetric(M, "M", tol=tol)
    lam_min = float(np.linalg.eigvalsh(A)[0]) if A.size else 0.0
    thr = tol * max(1.0, operator_norm(A))
    if lam_min > thr:
        return Definiteness.POSITIVE_DEFINITE
    if lam_min >= -thr:
        return Definiteness.POSITIVE_SEMIDEFINITE
    return Definiteness.INDEFINITE


def solve_discrete_lyapunov(F, V, tol: Tolerance | None = None) -> np.ndarray:
    """Solve F' X F - X = -V for symmetric V with a contractive F.

    Uses squared-power accumulation: starting from X = V and G = F, each
    pass folds in G' X G and squares G, so k passes cover 2**k terms of
    the series sum_i (F')^i V F^i. Stops once the correction is below
    tolerance; the residual is then verified against 1e-9 * max(1, ||V||).
    """
    F = check_square(F, "F")
    V = check_symmetric(V, "V")
    if F.shape != V.shape:
        raise NumericalFailure(
            f"F and V must share shape, got {F.shape} vs {V.shape}"
        )
    rho = spectral_radius(F)
    if rho >= 1.0:
        raise UnstableF(f"spectral radius {rho:.6f} >= 1; series diverges")
    tol = tol or DEFAULT_TOLERANCE

    X = V.copy()
    G = F.copy()
    for _ in range(tol.max_iters):
        update = G.T @ X @ G
        X = X + update
        X = 0.5 * (X + X.T)
        if not np.all(np.isfinite(X)):
            raise NumericalFailure("iterates lost finiteness")
        if np.linalg.norm(update, "fro") <= tol.threshold(np.linalg.norm(X, "fro")):
            break
        G = G @ G
    else:
        raise NumericalFailure("correction did not fall below tolerance")

    scale = max(1.0, operator_norm(V))
    residual = operator_norm(F.T @ X @ F - X + V)
    if residual > 1e-9 * scale:
        raise NumericalFailure(
            f"residual {residual:.3e} exceeds {1e-9 * scale:.3e}"
        )
    return X


def matrix_exponential(M) -> np.ndarray:
    """Matrix exponential via scaling-and-squaring with rational approximation."""
    A = check_square(M, "M")
    E = scipy.linalg.expm(A)
    if not np.all(np.isfinite(E)):
        raise Overflow("matrix exponential overflowed")
    return E
