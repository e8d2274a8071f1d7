"""Input validation helpers shared across the package.

These mirror the usual check_* idiom: normalize to float64 ndarrays, fail
early with a named error, and return the validated object so calls can be
chained.
"""
from __future__ import annotations

import numpy as np

from .errors import (
    AsymmetricInput,
    DimensionMismatch,
    NonPositiveParameter,
    NonSquare,
    NumericalFailure,
)


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise NumericalFailure(f"{name} contains non-finite entries")
    return A


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise NumericalFailure(f"{name} contains non-finite entries")
    return v


def check_square(M, name: str = "matrix") -> np.ndarray:
    A = as_matrix(M, name)
    if A.shape[0] != A.shape[1]:
        raise NonSquare(f"{name} must be square, got shape {A.shape}")
    return A


def check_shape(M, shape: tuple[int, int], name: str = "matrix") -> np.ndarray:
    A = as_matrix(M, name)
    if A.shape != shape:
        raise DimensionMismatch(f"{name} must have shape {shape}, got {A.shape}")
    return A


def check_symmetric(M, name: str = "matrix", tol: float = 1e-10) -> np.ndarray:
    """Validate symmetry up to tol * ||M|| and return the symmetrized copy."""
    A = check_square(M, name)
    scale = np.linalg.norm(A, 2) if A.size else 0.0
    if np.linalg.norm(A - A.T, 2) > tol * max(scale, 1e-300) and scale > 0.0:
        raise AsymmetricInput(f"{name} is not symmetric within tol={tol:g}")
    return 0.5 * (A + A.T)


def check_positive(value: float, name: str = "value") -> float:
    v = float(value)
    if not np.isfinite(v) or v <= 0.0:
        raise NonPositiveParameter(f"{name} must be positive and finite, got {v!r}")
    return v


def check_gain(K, n_states: int, n_inputs: int, name: str = "gain") -> np.ndarray:
    """Validate a state-feedback gain of shape (n_inputs, n_states)."""
    return check_shape(K, (n_inputs, n_states), name)
