"""Disturbance and cost-sequence generators for the attack scenarios.

All generators are pure functions of (config, t): each call derives a fresh
random stream from the config seed, a purpose tag, and the step index, so
outputs are reproducible bit-for-bit without threading generator state
through the experiment loop, and replicas with different seeds never share
streams.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DosRequiresIdentityD,
    InadmissibleBase,
    NonPositiveParameter,
)
from .validation import as_matrix, as_vector, check_symmetric

_TAG_DISTURBANCE = 1
_TAG_COST_Q = 2
_TAG_COST_R = 3


class AttackKind(enum.Enum):
    ARBITRARY = "arbitrary"
    DENIAL_OF_SERVICE = "denial_of_service"


@dataclass(frozen=True)
class AttackConfig:
    """Disturbance attack: bounded-ball noise, optionally with a DoS window.

    The DoS window is inclusive on both ends and must start strictly after
    the first step, because the synthesis loop needs one clean step to
    establish its starting state.
    """

    kind: AttackKind
    w_max: float
    seed: int
    dos_window: tuple | None = None

    def __post_init__(self):
        if self.w_max < 0.0 or not math.isfinite(self.w_max):
            raise NonPositiveParameter(f"w_max must be finite and >= 0, got {self.w_max}")
        if self.kind is AttackKind.DENIAL_OF_SERVICE:
            if self.dos_window is None:
                raise NonPositiveParameter("denial-of-service attack needs dos_window")
            t_a, t_b = self.dos_window
            if not (1 < t_a <= t_b):
                raise NonPositiveParameter(
                    f"dos_window must satisfy 1 < start <= end, got {self.dos_window}"
                )
        elif self.dos_window is not None:
            raise NonPositiveParameter("dos_window only applies to denial-of-service")

    def in_window(self, t: int) -> bool:
        return (
            self.dos_window is not None
            and self.dos_window[0] <= t <= self.dos_window[1]
        )


@dataclass(frozen=True)
class CostPerturbConfig:
    """Random symmetric wobble of the cost matrices, kept admissible.

    delta scales the perturbation relative to the base matrix norm; mu and
    sigma are the floor/cap the outputs must respect exactly.
    """

    delta: float
    mu: float
    sigma: float
    seed: int

    def __post_init__(self):
        if self.delta < 0.0:
            raise NonPositiveParameter(f"delta must be >= 0, got {self.delta}")
        if self.mu <= 0.0 or self.sigma <= 0.0:
            raise NonPositiveParameter("mu and sigma must be positive")


def _stream(seed: int, tag: int, t: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(tag), int(t)])


def bounded_disturbance(cfg: AttackConfig, t: int, p: int) -> np.ndarray:
    """Uniform-direction, uniform-radius draw from the w_max ball."""
    rng = _stream(cfg.seed, _TAG_DISTURBANCE, t)
    direction = rng.normal(size=int(p))
    radius = rng.uniform(0.0, cfg.w_max)
    scale = float(np.linalg.norm(direction))
    if scale == 0.0 or cfg.w_max == 0.0:
        return np.zeros(int(p))
    return direction * (radius / scale)


def ensure_identity_disturbance_channel(D) -> None:
    """The control-cancellation attack only makes sense when w enters as-is."""
    D = as_matrix(D, "D")
    if D.shape[0] != D.shape[1] or np.abs(D - np.eye(D.shape[0])).max() > 1e-12:
        raise DosRequiresIdentityD(
            "denial-of-service cancellation needs the disturbance channel D = I"
        )


def dos_disturbance(cfg: AttackConfig, t: int, B, u_t, D=None) -> np.ndarray:
    """Cancel the control action inside the window, bounded noise outside."""
    if D is not None:
        ensure_identity_disturbance_channel(D)
    B = as_matrix(B, "B")
    u_t = as_vector(u_t, "u_t")
    if u_t.size != B.shape[1]:
        raise DimensionMismatch(f"u_t has length {u_t.size}, B has {B.shape[1]} columns")
    if cfg.in_window(t):
        return -(B @ u_t)
    return bounded_disturbance(cfg, t, B.shape[0])


def _clip_trace(vals: np.ndarray, sigma: float, mu: float) -> np.ndarray:
    """Lower the largest eigenvalues to a common ceiling until the trace fits."""
    total = float(vals.sum())
    if total <= sigma:
        return vals
    order = np.argsort(vals)[::-1]
    sorted_vals = vals[order]
    n = vals.size
    # find the smallest ceiling c >= mu with sum(min(vals, c)) = sigma
    for k in range(1, n + 1):
        tail = float(sorted_vals[k:].sum())
        c = (sigma - tail) / k
        if c >= mu - 1e-15 and (k == n or c >= sorted_vals[k]):
            clipped = np.minimum(vals, c)
            return clipped
    raise InadmissibleBase(  # pragma: no cover - excluded by the slack check
        f"trace cap {sigma} is incompatible with the floor {mu} at dimension {n}"
    )


def _perturb_one(base, delta, mu, sigma, rng, name):
    base = check_symmetric(as_matrix(base, name), name)
    norm = float(np.linalg.norm(base, 2))
    smallest = float(np.linalg.eigvalsh(base)[0])
    if smallest - delta * norm < mu - 1e-12:
        raise InadmissibleBase(
            f"{name}: smallest eigenvalue {smallest:.6g} leaves no room for a "
            f"perturbation of size {delta * norm:.6g} above the floor {mu:.6g}"
        )
    if float(np.trace(base)) > sigma + 1e-12:
        raise InadmissibleBase(
            f"{name}: trace {float(np.trace(base)):.6g} exceeds the cap {sigma:.6g}"
        )
    n = base.shape[0]
    G = rng.normal(size=(n, n))
    S = 0.5 * (G + G.T)
    s_norm = float(np.linalg.norm(S, 2))
    magnitude = rng.uniform(0.0, delta * norm)
    if delta == 0.0 or s_norm == 0.0:
        out = base.copy()
    else:
        out = base + S * (magnitude / s_norm)
    vals, vecs = np.linalg.eigh(out)
    vals = np.maximum(vals, mu)
    vals = _clip_trace(vals, sigma, mu)
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


def perturbed_costs(cfg: CostPerturbConfig, Q_base, R_base, t: int):
    """Admissible random cost pair around the base costs, deterministic in t."""
    rng_q = _stream(cfg.seed, _TAG_COST_Q, t)
    rng_r = _stream(cfg.seed, _TAG_COST_R, t)
    Q_t = _perturb_one(Q_base, cfg.delta, cfg.mu, cfg.sigma, rng_q, "Q_base")
    R_t = _perturb_one(R_base, cfg.delta, cfg.mu, cfg.sigma, rng_r, "R_base")
    return Q_t, R_t
