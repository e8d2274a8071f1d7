import math

import numpy as np
import pytest

from oracles import hinf_dense_grid, zoh_quadrature
from safegain.errors import (
    AssumptionViolation,
    DimensionMismatch,
    NonPositiveDt,
    StateOverflow,
    UnstableClosedLoop,
)
from safegain.sysmodel import (
    LtiSystem,
    closed_loop,
    hinf_norm,
    is_valid_controller,
    simulate,
    zoh_discretize,
)


def scalar_system(a=0.5, b=1.0, c=1.0, e=0.0, d=1.0):
    return LtiSystem(
        A=[[a]], B=[[b]], D=[[d]], C=np.array([[c], [0.0]]), E=np.array([[0.0], [e]])
    )


def separated_system(rng, n, m, p=None, c_scale=1.0, e_scale=1.0, a_scale=0.6):
    """Random plant with block-structured C, E so the cross term vanishes."""
    p = n if p is None else p
    A = a_scale * rng.normal(size=(n, n)) / math.sqrt(n)
    B = rng.normal(size=(n, m))
    D = rng.normal(size=(n, p))
    C = np.vstack([c_scale * np.eye(n), np.zeros((m, n))])
    E = np.vstack([np.zeros((n, m)), e_scale * np.eye(m)])
    return LtiSystem(A=A, B=B, D=D, C=C, E=E)


# --- LtiSystem construction --------------------------------------------------

def test_system_derives_quadratic_weights():
    sys = separated_system(np.random.default_rng(0), 3, 2, c_scale=1.5, e_scale=0.5)
    assert np.allclose(sys.Q, 2.25 * np.eye(3), atol=1e-14)
    assert np.allclose(sys.R, 0.25 * np.eye(2), atol=1e-14)


def test_system_rejects_cost_coupling():
    with pytest.raises(AssumptionViolation):
        LtiSystem(A=[[0.5]], B=[[1.0]], D=[[1.0]], C=[[1.0]], E=[[1.0]])


def test_system_rejects_bad_dimensions():
    with pytest.raises(DimensionMismatch):
        LtiSystem(
            A=np.eye(2),
            B=np.ones((3, 1)),
            D=np.eye(2),
            C=np.eye(2),
            E=np.zeros((2, 1)),
        )


# --- ZOH discretization -------------------------------------------------------

def test_zoh_constant_integrand():
    A, B, D = zoh_discretize(np.zeros((2, 2)), np.eye(2), np.zeros((2, 1)), 0.1)
    assert np.allclose(A, np.eye(2), atol=1e-14)
    assert np.allclose(B, 0.1 * np.eye(2), atol=1e-14)


def test_zoh_scalar_analytic():
    A, B, _ = zoh_discretize([[-1.0]], [[1.0]], [[0.0]], 1.0)
    assert A[0, 0] == pytest.approx(math.exp(-1.0), abs=1e-12)
    assert B[0, 0] == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)


def test_zoh_matches_quadrature_oracle():
    Ac = np.array([[0.0, 1.0], [-2.0, -0.1]])
    Bc = np.array([[0.0], [1.0]])
    Dc = np.array([[1.0, 0.0], [0.5, 1.0]])
    A, B, D = zoh_discretize(Ac, Bc, Dc, 0.1)
    Ao, Bo, Do = zoh_quadrature(Ac, Bc, Dc, 0.1)
    assert np.abs(A - Ao).max() <= 1e-6
    assert np.abs(B - Bo).max() <= 1e-6
    assert np.abs(D - Do).max() <= 1e-6


@pytest.mark.parametrize("seed", range(4))
def test_zoh_composition(seed):
    rng = np.random.default_rng(400 + seed)
    Ac = rng.normal(size=(3, 3))
    Bc = rng.normal(size=(3, 2))
    Dc = rng.normal(size=(3, 1))
    dt = 0.3
    A, B, D = zoh_discretize(Ac, Bc, Dc, dt)
    Ah, Bh, Dh = zoh_discretize(Ac, Bc, Dc, dt / 2.0)
    assert np.linalg.norm(Ah @ Ah - A, 2) <= 1e-9 * max(1.0, np.linalg.norm(A, 2))
    assert np.linalg.norm(Ah @ Bh + Bh - B, 2) <= 1e-9 * max(1.0, np.linalg.norm(B, 2))
    assert np.linalg.norm(Ah @ Dh + Dh - D, 2) <= 1e-9 * max(1.0, np.linalg.norm(D, 2))


def test_zoh_rejects_nonpositive_dt():
    with pytest.raises(NonPositiveDt):
        zoh_discretize(np.zeros((1, 1)), np.eye(1), np.eye(1), 0.0)


# --- closed loop --------------------------------------------------------------

def test_closed_loop_zero_gain():
    sys = separated_system(np.random.default_rng(1), 3, 2)
    A_cl, C_cl = closed_loop(sys, np.zeros((2, 3)))
    assert np.array_equal(A_cl, sys.A)
    assert np.array_equal(C_cl, sys.C)


def test_closed_loop_scalar_cancellation():
    sys = scalar_system(a=0.5, b=1.0)
    A_cl, _ = closed_loop(sys, [[0.5]])
    assert A_cl[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_closed_loop_direct_arithmetic():
    rng = np.random.default_rng(2)
    sys = separated_system(rng, 4, 2)
    K = rng.normal(size=(2, 4))
    A_cl, C_cl = closed_loop(sys, K)
    assert np.allclose(A_cl, sys.A - sys.B @ K, atol=0.0)
    assert np.allclose(C_cl, sys.C - sys.E @ K, atol=0.0)


# --- peak gain ------------------------------------------------------------------

def test_hinf_all_pass_magnitude():
    assert hinf_norm([[0.0]], [[1.0]], [[1.0]]) == pytest.approx(1.0, abs=1e-9)


def test_hinf_analytic_peak_at_dc():
    assert hinf_norm([[0.5]], [[1.0]], [[1.0]]) == pytest.approx(2.0, abs=1e-9)


def test_hinf_matches_dense_grid_oracle():
    A_cl = np.array([[0.6, 0.3], [-0.2, 0.5]])
    C_cl = np.array([[1.0, 0.2], [0.0, 0.8]])
    D = np.array([[1.0, 0.0], [0.3, 1.0]])
    mine = hinf_norm(A_cl, C_cl, D)
    dense = hinf_dense_grid(A_cl, C_cl, D, points=1_000_000)
    assert mine == pytest.approx(dense, abs=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_hinf_similarity_invariance(seed):
    rng = np.random.default_rng(500 + seed)
    A_cl = 0.5 * rng.normal(size=(3, 3)) / math.sqrt(3)
    C_cl = rng.normal(size=(2, 3))
    D = rng.normal(size=(3, 2))
    H = np.eye(3) + 0.3 * rng.normal(size=(3, 3))
    Hinv = np.linalg.inv(H)
    base = hinf_norm(A_cl, C_cl, D)
    transformed = hinf_norm(H @ A_cl @ Hinv, C_cl @ Hinv, H @ D)
    assert transformed == pytest.approx(base, rel=1e-6, abs=1e-9)


def test_hinf_rejects_unstable_loop():
    with pytest.raises(UnstableClosedLoop):
        hinf_norm([[1.0]], [[1.0]], [[1.0]])


# --- validity membership ---------------------------------------------------------

def test_validity_nilpotent_loop():
    report = is_valid_controller(scalar_system(), [[0.5]], 3.0)
    assert report.valid
    assert report.spectral_radius == pytest.approx(0.0, abs=1e-12)
    assert report.hinf == pytest.approx(1.0, abs=1e-9)


def test_validity_unstable_gain():
    report = is_valid_controller(scalar_system(), [[-1.0]], 3.0)
    assert not report.valid
    assert report.spectral_radius == pytest.approx(1.5, abs=1e-12)
    assert math.isinf(report.hinf)


def test_validity_tight_gamma():
    report = is_valid_controller(scalar_system(), [[0.5]], 0.5)
    assert not report.valid
    assert report.hinf == pytest.approx(1.0, abs=1e-9)


def test_validity_monotone_in_gamma():
    sys = separated_system(np.random.default_rng(3), 3, 2)
    K = np.zeros((2, 3))
    report = is_valid_controller(sys, K, 1.0)
    for gamma in (report.hinf * 1.05, report.hinf * 2.0, report.hinf * 10.0):
        assert is_valid_controller(sys, K, gamma).valid


# --- simulation -------------------------------------------------------------------

def test_simulate_zero_everything():
    sys = separated_system(np.random.default_rng(4), 3, 2)
    K = np.zeros((2, 3))
    traj = simulate(sys, [K] * 5, [np.zeros(3)] * 5, np.zeros(3))
    assert np.all(traj.x == 0.0)
    assert np.all(traj.u == 0.0)
    assert np.all(traj.z == 0.0)


def test_simulate_scalar_hand_recursion():
    sys = scalar_system(a=0.5, b=1.0, d=1.0)
    K = np.array([[0.5]])
    traj = simulate(sys, [K, K], [[1.0], [0.0]], [1.0])
    assert traj.x[1, 0] == pytest.approx(1.0, abs=1e-15)
    assert traj.x[2, 0] == pytest.approx(0.0, abs=1e-15)


def test_simulate_deterministic_repeat():
    rng = np.random.default_rng(5)
    sys = separated_system(rng, 3, 2)
    gains = [rng.normal(size=(2, 3)) * 0.1 for _ in range(20)]
    w = [rng.normal(size=3) for _ in range(20)]
    t1 = simulate(sys, gains, w, np.zeros(3))
    t2 = simulate(sys, gains, w, np.zeros(3))
    assert np.array_equal(t1.x, t2.x)
    assert np.array_equal(t1.u, t2.u)


def test_simulate_transition_residual():
    rng = np.random.default_rng(6)
    sys = separated_system(rng, 3, 2)
    gains = [0.1 * rng.normal(size=(2, 3)) for _ in range(30)]
    w = [rng.normal(size=3) for _ in range(30)]
    traj = simulate(sys, gains, w, rng.normal(size=3))
    assert traj.transition_residual(sys) <= 1e-9


def test_simulate_state_overflow():
    sys = scalar_system(a=3.0)
    K = np.array([[0.0]])
    with pytest.raises(StateOverflow):
        simulate(sys, [K] * 60, [[0.0]] * 60, [1.0])


def test_simulate_length_mismatch():
    sys = scalar_system()
    with pytest.raises(DimensionMismatch):
        simulate(sys, [np.array([[0.5]])] * 3, [[0.0]] * 2, [0.0])
