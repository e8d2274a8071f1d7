import numpy as np
import pytest

from safegain.errors import (
    AsymmetricInput,
    NonPositiveParameter,
    NonSquare,
    NumericalFailure,
    Overflow,
    UnstableF,
)
from safegain.numkernel import (
    Definiteness,
    Tolerance,
    definiteness,
    matrix_exponential,
    operator_norm,
    solve_discrete_lyapunov,
    spectral_radius,
)


def kron_lyapunov(F, V):
    """Independent oracle: vectorized linear solve of F'XF - X = -V."""
    n = F.shape[0]
    lhs = np.kron(F.T, F.T) - np.eye(n * n)
    x = np.linalg.solve(lhs, -V.flatten(order="F"))
    return x.reshape((n, n), order="F")


def random_stable(rng, n, radius=0.9):
    F = rng.normal(size=(n, n))
    return F * (radius / max(abs(np.linalg.eigvals(F))))


def random_spd(rng, n, floor=0.1):
    G = rng.normal(size=(n, n))
    return G @ G.T + floor * np.eye(n)


# --- tolerance --------------------------------------------------------------

def test_tolerance_defaults():
    tol = Tolerance()
    assert tol.absolute == 1e-10
    assert tol.relative == 1e-9
    assert tol.max_iters == 10_000


@pytest.mark.parametrize(
    "kwargs",
    [
        {"absolute": -1e-10},
        {"relative": -1.0},
        {"absolute": 0.0, "relative": 0.0},
        {"max_iters": 0},
    ],
)
def test_tolerance_rejects_bad_values(kwargs):
    with pytest.raises(NonPositiveParameter):
        Tolerance(**kwargs)


# --- spectral radius --------------------------------------------------------

def test_spectral_radius_diagonal():
    assert spectral_radius(np.diag([0.5, -0.9])) == pytest.approx(0.9, abs=1e-12)


def test_spectral_radius_nilpotent():
    J = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert spectral_radius(J) <= 1e-12


def test_spectral_radius_matches_charpoly_oracle():
    rng = np.random.default_rng(20250817)
    M = rng.normal(size=(8, 8))
    # frozen from the characteristic-polynomial root oracle
    assert spectral_radius(M) == pytest.approx(2.843517942994294, abs=1e-8)
    roots = np.roots(np.poly(M))
    assert spectral_radius(M) == pytest.approx(max(abs(roots)), abs=1e-8)


def test_spectral_radius_rejects_rectangular():
    with pytest.raises(NonSquare):
        spectral_radius(np.zeros((2, 3)))


# --- operator norm ----------------------------------------------------------

def test_operator_norm_identity():
    assert operator_norm(np.eye(3)) == pytest.approx(1.0, abs=1e-12)


def test_operator_norm_single_singular_value():
    assert operator_norm(np.array([[0.0, 2.0], [0.0, 0.0]])) == pytest.approx(
        2.0, abs=1e-12
    )


@pytest.mark.parametrize("seed", range(6))
def test_operator_norm_dominates_spectral_radius(seed):
    M = np.random.default_rng(300 + seed).normal(size=(4, 4))
    assert operator_norm(M) >= spectral_radius(M) - 1e-12


def test_operator_norm_rank_one():
    u = np.array([1.0, 2.0, 2.0])
    v = np.array([3.0, 4.0])
    M = np.outer(u, v)
    assert operator_norm(M) == pytest.approx(
        np.linalg.norm(u) * np.linalg.norm(v), rel=1e-12
    )


def test_operator_norm_matches_gram_oracle():
    rng = np.random.default_rng(20250817)
    rng.normal(size=(8, 8))  # keep stream aligned with the oracle script
    M = rng.normal(size=(3, 4))
    assert operator_norm(M) == pytest.approx(2.587010373802628, abs=1e-10)
    gram = np.sqrt(np.linalg.eigvalsh(M.T @ M)[-1])
    assert operator_norm(M) == pytest.approx(gram, abs=1e-10)


def test_operator_norm_rejects_nonfinite():
    with pytest.raises(NumericalFailure):
        operator_norm(np.array([[np.nan, 0.0], [0.0, 1.0]]))


# --- definiteness -----------------------------------------------------------

def test_definiteness_identity():
    assert definiteness(np.eye(3)) is Definiteness.POSITIVE_DEFINITE


def test_definiteness_semidefinite():
    assert definiteness(np.diag([1.0, 0.0])) is Definiteness.POSITIVE_SEMIDEFINITE


def test_definiteness_indefinite():
    assert definiteness(np.diag([1.0, -1.0])) is Definiteness.INDEFINITE


def test_definiteness_rejects_asymmetric():
    with pytest.raises(AsymmetricInput):
        definiteness(np.array([[1.0, 1.0], [0.0, 1.0]]))


# --- discrete Lyapunov ------------------------------------------------------

def test_lyapunov_zero_transition_returns_v():
    X = solve_discrete_lyapunov(np.zeros((2, 2)), np.eye(2))
    assert np.allclose(X, np.eye(2), atol=1e-14)


def test_lyapunov_scalar_closed_form():
    # f = 0.5, v = 1: x = 1 / (1 - 0.25)
    X = solve_discrete_lyapunov(np.array([[0.5]]), np.array([[1.0]]))
    assert X[0, 0] == pytest.approx(1.0 / 0.75, abs=1e-12)


def test_lyapunov_matches_kronecker_oracle():
    F = np.array([[0.2, 0.5, 0.0], [-0.3, 0.1, 0.2], [0.0, 0.4, -0.5]])
    V = np.array([[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 1.0]])
    expected = np.array(
        [
            [2.245236895621844, 0.441548278292537, -0.076151380961859],
            [0.441548278292537, 2.315702368800836, -0.416575387077971],
            [-0.076151380961859, -0.416575387077971, 1.567924229556837],
        ]
    )
    X = solve_discrete_lyapunov(F, V)
    assert np.linalg.norm(X - expected, 2) <= 1e-9
    assert np.linalg.norm(X - kron_lyapunov(F, V), 2) <= 1e-9


@pytest.mark.parametrize("seed", range(8))
def test_lyapunov_residual_and_psd_random(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    F = random_stable(rng, n, radius=float(rng.uniform(0.3, 0.95)))
    V = random_spd(rng, n)
    X = solve_discrete_lyapunov(F, V)
    res = np.linalg.norm(F.T @ X @ F - X + V, 2)
    assert res <= 1e-9 * max(1.0, np.linalg.norm(V, 2))
    assert np.linalg.eigvalsh(X)[0] >= -1e-10
    assert np.linalg.norm(X - kron_lyapunov(F, V), 2) <= 1e-8 * max(
        1.0, np.linalg.norm(X, 2)
    )


@pytest.mark.parametrize("seed", range(6))
def test_lyapunov_monotone_in_v(seed):
    rng = np.random.default_rng(100 + seed)
    F = random_stable(rng, 3, radius=0.8)
    V2 = random_spd(rng, 3)
    V1 = V2 + random_spd(rng, 3, floor=0.0)  # V1 >= V2
    X1 = solve_discrete_lyapunov(F, V1)
    X2 = solve_discrete_lyapunov(F, V2)
    assert np.linalg.eigvalsh(X1 - X2)[0] >= -1e-9


def test_lyapunov_rejects_unstable_transition():
    with pytest.raises(UnstableF):
        solve_discrete_lyapunov(np.eye(2), np.eye(2))


def test_lyapunov_rejects_asymmetric_v():
    with pytest.raises(AsymmetricInput):
        solve_discrete_lyapunov(
            np.zeros((2, 2)), np.array([[1.0, 1.0], [0.0, 1.0]])
        )


# --- matrix exponential -----------------------------------------------------

def test_expm_zero():
    assert np.allclose(matrix_exponential(np.zeros((3, 3))), np.eye(3), atol=1e-15)


def test_expm_diagonal():
    E = matrix_exponential(np.diag([np.log(2.0), 0.0]))
    assert np.allclose(E, np.diag([2.0, 1.0]), rtol=1e-13)


def test_expm_nilpotent_truncates():
    M = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert np.allclose(matrix_exponential(M), np.eye(2) + M, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_expm_split_property(seed):
    rng = np.random.default_rng(200 + seed)
    M = rng.normal(size=(4, 4))
    whole = matrix_exponential(M)
    half = matrix_exponential(M / 2.0)
    assert np.linalg.norm(half @ half - whole, 2) <= 1e-8 * np.linalg.norm(whole, 2)


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_expm_overflow():
    with np.errstate(over="ignore"):
        with pytest.raises(Overflow):
            matrix_exponential(np.diag([1000.0, 1000.0]))
