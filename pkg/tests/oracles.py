"""Independent reference implementations used only by the test suite.

Each oracle deliberately takes a different computational route from the
library code it checks (vectorized linear solves instead of doubling,
quadrature instead of augmented exponentials, value iteration instead of
policy iteration, a dense grid instead of grid+refinement, plain Python
floats instead of ndarray recursions).
"""
import numpy as np
import scipy.integrate


def kron_lyapunov(F, V):
    """Solve F'XF - X = -V by vectorizing with Kronecker products."""
    n = F.shape[0]
    lhs = np.kron(F.T, F.T) - np.eye(n * n)
    x = np.linalg.solve(lhs, -np.asarray(V, dtype=float).flatten(order="F"))
    return x.reshape((n, n), order="F")


def zoh_quadrature(Ac, Bc, Dc, dt, points=10_000):
    """ZOH integrals by trapezoid quadrature of eig-based matrix exponentials."""
    Ac = np.asarray(Ac, dtype=float)
    evals, V = np.linalg.eig(Ac)
    Vinv = np.linalg.inv(V)

    def expm_at(s):
        return (V * np.exp(evals * s)) @ Vinv

    s_grid = np.linspace(0.0, dt, points + 1)
    stack = np.array([expm_at(s) for s in s_grid])
    integral = scipy.integrate.trapezoid(stack, s_grid, axis=0)
    A = expm_at(dt)
    B = integral @ np.asarray(Bc, dtype=float)
    D = integral @ np.asarray(Dc, dtype=float)
    return A.real, B.real, D.real


def hinf_dense_grid(A_cl, C_cl, D, points=1_000_000, chunk=50_000):
    """Peak response gain over a dense uniform frequency grid on [0, pi]."""
    A_cl = np.asarray(A_cl, dtype=float)
    C_cl = np.asarray(C_cl, dtype=float)
    D = np.asarray(D, dtype=float)
    n = A_cl.shape[0]
    omegas = np.linspace(0.0, np.pi, points)
    best = 0.0
    eye = np.eye(n)
    for start in range(0, points, chunk):
        w = omegas[start : start + chunk]
        zetas = np.exp(1j * w)
        lhs = zetas[:, None, None] * eye - A_cl[None, :, :]
        rhs = np.broadcast_to(D.astype(complex), (w.size,) + D.shape)
        X = np.linalg.solve(lhs, rhs)
        sig = np.linalg.svd(C_cl[None, :, :] @ X, compute_uv=False)[:, 0]
        best = max(best, float(sig.max()))
    return best


def dare_value_iteration(A, B, Q, R, tol=1e-13, max_iters=200_000):
    """Standard Riccati recursion P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA.

    Returns (K, P) for the infinite-horizon problem; converges whenever
    (A, B) is stabilizable and Q > 0.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    P = np.asarray(Q, dtype=float).copy()
    for _ in range(max_iters):
        BtP = B.T @ P
        G = np.linalg.solve(R + BtP @ B, BtP @ A)
        Pn = Q + A.T @ P @ A - (BtP @ A).T @ G
        Pn = 0.5 * (Pn + Pn.T)
        if np.linalg.norm(Pn - P, 2) <= tol * max(1.0, np.linalg.norm(Pn, 2)):
            P = Pn
            break
        P = Pn
    BtP = B.T @ P
    K = np.linalg.solve(R + BtP @ B, BtP @ A)
    return K, P


# --- from-scratch scalar reimplementation of the online recursion ----------


def scalar_policy_value(a, b, d, k, qbar, rbar, gamma):
    """Fixed point of the attenuation-modified recursion, in plain floats."""
    acl = a - b * k
    if abs(acl) >= 1.0:
        raise ValueError("closed loop not contractive")
    cost = qbar + rbar * k * k
    p = cost / (1.0 - acl * acl)  # plain series sum as the starting point
    for _ in range(1_000_000):
        denom = gamma * gamma - d * d * p
        if denom <= 0.0:
            raise ValueError("attenuation level infeasible")
        ptil = p + (p * d) * (d * p) / denom
        pn = acl * ptil * acl + cost
        if abs(pn - p) <= 1e-16 * max(1.0, abs(pn)):
            return pn
        p = pn
    return p


def scalar_improve(a, b, d, p, rbar, gamma):
    denom = gamma * gamma - d * d * p
    ptil = p + (p * d) * (d * p) / denom
    return (b * ptil * a) / (rbar + b * ptil * b)


def scalar_online_sequence(a, b, d, k1, gamma, cost_pairs):
    """Replay the online recursion on a scalar plant with given (q_t, r_t).

    Returns lists (p_list, k_list) where p_list[t-1] is the value solved at
    step t and k_list[t] is the gain committed for step t+1 (k_list[0] = k1).
    """
    qbar, rbar = cost_pairs[0]
    p = scalar_policy_value(a, b, d, k1, qbar, rbar, gamma)
    p_list = [p]
    k_list = [k1, scalar_improve(a, b, d, p, rbar, gamma)]
    for idx in range(1, len(cost_pairs)):
        t = idx + 1
        q_t, r_t = cost_pairs[idx]
        qbar = ((t - 1) / t) * qbar + q_t / t
        rbar = ((t - 1) / t) * rbar + r_t / t
        k_t = k_list[-1]
        p = scalar_policy_value(a, b, d, k_t, qbar, rbar, gamma)
        p_list.append(p)
        k_list.append(scalar_improve(a, b, d, p, rbar, gamma))
    return p_list, k_list
