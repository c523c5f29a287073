"""Independent reference implementations used as test oracles.

These deliberately avoid the library's own code paths: naive loops, direct
eigendecompositions, dense grids.
"""
import numpy as np


def naive_matmul(A, B):
    """Triple-loop matrix product."""
    n, k = A.shape
    k2, m = B.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += A[i, t] * B[t, j]
            out[i, j] = acc
    return out


def naive_affine_eval(constant, terms, assignment):
    """Elementwise re-evaluation of an affine matrix expression; terms are
    (left, var_id, right, transpose, symmetrize) tuples."""
    out = np.array(constant, dtype=float, copy=True)
    for left, var, right, transpose, symmetrize in terms:
        V = np.atleast_2d(assignment[var])
        if transpose:
            V = V.T
        X = naive_matmul(naive_matmul(left, V), right)
        out = out + X + X.T if symmetrize else out + X
    return out


def obs_decomposition_detectable(A, C, rank_tol=1e-7):
    """Observability-decomposition oracle: compute the kernel of the
    observability matrix; the pair is detectable iff the restriction of A
    to that (A-invariant) subspace is Hurwitz."""
    A = np.atleast_2d(np.asarray(A, float))
    C = np.atleast_2d(np.asarray(C, float))
    n = A.shape[0]
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    O = np.vstack(blocks)
    U, s, Vt = np.linalg.svd(O)
    scale = max(s[0], 1.0) if s.size else 1.0
    rank = int(np.sum(s > rank_tol * scale))
    if rank == n:
        return True
    V = Vt[rank:].T  # orthonormal basis of the unobservable subspace
    A_res = V.T @ A @ V
    return bool(np.linalg.eigvals(A_res).real.max() < 0)


def random_detectability_instance(rng, n):
    """Structured random (A, C) with a clear-margin detectability status:
    either fully random (almost surely observable) or with a planted
    unobservable block whose eigenvalues sit well off the imaginary axis.
    Returns (A, C, expected_detectable)."""
    ny = int(rng.integers(1, n + 1))
    if rng.random() < 0.5:
        A = rng.standard_normal((n, n))
        # keep eigenvalues off the axis so threshold tests are unambiguous
        if np.abs(np.linalg.eigvals(A).real).min() < 0.05:
            A += 0.3 * np.eye(n)
        C = rng.standard_normal((ny, n))
        return A, C, True
    k = int(rng.integers(1, n))  # unobservable block size
    stable = rng.random() < 0.5
    lam = rng.uniform(0.5, 2.0, k) * (-1.0 if stable else 1.0)
    A_obs = rng.standard_normal((n - k, n - k))
    if n - k > 0 and np.abs(np.linalg.eigvals(A_obs).real).min() < 0.05:
        A_obs += 0.3 * np.eye(n - k)
    A_blk = np.zeros((n, n))
    A_blk[:n - k, :n - k] = A_obs
    A_blk[n - k:, :n - k] = rng.standard_normal((k, n - k))
    A_blk[n - k:, n - k:] = np.diag(lam + rng.uniform(-0.1, 0.1, k))
    C_blk = np.hstack([rng.standard_normal((ny, n - k)), np.zeros((ny, k))])
    # well-conditioned similarity keeps the planted structure numerically crisp
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    A = Q @ A_blk @ Q.T
    C = C_blk @ Q.T
    return A, C, stable


def rk4_plant_only(field, x0, horizon, dt):
    """Plain RK4 on x' = field(x); returns the state history."""
    nsteps = int(round(horizon / dt))
    xs = [np.asarray(x0, float)]
    x = xs[0]
    for _ in range(nsteps):
        k1 = field(x)
        k2 = field(x + 0.5 * dt * k1)
        k3 = field(x + 0.5 * dt * k2)
        k4 = field(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        xs.append(x)
    return np.array(xs)
