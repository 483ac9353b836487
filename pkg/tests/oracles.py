"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools

import numpy as np


# graphs ---------------------------------------------------------------------

def all_digraphs(n: int) -> np.ndarray:
    """Every labeled digraph without self loops on ``n`` vertices, shape (2^(n(n-1)), n, n)."""
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    m = len(pairs)
    codes = np.arange(2 ** m, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(m)) & 1).astype(bool)
    A = np.zeros((2 ** m, n, n), dtype=bool)
    for b, (i, j) in enumerate(pairs):
        A[:, i, j] = bits[:, b]
    return A


def batch_has_cycle(A: np.ndarray) -> np.ndarray:
    """A closed walk of length <= n exists iff a directed cycle exists."""
    n = A.shape[-1]
    X = A.astype(np.int64)
    P = X.copy()
    cyc = np.zeros(A.shape[0], dtype=bool)
    for _ in range(n):
        cyc |= np.trace(P, axis1=1, axis2=2) > 0
        P = np.minimum(P @ X, 1)
    return cyc


def batch_longest(A: np.ndarray) -> np.ndarray:
    """Longest path lengths of a batch of DAGs via walk counting: in a DAG every
    walk is a path, so ``R[u, v]`` is the largest ``L`` with ``(A^L)[u, v] > 0``."""
    n = A.shape[-1]
    X = A.astype(np.int64)
    P = X.copy()
    R = np.zeros(A.shape, dtype=np.int64)
    for L in range(1, n):
        R = np.where(P > 0, L, R)
        P = np.minimum(P @ X, 1)
    return R


def simple_paths(adj: np.ndarray, u: int):
    """Yield every simple path starting at ``u`` as a vertex list."""
    n = adj.shape[0]
    stack = [[u]]
    while stack:
        path = stack.pop()
        yield path
        for v in range(n):
            if adj[path[-1], v] and v not in path:
                stack.append(path + [v])


def has_cycle_dfs(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    for u in range(n):
        for path in simple_paths(adj, u):
            if adj[path[-1], u]:
                return True
    return False


def has_cycle_orderings(adj: np.ndarray) -> bool:
    """Acyclic iff some vertex ordering puts every edge forward."""
    n = adj.shape[0]
    ii, jj = np.nonzero(adj)
    for perm in itertools.permutations(range(n)):
        pos = np.empty(n, dtype=np.int64)
        pos[list(perm)] = np.arange(n)
        if np.all(pos[ii] < pos[jj]):
            return False
    return True


def extended_adj(adj: np.ndarray) -> np.ndarray:
    """Adjacency on ``n + 2`` vertices: real experts, then BOTTOM, then TOP."""
    n = adj.shape[0]
    E = np.zeros((n + 2, n + 2), dtype=bool)
    E[:n, :n] = adj
    E[:n, n] = True       # every expert above BOTTOM
    E[n + 1, :n] = True   # TOP above every expert
    E[n + 1, n] = True
    return E


def longest_paths_enum(adj: np.ndarray) -> np.ndarray:
    """All-pairs longest simple path lengths by enumeration (0 when no path)."""
    n = adj.shape[0]
    R = np.zeros((n, n), dtype=np.int64)
    for u in range(n):
        for path in simple_paths(adj, u):
            v = path[-1]
            R[u, v] = max(R[u, v], len(path) - 1)
    return R


def rank_oracle(adj: np.ndarray, i: int) -> np.ndarray:
    """rk(j) from enumeration on the extended graph, reported on real vertices."""
    n = adj.shape[0]
    R = longest_paths_enum(extended_adj(adj))[:n, :n]
    return R[i] - R[:, i]


def banded_oracle(adj: np.ndarray, P, a: int):
    """Definition-level evaluation of the above and below bands.

    The above band holds vertices ``j`` (real, or TOP) with
    ``rk_{i'}(j) in [-a, -1]`` for every ``i'`` in ``P``, the below band those
    with ``rk_{i'}(j) in [1, a]``.  Labels: TOP is ``n``, BOTTOM is ``-1``.
    """
    n = adj.shape[0]
    R = longest_paths_enum(extended_adj(adj))
    bottom, top = n, n + 1
    label = {v: v for v in range(n)}
    label[bottom], label[top] = -1, n
    up, down = [], []
    for j in range(n + 2):
        rks = [R[i, j] - R[j, i] for i in P]
        if all(-a <= r <= -1 for r in rks):
            up.append(label[j])
        if all(1 <= r <= a for r in rks):
            down.append(label[j])
    return sorted(up), sorted(down)


def mirsky_oracle_levels(adj: np.ndarray) -> np.ndarray:
    """Longest path from each real vertex to BOTTOM by enumeration."""
    n = adj.shape[0]
    R = longest_paths_enum(extended_adj(adj))
    return R[:n, n]


def random_digraph(rng, n: int, p: float) -> np.ndarray:
    A = rng.random((n, n)) < p
    np.fill_diagonal(A, False)
    return A


def random_dag(rng, n: int, p: float) -> np.ndarray:
    A = np.triu(rng.random((n, n)) < p, 1)
    perm = rng.permutation(n)
    return A[np.ix_(perm, perm)]


# isotonic regression --------------------------------------------------------

def isotonic_pg(y, w=None, lo=-np.inf, hi=np.inf, iters: int = 200_000, tol: float = 1e-13):
    """Weighted isotonic least squares by accelerated projected gradient (FISTA).

    Works on the increments ``x = cumsum(s)`` with ``s[1:] >= 0``, so the
    projection is a plain clip at zero.  An optional box is applied to the
    monotone solution afterwards.
    """
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    m = y.size
    L = np.tril(np.ones((m, m)))             # x = L s
    H = L.T @ (w[:, None] * L)               # Hessian of 0.5 * sum w (Ls - y)^2
    g0 = L.T @ (w * y)
    step = 1.0 / np.linalg.eigvalsh(H)[-1]
    s = np.zeros(m)
    s[0] = y.min()
    z, t = s.copy(), 1.0
    for _ in range(iters):
        s_new = z - step * (H @ z - g0)
        s_new[1:] = np.maximum(s_new[1:], 0.0)
        # adaptive restart when momentum points uphill
        if (z - s_new) @ (s_new - s) > 0:
            t = 1.0
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = s_new + (t - 1) / t_new * (s_new - s)
        done = np.max(np.abs(s_new - s)) < tol
        s, t = s_new, t_new
        if done:
            break
    return np.clip(L @ s, lo, hi)


def isotonic_nnls(y, w=None):
    """Same problem through scipy's NNLS on the increment parametrization."""
    from scipy.optimize import nnls

    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    m = y.size
    L = np.tril(np.ones((m, m)))
    # free intercept: split into positive and negative parts
    A = np.hstack([L, -L[:, :1]]) * np.sqrt(w)[:, None]
    coef, _ = nnls(A, y * np.sqrt(w), maxiter=50 * m)
    return L @ coef[:m] - coef[m]


def isotonic_exhaustive_int(y, lo: int, hi: int):
    """Best nondecreasing integer vector with entries in [lo, hi] (squared loss)."""
    y = np.asarray(y, dtype=float)
    best, best_val = None, np.inf
    for cand in itertools.combinations_with_replacement(range(lo, hi + 1), y.size):
        v = float(np.sum((np.array(cand) - y) ** 2))
        if v < best_val:
            best, best_val = np.array(cand, dtype=float), v
    return best, best_val


def biisotonic_cvx(Y, box=(0.0, 1.0)):
    """Exact projection onto row- and column-monotone matrices in a box (cvxpy)."""
    import cvxpy as cp

    Y = np.asarray(Y, dtype=float)
    X = cp.Variable(Y.shape)
    cons = [X[1:, :] >= X[:-1, :], X[:, 1:] >= X[:, :-1]]
    if box is not None:
        cons += [X >= box[0], X <= box[1]]
    prob = cp.Problem(cp.Minimize(cp.sum_squares(X - Y)), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return X.value, float(prob.value)


def isotonic_box_cvx(Y, box=(0.0, 1.0)):
    """Column-wise monotone projection with a box, solved jointly as one QP."""
    import cvxpy as cp

    Y = np.asarray(Y, dtype=float)
    X = cp.Variable(Y.shape)
    cons = [X[1:, :] >= X[:-1, :], X >= box[0], X <= box[1]]
    cp.Problem(cp.Minimize(cp.sum_squares(X - Y)), cons).solve(
        solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return X.value
