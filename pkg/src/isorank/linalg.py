"""Small dense linear-algebra helpers: leading eigenpairs and operator norms."""

from __future__ import annotations

import logging

import numpy as np

from .sampling import make_rng

log = logging.getLogger(__name__)

DENSE_CUTOFF = 64


class ConvergenceError(RuntimeError):
    pass


def power_iteration(S: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000,
                    shift: float | None = None, seed: int = 0) -> tuple[float, np.ndarray]:
    """Largest algebraic eigenpair of a symmetric matrix.

    The matrix is shifted by a Gershgorin bound so that ``S + shift I`` is
    positive semidefinite; its dominant eigenvector is then the eigenvector of
    the largest algebraic eigenvalue of ``S``.  Raises ``ConvergenceError``
    when the Rayleigh quotient has not settled after ``max_iter`` steps.
    """
    p = S.shape[0]
    if shift is None:
        shift = float(np.abs(S).sum(axis=1).max()) if p else 0.0
    rng = make_rng(seed, 0xE1)
    v = rng.standard_normal(p)
    v /= np.linalg.norm(v)
    mu_old = np.inf
    for _ in range(max_iter):
        x = S @ v + shift * v
        nx = np.linalg.norm(x)
        if nx == 0:
            return -shift, v
        v = x / nx
        mu = float(v @ S @ v)
        scale = max(abs(mu), shift, 1e-300)
        if abs(mu - mu_old) <= tol * scale:
            return mu, v
        mu_old = mu
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def top_eigpair(S: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000,
                dense_cutoff: int = DENSE_CUTOFF) -> tuple[float, np.ndarray]:
    """Largest algebraic eigenpair; dense ``eigh`` for small matrices."""
    S = np.asarray(S, dtype=float)
    if S.shape[0] <= dense_cutoff:
        vals, vecs = np.linalg.eigh(S)
        return float(vals[-1]), vecs[:, -1]
    try:
        return power_iteration(S, tol=tol, max_iter=max_iter)
    except ConvergenceError:
        log.debug("power iteration stalled on %d x %d matrix; using eigh", *S.shape)
        vals, vecs = np.linalg.eigh(S)
        return float(vals[-1]), vecs[:, -1]


def sym_opnorm(S: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Operator norm of a symmetric matrix (largest |eigenvalue|)."""
    S = np.asarray(S, dtype=float)
    if S.shape[0] <= DENSE_CUTOFF:
        return float(np.abs(np.linalg.eigvalsh(S)).max())
    try:
        hi, _ = power_iteration(S, tol=tol, max_iter=max_iter)
        lo, _ = power_iteration(-S, tol=tol, max_iter=max_iter)
        return max(abs(hi), abs(lo))
    except ConvergenceError:
        return float(np.abs(np.linalg.eigvalsh(S)).max())
