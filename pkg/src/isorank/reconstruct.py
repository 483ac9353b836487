"""Isotonic and bi-isotonic least squares, and the two reconstruction routes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .isr import ISRConfig, practical_preset, run_isr
from .sampling import ObservationStream, split_stream, subsample_batches


def pava(y, weights=None) -> np.ndarray:
    """Weighted least-squares nondecreasing fit by pooling adjacent violators."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("pava needs a non-empty 1-d input")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != y.shape:
        raise ValueError("weights must match y")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    # stack of blocks: (mean, weight, length)
    means = np.empty(y.size)
    wts = np.empty(y.size)
    lens = np.empty(y.size, dtype=np.int64)
    top = -1
    for k in range(y.size):
        top += 1
        means[top], wts[top], lens[top] = y[k], w[k], 1
        while top > 0 and means[top - 1] > means[top]:
            wsum = wts[top - 1] + wts[top]
            means[top - 1] = (wts[top - 1] * means[top - 1] + wts[top] * means[top]) / wsum
            wts[top - 1] = wsum
            lens[top - 1] += lens[top]
            top -= 1
    return np.repeat(means[: top + 1], lens[: top + 1])


@dataclass
class IsotonicFit:
    M_hat: np.ndarray
    objective: float
    converged: bool = True
    iterations: int = 0
    history: list = field(default_factory=list)
    bound_history: list = field(default_factory=list)


def _columns_monotone(Y: np.ndarray) -> np.ndarray:
    return np.column_stack([pava(Y[:, k]) for k in range(Y.shape[1])]) if Y.shape[1] else Y.copy()


def project_isotonic(Y, box=(0.0, 1.0)) -> IsotonicFit:
    """Nondecreasing columns within ``box``: column PAVA followed by clipping."""
    Y = np.asarray(Y, dtype=float)
    X = _columns_monotone(Y)
    if box is not None:
        X = np.clip(X, box[0], box[1])
    return IsotonicFit(X, float(np.sum((X - Y) ** 2)))


def _rows_monotone(Y: np.ndarray) -> np.ndarray:
    return _columns_monotone(Y.T).T


def _support_columns(q: np.ndarray, box) -> float:
    """Support function of {column-monotone X within box} at ``q``.

    Nondecreasing columns in ``[lo, hi]`` are mixtures of ``lo + (hi - lo) 1{i >= t}``,
    so the supremum is attained at the best suffix of every column.
    """
    if box is None:
        return 0.0
    lo, hi = box
    suffix = np.cumsum(q[::-1], axis=0)
    best = np.maximum(suffix.max(axis=0), 0.0)
    return float(lo * q.sum() + (hi - lo) * best.sum())


def project_biisotonic(Y, tol: float = 1e-9, max_iter: int = 10_000,
                       box=(0.0, 1.0)) -> IsotonicFit:
    """Projection onto matrices nondecreasing along rows and columns, within ``box``.

    Dykstra's alternating projections between the row-monotone cone and the
    column-monotone set intersected with the box.  Stops when successive
    iterates move by less than ``tol`` in Frobenius norm and the two partial
    projections agree to ``tol``.

    ``history`` holds ``||x - Y||^2`` per iteration; it need not be monotone
    because intermediate iterates are not feasible for both sets.
    ``bound_history`` holds twice the dual value of the increments, a lower
    bound on the optimal objective that never decreases.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    Y = np.asarray(Y, dtype=float)
    x = Y.copy()
    p = np.zeros_like(Y)
    q = np.zeros_like(Y)
    history, bounds = [], []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        y = _rows_monotone(x + p)
        p = x + p - y
        x_new = project_isotonic(y + q, box).M_hat
        q = y + q - x_new
        move = np.linalg.norm(x_new - x)
        gap = np.linalg.norm(x_new - y)
        x = x_new
        history.append(float(np.sum((x - Y) ** 2)))
        # p lies in the polar of the row cone, so only the box term remains
        u = p + q
        bounds.append(float(2 * np.sum(Y * u) - np.sum(u * u) - 2 * _support_columns(q, box)))
        if move < tol and gap < tol:
            converged = True
            break
    return IsotonicFit(x, float(np.sum((x - Y) ** 2)), converged, it, history, bounds)


def is_biisotonic(X: np.ndarray, atol: float = 1e-9) -> bool:
    return bool(np.all(np.diff(X, axis=0) >= -atol) and np.all(np.diff(X, axis=1) >= -atol))


@dataclass
class ReconConfig:
    """Settings of the reconstruction routes.

    Attributes:
        isr: ISR config per split, or a callable ``(n, d, lam) -> ISRConfig``
            evaluated on each split; ``None`` picks the practical preset.
        y_scale: ``split`` divides sums by the effort of the projection split
            (unbiased); ``lambda`` divides by the full effort.
        seed: seed for splitting and batching.
    """

    isr: ISRConfig | Callable | None = None
    y_scale: str = "split"
    seed: int = 0
    tol: float = 1e-9
    max_iter: int = 10_000


def _scaled_sums(stream: ObservationStream, full_lam: float, mode: str) -> np.ndarray:
    if mode == "split":
        return stream.scaled_sums(1.0 / stream.lam)
    if mode == "lambda":
        return stream.scaled_sums(1.0 / full_lam)
    raise ValueError("y_scale must be 'split' or 'lambda'")


def fit_given_order(Y: np.ndarray, pi_hat: np.ndarray) -> IsotonicFit:
    """Project ``Y`` sorted by ``pi_hat`` and map the fit back to expert order."""
    order = np.argsort(pi_hat, kind="stable")
    fit = project_isotonic(Y[order])
    out = np.empty_like(fit.M_hat)
    out[order] = fit.M_hat
    return IsotonicFit(out, fit.objective)


def fit_given_orders(Y: np.ndarray, pi_hat: np.ndarray, eta_hat: np.ndarray, tol: float = 1e-9,
                     max_iter: int = 10_000) -> IsotonicFit:
    ro = np.argsort(pi_hat, kind="stable")
    co = np.argsort(eta_hat, kind="stable")
    fit = project_biisotonic(Y[np.ix_(ro, co)], tol=tol, max_iter=max_iter)
    out = np.empty_like(fit.M_hat)
    out[np.ix_(ro, co)] = fit.M_hat
    return IsotonicFit(out, fit.objective, fit.converged, fit.iterations, fit.history,
                       fit.bound_history)


def _isr_perm(stream: ObservationStream, cfg, seed: int) -> np.ndarray:
    if cfg is None:
        cfg = practical_preset(stream.n, stream.d, stream.lam)
    elif callable(cfg):
        cfg = cfg(stream.n, stream.d, stream.lam)
    return run_isr(subsample_batches(stream, cfg.T, seed), cfg).pi_hat


def reconstruct_iso(stream: ObservationStream, config: ReconConfig | None = None):
    """ISR on one half of the data, isotonic projection of the other half.

    Returns ``(fit, pi_hat)``; ``fit.M_hat`` is in the original expert order.
    """
    config = config or ReconConfig()
    s1, s2 = split_stream(stream, 2, config.seed)
    pi_hat = _isr_perm(s1, config.isr, config.seed)
    Y2 = _scaled_sums(s2, stream.lam, config.y_scale)
    return fit_given_order(Y2, pi_hat), pi_hat


def reconstruct_biso(stream: ObservationStream, config: ReconConfig | None = None,
                     row_split: int = 0, col_split: int = 1):
    """Rows from one third, columns from another, bi-isotonic fit on the last.

    Returns ``(fit, (pi_hat, eta_hat))``.
    """
    config = config or ReconConfig()
    if {row_split, col_split} | {3 - row_split - col_split} != {0, 1, 2}:
        raise ValueError("row_split and col_split must be distinct in {0, 1, 2}")
    parts = split_stream(stream, 3, config.seed)
    fit_split = 3 - row_split - col_split
    pi_hat = _isr_perm(parts[row_split], config.isr, config.seed)
    eta_hat = _isr_perm(parts[col_split].transpose(), config.isr, config.seed)
    Y3 = _scaled_sums(parts[fit_split], stream.lam, config.y_scale)
    fit = fit_given_orders(Y3, pi_hat, eta_hat, config.tol, config.max_iter)
    return fit, (pi_hat, eta_hat)
