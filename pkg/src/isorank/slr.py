"""Soft local ranking: one refinement pass of the comparison graph around an expert.

A pass walks over a grid of dyadic heights.  At each height it selects the
questions on which the experts just above and just below the neighborhood
of ``i`` differ by at least that height, compares ``i`` to its neighborhood
by plain averages over those questions, then builds data-driven weights from
a heteroskedasticity-corrected spectral direction and compares again.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .compgraph import (
    ThresholdedDigraph,
    WeightedGraph,
    apply_update,
    band_levels,
    neighborhood,
    threshold_graph,
)
from .linalg import top_eigpair

log = logging.getLogger(__name__)

_NEVER = np.iinfo(np.int64).max


def height_grid(n: int, d: int) -> np.ndarray:
    """Dyadic heights in ``[1/(nd), 1]``, ascending."""
    kmax = int(np.floor(np.log2(n * d))) if n * d >= 1 else 0
    return 2.0 ** np.arange(-kmax, 1)


def pseudo_top(lambda0: float) -> float:
    """Observation mean of the virtual top expert (its signal is 1)."""
    return float(-np.expm1(-lambda0))


@dataclass
class SLRConfig:
    """Knobs of a pass.

    Attributes:
        heights: dyadic heights to visit; ``None`` means the full grid.
        descending: visit heights from coarse to fine.
        count_virtual: count virtual experts in the band-size test.
        eig_tol: relative tolerance of the power iteration.
        eig_max_iter: iteration cap of the power iteration.
    """

    heights: tuple | None = None
    descending: bool = True
    count_virtual: bool = True
    eig_tol: float = 1e-10
    eig_max_iter: int = 10_000

    def height_list(self, n: int, d: int) -> np.ndarray:
        hs = height_grid(n, d) if self.heights is None else np.asarray(self.heights, dtype=float)
        hs = np.sort(hs)
        return hs[::-1] if self.descending else hs


@dataclass(frozen=True)
class UpdateVector:
    """Nonnegative weights ``w`` on the question subset ``Q``."""

    Q: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=np.int64)
        w = np.asarray(self.w, dtype=float)
        if Q.shape != w.shape:
            raise ValueError("Q and w must have the same length")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "w", w)

    @classmethod
    def indicator(cls, Q) -> "UpdateVector":
        Q = np.asarray(Q, dtype=np.int64)
        return cls(Q, np.ones(Q.size))

    def is_dense_enough(self, lambda0: float) -> bool:
        """``lambda0 * ||w||_2^2 >= ||w||_inf^2`` and ``w != 0``."""
        if self.w.size == 0 or not np.any(self.w > 0):
            return False
        return lambda0 * float(self.w @ self.w) >= float(self.w.max()) ** 2


@dataclass(frozen=True)
class QuestionSelection:
    h: float
    a_hat: np.ndarray
    Q_hat: np.ndarray
    size_above: np.ndarray
    size_below: np.ndarray


class BandProfile:
    """Width statistics of one batch for every question and every band level.

    ``delta[a - 1, k]`` is the mean of column ``k`` over the band above the
    reference set minus the mean over the band below, for ``a = 1 .. n + 2``;
    it is ``nan`` while either band is empty.
    """

    def __init__(self, Y: np.ndarray, G: ThresholdedDigraph, P, lambda0: float):
        n, d = Y.shape
        above, above_top, below, below_bottom = band_levels(G, P)
        A = n + 2
        top_val = pseudo_top(lambda0)
        self.levels = A
        self.n_up, up_sum, self.v_up = _band_cumsums(Y, above, above_top, top_val, A)
        self.n_down, down_sum, self.v_down = _band_cumsums(Y, below, below_bottom, 0.0, A)
        with np.errstate(invalid="ignore", divide="ignore"):
            up_mean = up_sum / (self.n_up + self.v_up)[:, None]
            down_mean = down_sum / (self.n_down + self.v_down)[:, None]
        self.delta = up_mean - down_mean

    def sizes(self, a: np.ndarray, count_virtual: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Band cardinalities at levels ``a`` (clamped to the saturation level)."""
        idx = np.minimum(np.asarray(a), self.levels) - 1
        up = self.n_up[idx].copy()
        down = self.n_down[idx].copy()
        if count_virtual:
            up += self.v_up[idx]
            down += self.v_down[idx]
        return up, down

    def a_hat(self, h: float, lambda0: float) -> np.ndarray:
        """``1 + max{a : delta(a) / (lambda0 ^ 1) < h}`` per question (1 if none).

        Empty bands give no evidence of width and count as narrow.
        """
        with np.errstate(invalid="ignore"):
            wide = self.delta / min(lambda0, 1.0) >= h
        narrow = ~wide
        any_narrow = narrow.any(axis=0)
        last = self.levels - 1 - np.argmax(narrow[::-1], axis=0)
        return np.where(any_narrow, last + 2, 1).astype(np.int64)


def _band_cumsums(Y, level, vlevel, vvalue, A):
    n, d = Y.shape
    finite = level <= A
    lv = np.where(finite, level, 0).astype(np.int64)
    cnt = np.bincount(lv[finite], minlength=A + 1)[: A + 1]
    sums = np.zeros((A + 1, d))
    np.add.at(sums, lv[finite], Y[finite])
    vcnt = np.zeros(A + 1)
    if vlevel <= A:
        vcnt[vlevel] = 1.0
    csum = np.cumsum(sums, axis=0)[1:] + vvalue * np.cumsum(vcnt)[1:, None]
    return np.cumsum(cnt)[1:].astype(float), csum, np.cumsum(vcnt)[1:]


def width_statistic(Y: np.ndarray, G: ThresholdedDigraph, P, k: int, a: int,
                    lambda0: float) -> float:
    """Mean of column ``k`` over the band above ``P`` minus the band below."""
    if a < 1:
        raise ValueError("a must be >= 1")
    prof = BandProfile(Y, G, P, lambda0)
    val = prof.delta[min(a, prof.levels) - 1, k]
    if np.isnan(val):
        raise ValueError(f"band at level {a} is empty")
    return float(val)


def select_level(Y: np.ndarray, G: ThresholdedDigraph, P, k: int, h: float,
                 lambda0: float) -> int:
    return int(BandProfile(Y, G, P, lambda0).a_hat(h, lambda0)[k])


def _selection(prof: BandProfile, h: float, lambda0: float, count_virtual: bool) -> QuestionSelection:
    a_hat = prof.a_hat(h, lambda0)
    up, down = prof.sizes(a_hat, count_virtual)
    keep = np.minimum(up, down) <= 1.0 / (lambda0 * h * h)
    return QuestionSelection(float(h), a_hat, np.flatnonzero(keep), up, down)


def select_questions(Y: np.ndarray, G: ThresholdedDigraph, P, h: float, lambda0: float,
                     count_virtual: bool = True) -> QuestionSelection:
    """Questions whose band at level ``a_hat`` is small on one side."""
    return _selection(BandProfile(Y, G, P, lambda0), h, lambda0, count_virtual)


def update_scale(lambda0: float) -> float:
    return 1.0 / np.sqrt(min(lambda0, 1.0 / lambda0))


def _update_values(Y: np.ndarray, P: np.ndarray, uv: UpdateVector, i: int,
                   lambda0: float) -> tuple[np.ndarray, np.ndarray]:
    norm = np.linalg.norm(uv.w)
    if norm == 0:
        raise ValueError("update vector is zero")
    js = P[P != i]
    sub = Y[:, uv.Q]
    proj = sub[js] @ (uv.w / norm)
    vals = update_scale(lambda0) * (float(sub[i] @ (uv.w / norm)) - proj)
    return js, vals


def updating_weights(Y: np.ndarray, P, w: UpdateVector, i: int, lambda0: float) -> dict[int, float]:
    """Scaled inner products ``<Y_i - Y_j, w / ||w||>`` for ``j`` in ``P``."""
    js, vals = _update_values(Y, np.asarray(P, dtype=np.int64), w, i, lambda0)
    return {int(j): float(v) for j, v in zip(js, vals)}


def spectral_objective(v: np.ndarray, A2: np.ndarray, A3: np.ndarray) -> float:
    D = A2 - A3
    return float(np.sum((v @ A2) ** 2) - 0.5 * np.sum((v @ D) ** 2))


def spectral_direction(A2: np.ndarray, A3: np.ndarray, tol: float = 1e-10,
                       max_iter: int = 10_000) -> tuple[np.ndarray, float]:
    """Maximizer over the unit ball of ``||v'A2||^2 - 0.5 ||v'(A2 - A3)||^2``.

    Returns ``(v, top_eigenvalue)``; ``v`` is zero when the top eigenvalue is
    not positive (up to roundoff relative to the norm of the matrix).
    """
    D = A2 - A3
    S = A2 @ A2.T - 0.5 * (D @ D.T)
    S = 0.5 * (S + S.T)
    mu, v = top_eigpair(S, tol=tol, max_iter=max_iter)
    # eigenvalues at roundoff level of ||S|| count as zero
    scale = float(np.abs(S).sum(axis=1).max()) if S.size else 0.0
    if not mu > 1e-12 * scale:
        return np.zeros(S.shape[0]), mu
    return v / np.linalg.norm(v), mu


def truncate_direction(v: np.ndarray, lambda0: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.where(np.abs(v) <= np.sqrt(lambda0), v, 0.0)


def image_weights(v_minus: np.ndarray, A4: np.ndarray, gamma: float, lambda0: float) -> np.ndarray:
    """``|z|`` thresholded at ``gamma * sqrt(lambda0 ^ 1/lambda0)``, ``z = v_minus' A4``."""
    z = np.abs(v_minus @ A4)
    return np.where(z >= gamma * np.sqrt(min(lambda0, 1.0 / lambda0)), z, 0.0)


def centered(Y: np.ndarray, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    sub = Y[np.ix_(P, Q)]
    return sub - sub.mean(axis=0)


class GraphState:
    """The thresholded graph of ``g`` at ``gamma``, refreshed only when edges move.

    A pass may leave the graph cyclic; ``G`` is then ``None``.
    """

    def __init__(self, g: WeightedGraph, gamma: float):
        self.g = g
        self.gamma = float(gamma)
        self.G: ThresholdedDigraph | None = None
        self.refresh()

    def refresh(self):
        G = threshold_graph(self.g, self.gamma)
        self.G = G if G.acyclic else None

    @property
    def acyclic(self) -> bool:
        return self.G is not None

    def update(self, i: int, js: np.ndarray, vals: np.ndarray) -> float:
        """Apply an update and refresh the graph if an edge appeared or vanished.

        Returns the largest absolute weight actually written.
        """
        old = self.g.W[i, js].copy()
        apply_update(self.g, i, (js, vals))
        new = self.g.W[i, js]
        moved = ((old > self.gamma) != (new > self.gamma)) | ((old < -self.gamma) != (new < -self.gamma))
        if moved.any():
            self.refresh()
        changed = new != old
        return float(np.abs(new[changed]).max()) if changed.any() else 0.0


def slr_pass(window: np.ndarray, g: WeightedGraph, gamma: float, i: int, lambda0: float,
             config: SLRConfig | None = None, state: GraphState | None = None,
             trace: Callable[[dict], None] | None = None) -> WeightedGraph:
    """Refine ``g`` around expert ``i`` with the five batches in ``window``.

    ``g`` is updated in place and returned.  ``state`` lets a caller share the
    thresholded graph across consecutive passes at the same ``gamma``.
    """
    config = config or SLRConfig()
    Y1, Y2, Y3, Y4, Y5 = window
    n, d = Y1.shape
    if state is None:
        state = GraphState(g, gamma)
    elif state.g is not g or state.gamma != gamma:
        raise ValueError("graph state does not match (g, gamma)")
    if not state.acyclic:
        raise ValueError("thresholded graph must be acyclic")
    if n < 2:
        return g

    prof_key = None
    prof = None
    last = None
    for h in config.height_list(n, d):
        G = state.G
        P = neighborhood(G, i)
        if prof_key is not G:
            prof = BandProfile(Y1, G, P, lambda0)
            prof_key = G
        sel = _selection(prof, h, lambda0, config.count_virtual)
        Q = sel.Q_hat
        rec = {"gamma": float(gamma), "i": int(i), "h": float(h), "q_size": int(Q.size),
               "u_avg": 0.0, "u_pca": 0.0}
        if Q.size == 0:
            _emit(trace, rec)
            continue
        # same graph and same questions as the previous height: the step is a no-op
        if last is not None and last[0] is G and np.array_equal(last[1], Q):
            rec["repeat"] = True
            _emit(trace, rec)
            continue
        last = (G, Q)

        uv = UpdateVector.indicator(Q)
        if uv.is_dense_enough(lambda0) and P.size > 1:
            js, vals = _update_values(Y1, P, uv, i, lambda0)
            rec["u_avg"] = state.update(i, js, vals)
            if not state.acyclic:
                rec["abort"] = "cyclic"
                _emit(trace, rec)
                return g
            P = neighborhood(state.G, i)

        if P.size >= 2:
            A2 = centered(Y2, P, Q)
            A3 = centered(Y3, P, Q)
            v, mu = spectral_direction(A2, A3, config.eig_tol, config.eig_max_iter)
            rec["eig"] = float(mu)
            if v.any():
                v_minus = truncate_direction(v, lambda0)
                w_plus = image_weights(v_minus, centered(Y4, P, Q), gamma, lambda0)
                uv = UpdateVector(Q, w_plus)
                if uv.is_dense_enough(lambda0):
                    js, vals = _update_values(Y5, P, uv, i, lambda0)
                    rec["u_pca"] = state.update(i, js, vals)
                    if not state.acyclic:
                        rec["abort"] = "cyclic"
                        _emit(trace, rec)
                        return g
        _emit(trace, rec)
    return g


def _emit(trace, rec):
    if trace is not None:
        trace(rec)
