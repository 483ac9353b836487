"""Weighted comparison graph, thresholded DAGs, ranks and Mirsky ordering.

An edge ``(i, j)`` means expert ``i`` is judged above expert ``j``.  Besides
the real experts ``0 .. n-1`` two virtual experts are materialized:
``BOTTOM`` (label ``-1``), below everybody, and ``TOP`` (label ``n``), above
everybody.  Every real expert has an edge to ``BOTTOM`` and receives an edge
from ``TOP``; these boundary edges are implicit and never stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

BOTTOM = -1


class CycleError(ValueError):
    """Raised by rank computations on a graph that is not acyclic."""


class WeightedGraph:
    """Antisymmetric n x n evidence matrix; ``W[i, j] > 0`` favours i above j."""

    def __init__(self, n: int, W: np.ndarray | None = None):
        self.n = int(n)
        if W is None:
            W = np.zeros((self.n, self.n))
        W = np.array(W, dtype=float)
        if W.shape != (self.n, self.n):
            raise ValueError("W must be n x n")
        if not np.array_equal(W, -W.T):
            raise ValueError("W must be antisymmetric")
        self.W = W

    @property
    def top(self) -> int:
        return self.n

    def copy(self) -> "WeightedGraph":
        return WeightedGraph(self.n, self.W.copy())

    def max_abs(self) -> float:
        return float(np.abs(self.W).max()) if self.n else 0.0

    def to_jsonl(self) -> str:
        """One JSON record per ordered pair with nonzero weight."""
        ii, jj = np.nonzero(self.W)
        return "".join(json.dumps({"i": int(i), "j": int(j), "w": float(self.W[i, j])}) + "\n"
                       for i, j in zip(ii, jj))

    @classmethod
    def from_jsonl(cls, n: int, text: str) -> "WeightedGraph":
        W = np.zeros((n, n))
        for line in text.splitlines():
            if line.strip():
                rec = json.loads(line)
                W[rec["i"], rec["j"]] = rec["w"]
        return cls(n, W)


@dataclass
class _Structure:
    order: np.ndarray | None       # topological order, sources (top) first
    R: np.ndarray | None           # R[u, v] = longest path u -> v in edges, 0 if none


class ThresholdedDigraph:
    """Unweighted digraph on the real experts plus implicit boundary edges.

    Topological order and the all-pairs longest-path table are computed once
    and cached; the object must not be mutated afterwards.
    """

    def __init__(self, adj: np.ndarray):
        adj = np.array(adj, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        np.fill_diagonal(adj, False)
        adj.setflags(write=False)
        self.adj = adj
        self.n = adj.shape[0]
        self._s: _Structure | None = None

    @classmethod
    def from_edges(cls, n: int, edges) -> "ThresholdedDigraph":
        adj = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            adj[i, j] = True
        return cls(adj)

    @property
    def top(self) -> int:
        return self.n

    def edges(self) -> set[tuple[int, int]]:
        ii, jj = np.nonzero(self.adj)
        return set(zip(ii.tolist(), jj.tolist()))

    def _structure(self) -> _Structure:
        if self._s is None:
            order = _topological_order(self.adj)
            R = None if order is None else _longest_paths(self.adj, order)
            self._s = _Structure(order, R)
        return self._s

    @property
    def acyclic(self) -> bool:
        return self._structure().order is not None

    @property
    def longest(self) -> np.ndarray:
        """All-pairs longest path lengths between real experts (0 when no path)."""
        R = self._structure().R
        if R is None:
            raise CycleError("graph has a directed cycle")
        return R

    def from_top(self) -> np.ndarray:
        """Longest path length from TOP to each real expert."""
        R = self.longest
        return 1 + (R.max(axis=0) if self.n else np.zeros(0, dtype=R.dtype))

    def to_bottom(self) -> np.ndarray:
        """Longest path length from each real expert to BOTTOM."""
        R = self.longest
        return 1 + (R.max(axis=1) if self.n else np.zeros(0, dtype=R.dtype))


def _topological_order(adj: np.ndarray) -> np.ndarray | None:
    n = adj.shape[0]
    indeg = adj.sum(axis=0).astype(np.int64)
    stack = list(np.flatnonzero(indeg == 0)[::-1])
    order = []
    while stack:
        v = stack.pop()
        order.append(v)
        succ = np.flatnonzero(adj[v])
        if succ.size:
            indeg[succ] -= 1
            stack.extend(succ[indeg[succ] == 0][::-1].tolist())
    if len(order) < n:
        return None
    return np.array(order, dtype=np.int64)


def _longest_paths(adj: np.ndarray, order: np.ndarray) -> np.ndarray:
    n = adj.shape[0]
    dtype = np.int16 if n < 32000 else np.int32
    R = np.zeros((n, n), dtype=dtype)
    # sinks first: every successor row is final when v is processed
    for v in order[::-1]:
        succ = np.flatnonzero(adj[v])
        if succ.size == 0:
            continue
        Rs = R[succ]
        cand = np.where(Rs > 0, Rs + 1, 0).max(axis=0)
        cand[succ] = np.maximum(cand[succ], 1)
        R[v] = cand
    return R


def threshold_graph(g: WeightedGraph, gamma: float) -> ThresholdedDigraph:
    """Edges ``(i, j)`` with ``W[i, j] > gamma``."""
    if not gamma > 0:
        raise ValueError("threshold must be positive")
    return ThresholdedDigraph(g.W > gamma)


def is_acyclic(G: ThresholdedDigraph) -> bool:
    return G.acyclic


def relative_rank(G: ThresholdedDigraph, i: int) -> np.ndarray:
    """``rk[j]`` = longest path i -> j minus longest path j -> i, for real j.

    Positive entries are experts below ``i``.
    """
    R = G.longest
    return R[i].astype(np.int64) - R[:, i].astype(np.int64)


def neighborhood(G: ThresholdedDigraph, i: int) -> np.ndarray:
    """Experts with no directed path to or from ``i`` (always contains ``i``)."""
    R = G.longest
    return np.flatnonzero((R[i] == 0) & (R[:, i] == 0))


def band_levels(G: ThresholdedDigraph, P) -> tuple[np.ndarray, int, np.ndarray, int]:
    """Entry levels of every expert into the bands above and below ``P``.

    Returns ``(above, above_top, below, below_bottom)``: ``above[j]`` is the
    smallest ``a`` with ``j`` in the above band ``N_a`` (``inf`` if never),
    ``above_top`` the same for TOP; symmetric for the below band and BOTTOM.
    """
    P = np.asarray(P, dtype=np.int64)
    if P.size == 0:
        raise ValueError("P must be nonempty")
    R = G.longest.astype(np.int64)
    up = R[:, P]
    above = np.where(up.min(axis=1) >= 1, up.max(axis=1), np.iinfo(np.int64).max)
    down = R[P, :]
    below = np.where(down.min(axis=0) >= 1, down.max(axis=0), np.iinfo(np.int64).max)
    above_top = int(G.from_top()[P].max())
    below_bottom = int(G.to_bottom()[P].max())
    return above, above_top, below, below_bottom


def banded_neighborhoods(G: ThresholdedDigraph, P, a: int) -> tuple[list[int], list[int]]:
    """Experts above (resp. below) every member of ``P`` within ``a`` steps.

    The first set may contain TOP (label ``n``), the second BOTTOM (``-1``).
    """
    if a < 1:
        raise ValueError("a must be >= 1")
    above, above_top, below, below_bottom = band_levels(G, P)
    up = np.flatnonzero(above <= a).tolist()
    if above_top <= a:
        up.append(G.n)
    down = np.flatnonzero(below <= a).tolist()
    if below_bottom <= a:
        down.insert(0, BOTTOM)
    return up, down


def smallest_acyclic_threshold(g: WeightedGraph, grid) -> float:
    """Least grid value whose thresholded graph is acyclic; ``inf`` if none."""
    grid = np.asarray(sorted(grid), dtype=float)
    cand = np.append(grid, np.inf)
    # acyclicity is monotone in the threshold; binary search for the boundary
    lo, hi = 0, cand.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _acyclic_at(g, cand[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(cand[lo])


def _acyclic_at(g: WeightedGraph, gamma: float) -> bool:
    if np.isinf(gamma):
        return True
    return _topological_order(g.W > gamma) is not None


def exact_acyclic_threshold(g: WeightedGraph) -> float:
    """Smallest positive threshold over all reals at which the graph is acyclic.

    The graph only changes at the absolute weights, so the search runs over
    ``{0} U {|W_ij|}``; a returned 0 is reported as the smallest positive float.
    """
    vals = np.unique(np.abs(g.W))
    vals = vals[vals > 0]
    gamma = smallest_acyclic_threshold(g, np.concatenate(([0.0], vals)))
    return max(gamma, np.finfo(float).tiny)


def mirsky_levels(G: ThresholdedDigraph) -> np.ndarray:
    """Longest path from each expert down to BOTTOM (1 for minimal experts)."""
    if not G.acyclic:
        raise CycleError("graph has a directed cycle")
    return G.to_bottom().astype(np.int64)


def mirsky_permutation(G: ThresholdedDigraph) -> np.ndarray:
    """Ranks consistent with ``G``: level first, original index breaks ties."""
    levels = mirsky_levels(G)
    order = np.lexsort((np.arange(G.n), levels))
    pi = np.empty(G.n, dtype=np.int64)
    pi[order] = np.arange(G.n)
    return pi


def apply_update(g: WeightedGraph, i: int, updates) -> WeightedGraph:
    """Overwrite ``W[i, j]`` with ``U[i, j]`` wherever ``|U| >= |W|`` (in place).

    ``updates`` is a mapping j -> value, or a pair of arrays ``(js, values)``.
    """
    if isinstance(updates, dict):
        js = np.fromiter(updates.keys(), dtype=np.int64, count=len(updates))
        vals = np.fromiter(updates.values(), dtype=float, count=len(updates))
    else:
        js, vals = (np.asarray(x) for x in updates)
        js = js.astype(np.int64)
        vals = vals.astype(float)
    if np.any(js == i):
        raise ValueError("an expert cannot be compared with itself")
    keep = np.abs(vals) >= np.abs(g.W[i, js])
    js, vals = js[keep], vals[keep]
    g.W[i, js] = vals
    g.W[js, i] = -vals
    return g
