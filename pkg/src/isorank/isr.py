"""Iterative soft ranking: threshold grids, the T-step driver and presets."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .compgraph import (
    WeightedGraph,
    exact_acyclic_threshold,
    mirsky_permutation,
    smallest_acyclic_threshold,
    threshold_graph,
)
from .sampling import BatchedObservations
from .slr import GraphState, SLRConfig, slr_pass

log = logging.getLogger(__name__)

GRID_KINDS = ("arithmetic", "geometric", "custom")
GRID_RULES = ("gap", "displayed")


def phi_l1(n: int, d: int, delta: float) -> float:
    """Theoretical noise level ``1e4 * log(1e2 n d / delta)``."""
    return 1e4 * math.log(1e2 * n * d / delta)


def witness_length(n: int) -> int:
    return 2 * int(math.floor(math.log2(n))) + 3 if n >= 1 else 3


def default_delta(n: int, d: int) -> float:
    return 1.0 / float(n * d) ** 2


def find_witness(grid, m: int, phi: float, rule: str = "gap") -> np.ndarray | None:
    """Decreasing length-``m`` subsequence of ``grid`` with the smallest top value.

    ``rule="gap"`` asks ``g_u - g_{u+1} >= phi`` and ``g_last >= phi``;
    ``rule="displayed"`` asks ``g_u - g_{u+1} >= g_last + phi`` and
    ``g_last >= phi``.  Returns the sequence in decreasing order, or ``None``.
    """
    if rule not in GRID_RULES:
        raise ValueError(f"unknown rule {rule!r}")
    vals = np.unique(np.asarray(grid, dtype=float))
    vals = vals[np.isfinite(vals)]
    best = None
    starts = vals[vals >= phi * (1 - 1e-12)]
    for last in starts:
        step = phi if rule == "gap" else last + phi
        seq = [last]
        cur = last
        ok = True
        for _ in range(m - 1):
            idx = np.searchsorted(vals, cur + step * (1 - 1e-12))
            if idx >= vals.size:
                ok = False
                break
            cur = vals[idx]
            seq.append(cur)
        if ok and (best is None or seq[-1] < best[-1]):
            best = seq
        if rule == "gap":
            break  # the smallest admissible last value is optimal for this rule
    return None if best is None else np.array(best[::-1])


@dataclass
class GridConfig:
    """A threshold grid with its witness sequence and noise scale.

    ``phi_L1`` is always the theoretical value; ``scale`` is the noise unit
    actually used to build and validate the grid (equal to ``phi_L1`` for the
    theoretical preset).
    """

    kind: str
    n: int
    d: int
    delta: float
    phi_L1: float
    scale: float
    grid: np.ndarray
    witness: np.ndarray
    gamma_bar: float
    rule: str = "gap"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "d": self.d, "delta": self.delta,
                "phi_L1": self.phi_L1, "scale": self.scale, "rule": self.rule,
                "grid": [float(x) for x in self.grid],
                "witness": [float(x) for x in self.witness], "gamma_bar": self.gamma_bar}


def build_grid(kind: str, n: int, d: int, delta: float | None = None, scale: float | None = None,
               rule: str = "gap", values=None) -> GridConfig:
    """Construct and validate a threshold grid.

    ``arithmetic`` is ``{(u + 1) c : u < m}`` with ``m`` the witness length;
    ``geometric`` is the set of powers of ``1 + 1/log2 n`` between ``c`` and
    the first value admitting a witness; ``custom`` validates ``values``.
    ``c`` defaults to the theoretical ``phi_L1``.
    """
    if kind not in GRID_KINDS:
        raise ValueError(f"unknown grid kind {kind!r}")
    if delta is None:
        delta = default_delta(n, d)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    phi = phi_l1(n, d, delta)
    c = phi if scale is None else float(scale)
    if not c > 0:
        raise ValueError("grid scale must be positive")
    m = witness_length(n)
    if kind == "arithmetic":
        grid = c * np.arange(1, m + 1, dtype=float)
        if rule == "displayed":
            # spacing must exceed the smallest element plus c
            grid = c * (1 + 2 * np.arange(m, dtype=float))
    elif kind == "geometric":
        r = 1.0 + 1.0 / math.log2(n) if n > 2 else 2.0
        u0 = math.ceil(math.log(c) / math.log(r) - 1e-9)
        vals = [r ** u0]
        while find_witness(vals, m, c, rule) is None:
            vals.append(vals[-1] * r)
            if len(vals) > 100_000:
                raise ValueError("geometric grid did not become valid")
        grid = np.array(vals)
    else:
        if values is None:
            raise ValueError("custom grids need explicit values")
        grid = np.unique(np.asarray(values, dtype=float))
        if grid.size == 0 or np.any(grid <= 0):
            raise ValueError("grid values must be positive")
    wit = find_witness(grid, m, c, rule)
    if wit is None:
        raise ValueError("invalid grid: no witness sequence of length %d" % m)
    return GridConfig(kind, n, d, float(delta), phi, c, grid, wit, float(wit[0]), rule)


@dataclass
class ISRConfig:
    """Driver settings.

    Attributes:
        T: number of steps (each consumes five batches).
        grid: validated threshold grid.
        slr: options forwarded to every local pass.
        final_threshold: ``grid`` uses the acyclic grid threshold for the
            output DAG; ``exact`` uses the smallest acyclic threshold over all
            reals.
        gamma_order: order of the thresholds within a step.
        preset: name of the preset that produced the config.
    """

    T: int
    grid: GridConfig
    slr: SLRConfig = field(default_factory=SLRConfig)
    final_threshold: str = "grid"
    gamma_order: str = "ascending"
    preset: str = "custom"
    seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.final_threshold not in ("grid", "exact"):
            raise ValueError("final_threshold must be 'grid' or 'exact'")
        if self.gamma_order not in ("ascending", "descending"):
            raise ValueError("gamma_order must be 'ascending' or 'descending'")

    def to_dict(self) -> dict:
        return {"T": self.T, "grid": self.grid.to_dict(), "final_threshold": self.final_threshold,
                "gamma_order": self.gamma_order, "preset": self.preset, "seed": self.seed,
                "slr": {"heights": None if self.slr.heights is None else list(self.slr.heights),
                        "descending": self.slr.descending,
                        "count_virtual": self.slr.count_virtual}}


# calibrated on the sorted-uniform and lower-bound families (see README)
PRACTICAL_T = 1
PRACTICAL_KAPPA = 0.1


def practical_scale(n: int, d: int, delta: float, kappa: float = PRACTICAL_KAPPA) -> float:
    return kappa * math.sqrt(math.log(n * d / delta))


def practical_preset(n: int, d: int, lam: float, delta: float | None = None,
                     T: int | None = None, kappa: float | None = None,
                     kind: str = "arithmetic") -> ISRConfig:
    """Small-T configuration with a grid scaled to ``kappa * sqrt(log(nd/delta))``."""
    delta = default_delta(n, d) if delta is None else delta
    kappa = PRACTICAL_KAPPA if kappa is None else kappa
    T = PRACTICAL_T if T is None else T
    grid = build_grid(kind, n, d, delta, scale=practical_scale(n, d, delta, kappa))
    return ISRConfig(T=T, grid=grid, preset=f"practical(kappa={kappa:g})")


def theoretical_preset(n: int, d: int, lam: float, delta: float | None = None) -> ISRConfig:
    """Arithmetic grid in units of ``phi_L1`` with ``T = 4 ceil(gamma_bar^6)``."""
    delta = default_delta(n, d) if delta is None else delta
    grid = build_grid("arithmetic", n, d, delta)
    T = 4 * math.ceil(grid.gamma_bar ** 6)
    return ISRConfig(T=T, grid=grid, preset="theoretical")


def check_lambda_range(n: int, d: int, lam: float) -> bool:
    ok = 1.0 / d <= lam <= 8.0 * n * n
    if not ok:
        warnings.warn(f"lambda={lam:g} outside [1/d, 8n^2]; no guarantee applies", stacklevel=2)
    return ok


@dataclass
class ISRResult:
    W: WeightedGraph
    pi_hat: np.ndarray
    gamma_hat: float
    gamma_path: list
    final_gamma: float


def run_isr(batches: BatchedObservations, config: ISRConfig,
            trace: Callable[[dict], None] | None = None) -> ISRResult:
    """Run the T-step loop and return the graph, permutation and thresholds."""
    n = batches.n
    g = WeightedGraph(n)
    grid = np.sort(config.grid.grid)
    T = min(config.T, batches.T)
    if config.T > batches.T:
        raise ValueError(f"config asks for T={config.T} steps but only {batches.T} are available")
    gamma_hat = 0.0
    path = []
    if n == 1:
        return ISRResult(g, np.zeros(1, dtype=np.int64), float(grid[0]), [], float(grid[0]))
    for t in range(T):
        window = batches.window(t)
        active = grid[grid >= gamma_hat]
        if config.gamma_order == "descending":
            active = active[::-1]
        for gamma in active:
            state = GraphState(g, gamma)
            if not state.acyclic:
                _emit(trace, {"t": t, "gamma": float(gamma), "skip": "cyclic"})
                continue
            rec = None if trace is None else (lambda r, t=t: trace({"t": t, **r}))
            for i in range(n):
                if not state.acyclic:
                    break
                slr_pass(window, g, gamma, i, batches.lambda0, config.slr, state, rec)
        gamma_hat = smallest_acyclic_threshold(g, grid[grid >= gamma_hat])
        path.append(gamma_hat)
        _emit(trace, {"t": t, "gamma_hat": gamma_hat})
    if config.final_threshold == "exact":
        final = exact_acyclic_threshold(g)
    else:
        final = gamma_hat
    if np.isinf(final):
        G = threshold_graph(g, np.finfo(float).max)
    else:
        G = threshold_graph(g, final)
    pi_hat = mirsky_permutation(G)
    return ISRResult(g, pi_hat, float(gamma_hat), path, float(final))


def _emit(trace, rec):
    if trace is not None:
        trace(rec)
