"""Shared fixtures-as-functions for the test modules."""

import numpy as np

from isorank.isr import practical_preset
from isorank.sampling import BatchedObservations
from isorank.synth import gen_separated


def row_gaps(M, pi):
    S = M[np.argsort(pi)]
    return np.abs(np.diff(S, axis=0)).sum(axis=1)


def separated_case(rng, seed, nmax=32, dmax=32):
    """A random separated instance with noiseless, fully observed batches.

    Draws are repeated until every row L1 gap exceeds ``gamma_bar * sqrt(d / lam0)``.
    The per-batch effort is ``(nd/2)^2`` so that the smallest dyadic height
    still admits questions in the band-size test, and the amplified row gaps
    dominate every grid threshold.
    """
    while True:
        n = int(rng.integers(2, nmax + 1))
        d = int(rng.integers(1, dmax + 1))
        gap = rng.uniform(0.5, 1.0) * d / (n - 1)
        inst = gen_separated(n, d, gap, seed=seed)
        cfg = practical_preset(n, d, 1.0)
        lam0 = (n * d / 2.0) ** 2
        if row_gaps(inst.M, inst.pi_star).min() > cfg.grid.gamma_bar * np.sqrt(d / lam0):
            break
    batches = BatchedObservations.full_observation(inst.M, cfg.T, lam0)
    return inst, cfg, batches
