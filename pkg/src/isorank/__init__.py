"""Ranking experts from partial noisy comparisons with isotonic structure."""

from .compgraph import WeightedGraph, mirsky_permutation, threshold_graph
from .isr import ISRConfig, build_grid, practical_preset, run_isr, theoretical_preset
from .reconstruct import ReconConfig, pava, project_biisotonic, project_isotonic, reconstruct_biso, reconstruct_iso
from .sampling import BatchedObservations, NoiseModel, ObservationStream, SignalInstance, poissonize, subsample_batches

__version__ = "0.1.0"
