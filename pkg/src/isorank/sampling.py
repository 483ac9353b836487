"""Poissonized partial observations and their split into independent batches.

Experts (rows) and questions (columns) are 0-indexed throughout the package.
A permutation ``pi`` is stored as an integer array where ``pi[i]`` is the
rank of expert ``i``; rank ``n - 1`` is the top.  ``M[np.argsort(pi)]`` is
therefore the matrix sorted from bottom to top.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NOISE_KINDS = ("gaussian", "bernoulli", "none")


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *keys)``.

    Every random draw in the package goes through this helper so that a
    replicate is fully determined by its seed and its position in a sweep.
    """
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in keys)])
    return np.random.Generator(np.random.Philox(ss))


def sorted_view(M: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Rows of ``M`` reordered by increasing rank under ``pi``."""
    return M[np.argsort(pi, kind="stable")]


def is_permutation(pi) -> bool:
    pi = np.asarray(pi)
    return pi.ndim == 1 and np.array_equal(np.sort(pi), np.arange(pi.size))


@dataclass(frozen=True)
class SignalInstance:
    """Ground truth: a row-permuted isotonic matrix and its sampling effort."""

    M: np.ndarray
    pi_star: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        pi = np.array(self.pi_star, dtype=np.int64)
        if M.ndim != 2 or M.size == 0:
            raise ValueError("M must be a non-empty 2-d array")
        if pi.shape != (M.shape[0],) or not is_permutation(pi):
            raise ValueError("pi_star must be a permutation of range(n)")
        M.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "pi_star", pi)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def d(self) -> int:
        return self.M.shape[1]

    def check(self, atol: float = 1e-12) -> None:
        """Raise ``ValueError`` unless M is isotonic under pi_star and in [0, 1]."""
        if np.any(self.M < -atol) or np.any(self.M > 1 + atol):
            raise ValueError("entries of M must lie in [0, 1]")
        S = sorted_view(self.M, self.pi_star)
        if np.any(np.diff(S, axis=0) < -atol):
            raise ValueError("M is not isotonic under pi_star")

    def is_valid(self, atol: float = 1e-12) -> bool:
        try:
            self.check(atol)
        except ValueError:
            return False
        return True


@dataclass(frozen=True)
class NoiseModel:
    """Centered observation noise.

    ``gaussian`` adds N(0, sigma^2); ``bernoulli`` draws y ~ Bernoulli(M[x]);
    ``none`` returns M[x] exactly and is meant for noiseless experiments.
    """

    kind: str = "gaussian"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    def draw(self, means: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return means + self.sigma * rng.standard_normal(means.shape)
        if self.kind == "bernoulli":
            return (rng.random(means.shape) < means).astype(float)
        return means.astype(float, copy=True)


@dataclass(frozen=True)
class ObservationStream:
    """Records ``(rows[t], cols[t], values[t])`` drawn at sampling effort ``lam``."""

    n: int
    d: int
    lam: float
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise ValueError("rows, cols and values must be 1-d and equally long")
        if rows.size and (rows.min() < 0 or rows.max() >= self.n
                          or cols.min() < 0 or cols.max() >= self.d):
            raise ValueError("record position outside the n x d grid")
        for a in (rows, cols, values):
            a.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)

    @property
    def N(self) -> int:
        return int(self.rows.size)

    def counts(self) -> np.ndarray:
        """Per-cell number of records, shape (n, d)."""
        flat = np.bincount(self.rows * self.d + self.cols, minlength=self.n * self.d)
        return flat.reshape(self.n, self.d)

    def scaled_sums(self, scale: float) -> np.ndarray:
        """``scale * sum_t y_t 1{x_t = (i, k)}`` as an (n, d) matrix."""
        flat = np.bincount(self.rows * self.d + self.cols, weights=self.values,
                           minlength=self.n * self.d)
        return scale * flat.reshape(self.n, self.d)

    def transpose(self) -> "ObservationStream":
        """The same records seen with questions as experts."""
        return ObservationStream(self.d, self.n, self.lam, self.cols, self.rows, self.values)

    def take(self, mask: np.ndarray, lam: float) -> "ObservationStream":
        return ObservationStream(self.n, self.d, lam, self.rows[mask],
                                 self.cols[mask], self.values[mask])


def poissonize(inst: SignalInstance, noise: NoiseModel, seed: int) -> ObservationStream:
    """Draw N ~ Poisson(lam n d) records uniformly over the grid."""
    lam = inst.lam
    if not np.isfinite(lam) or lam <= 0:
        raise ValueError("sampling effort must be a positive finite number")
    rng = make_rng(seed, 0x5A)
    n, d = inst.n, inst.d
    N = int(rng.poisson(lam * n * d))
    rows = rng.integers(0, n, size=N)
    cols = rng.integers(0, d, size=N)
    values = noise.draw(inst.M[rows, cols], rng)
    return ObservationStream(n, d, lam, rows, cols, values)


def split_stream(stream: ObservationStream, parts: int, seed: int) -> list[ObservationStream]:
    """Assign every record a uniform label in ``range(parts)``.

    Under Poissonization the parts are independent streams at effort ``lam / parts``.
    """
    if parts < 1:
        raise ValueError("parts must be >= 1")
    rng = make_rng(seed, 0x51)
    labels = rng.integers(0, parts, size=stream.N)
    return [stream.take(labels == s, stream.lam / parts) for s in range(parts)]


def lambda_effective(lam: float, T: int) -> tuple[float, float]:
    """Per-batch effort ``lam / 5T`` and the observation probability ``1 - exp(-lam0)``."""
    if lam <= 0 or T < 1:
        raise ValueError("need lam > 0 and T >= 1")
    lam0 = lam / (5 * T)
    return lam0, -np.expm1(-lam0)


@dataclass(frozen=True)
class BatchedObservations:
    """The 5T averaged matrices ``Y``, their masks ``B`` and counts ``r``.

    Arrays have shape (5T, n, d).  Instances are read-only once built.
    """

    T: int
    Y: np.ndarray
    B: np.ndarray
    r: np.ndarray
    lambda0: float
    lambda1: float = field(default=float("nan"))

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        r = np.asarray(self.r, dtype=np.int64)
        B = np.asarray(self.B, dtype=bool)
        if Y.ndim != 3 or Y.shape[0] != 5 * self.T or Y.shape != r.shape or Y.shape != B.shape:
            raise ValueError("Y, B, r must all have shape (5T, n, d)")
        lam1 = self.lambda1
        if np.isnan(lam1):
            lam1 = -np.expm1(-self.lambda0)
        for a in (Y, B, r):
            a.setflags(write=False)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "lambda1", float(lam1))

    @property
    def n(self) -> int:
        return self.Y.shape[1]

    @property
    def d(self) -> int:
        return self.Y.shape[2]

    def window(self, t: int) -> np.ndarray:
        """The five batches used at step ``t`` (shape (5, n, d))."""
        if not 0 <= t < self.T:
            raise IndexError(t)
        return self.Y[5 * t: 5 * t + 5]

    @classmethod
    def full_observation(cls, M: np.ndarray, T: int, lambda0: float) -> "BatchedObservations":
        """Noiseless batches with every cell observed once and ``Y = M``.

        ``lambda0`` is the nominal per-batch effort used for scaling; pick it
        large so that ``1 - exp(-lambda0)`` is 1 to machine precision.
        """
        M = np.asarray(M, dtype=float)
        Y = np.broadcast_to(M, (5 * T, *M.shape)).copy()
        ones = np.ones(Y.shape, dtype=np.int64)
        return cls(T, Y, ones.astype(bool), ones, float(lambda0))


def subsample_batches(stream: ObservationStream, T: int, seed: int) -> BatchedObservations:
    """Label each record with a uniform batch in ``range(5T)`` and average per cell."""
    if T < 1:
        raise ValueError("T must be >= 1")
    S = 5 * T
    n, d = stream.n, stream.d
    rng = make_rng(seed, 0xB7)
    labels = rng.integers(0, S, size=stream.N)
    flat = (labels * n + stream.rows) * d + stream.cols
    r = np.bincount(flat, minlength=S * n * d).reshape(S, n, d)
    sums = np.bincount(flat, weights=stream.values, minlength=S * n * d).reshape(S, n, d)
    Y = sums / np.maximum(r, 1)
    lam0, lam1 = lambda_effective(stream.lam, T)
    return BatchedObservations(T, Y, r >= 1, r, lam0, lam1)
