"""Instance generators: random permuted-isotonic matrices, the block toy
example, bi-isotonic and SST families, and the hard lower-bound prior."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampling import SignalInstance, make_rng

FAMILIES = ("uniform-sorted", "block", "smooth")


def permute_rows(S: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Place sorted row ``r`` of ``S`` at the expert whose rank is ``r``."""
    return S[pi]


def gen_isotonic(n: int, d: int, family: str = "uniform-sorted", seed: int = 0,
                 lam: float = 1.0, blocks: int = 4) -> SignalInstance:
    """Random isotonic matrix under a uniformly random row permutation.

    ``uniform-sorted`` sorts i.i.d. uniforms in every column, ``block`` uses
    ``blocks`` row blocks with shared sorted levels, ``smooth`` uses logistic
    column profiles with random slopes and centers.
    """
    rng = make_rng(seed, 0x150)
    if family == "uniform-sorted":
        S = np.sort(rng.random((n, d)), axis=0)
    elif family == "block":
        blocks = max(1, min(int(blocks), n))
        levels = np.sort(rng.random(blocks))
        owner = (np.arange(n) * blocks) // n
        S = np.repeat(levels[owner][:, None], d, axis=1)
    elif family == "smooth":
        x = (np.arange(n) + 0.5) / n
        slope = np.exp(rng.uniform(np.log(2.0), np.log(40.0), size=d))
        center = rng.random(d)
        S = 1.0 / (1.0 + np.exp(-slope * (x[:, None] - center)))
    else:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    pi = rng.permutation(n)
    return SignalInstance(permute_rows(S, pi), pi, lam)


def gen_separated(n: int, d: int, gap: float, seed: int = 0, lam: float = 1.0) -> SignalInstance:
    """Isotonic matrix whose consecutive sorted rows differ by at least ``gap`` in L1.

    A random sorted-uniform profile is mixed with a linear ramp of weight
    ``c = gap (n - 1) / d``; the ramp alone already separates neighbours by
    ``gap``.  Requires ``gap * (n - 1) <= d``.
    """
    if gap * (n - 1) > d:
        raise ValueError("gap too large to fit in [0, 1]")
    rng = make_rng(seed, 0x5E9)
    c = gap * (n - 1) / d if n > 1 else 0.0
    ramp = np.arange(n)[:, None] / max(n - 1, 1)
    S = (1 - c) * np.sort(rng.random((n, d)), axis=0) + c * ramp
    pi = rng.permutation(n)
    return SignalInstance(permute_rows(S, pi), pi, lam)


def gen_biisotonic(n: int, d: int, seed: int = 0, lam: float = 1.0):
    """Bi-isotonic matrix with random row and column permutations.

    Returns ``(instance, eta_star)``; ``eta_star[k]`` is the rank of column ``k``.
    """
    rng = make_rng(seed, 0xB1)
    x = np.sort(rng.random(n))
    y = np.sort(rng.random(d))
    a = rng.uniform(0.5, 2.0)
    S = 1.0 / (1.0 + np.exp(-6.0 * (x[:, None] + a * y[None, :] - (1 + a) / 2)))
    pi = rng.permutation(n)
    eta = rng.permutation(d)
    return SignalInstance(S[pi][:, eta], pi, lam), eta


def gen_sst(n: int, seed: int = 0, lam: float = 1.0, scale: float = 4.0):
    """Bradley-Terry tournament ``M[i, k] = sigmoid(theta_i - theta_k)``.

    Rows are isotonic under the rank of ``theta``; columns under the reversed
    rank, which is returned as ``eta_star`` for ``1 - M`` style use.
    """
    rng = make_rng(seed, 0x557)
    theta = scale * rng.random(n)
    M = 1.0 / (1.0 + np.exp(-(theta[:, None] - theta[None, :])))
    pi = np.empty(n, dtype=np.int64)
    pi[np.argsort(theta, kind="stable")] = np.arange(n)
    return SignalInstance(M, pi, lam), (n - 1 - pi)


def gen_toy_34(n: int = 204, d: int = 10, alpha: float = 0.5, h: float = 0.25,
               lam: float = 1.0) -> SignalInstance:
    """Three row blocks around ``alpha`` with a +-h/2 pattern, identity order.

    Rows ``0..99`` form the low block, ``100..103`` the middle block (two low
    rows, then two high rows) and ``104..203`` the high block.  The signal
    columns are 2, 3, 5, 6, 8, 9 (0-based); the middle block only moves on
    3, 5, 8, 9.
    """
    if (n, d) != (204, 10):
        raise ValueError("the toy example is defined for n=204, d=10")
    if not (h < alpha < 1 - h):
        raise ValueError("need h < alpha < 1 - h")
    outer = np.array([0, 0, 1, 1, 0, 1, 1, 0, 1, 1], dtype=float)
    inner = np.array([0, 0, 0, 1, 0, 1, 0, 0, 1, 1], dtype=float)
    P = np.vstack([np.tile(-outer, (100, 1)), np.tile(-inner, (2, 1)),
                   np.tile(inner, (2, 1)), np.tile(outer, (100, 1))])
    return SignalInstance(alpha + 0.5 * h * P, np.arange(n), lam)


TOY_SIGNAL_COLUMNS = (2, 3, 5, 6, 8, 9)
TOY_MIDDLE = (100, 101, 102, 103)


def dyadic_floor(x: float) -> int:
    """Largest power of two not exceeding ``x`` (at least 1)."""
    if x < 1:
        return 1
    return 1 << int(np.floor(np.log2(x) + 1e-12))


@dataclass(frozen=True)
class LowerBoundPrior:
    n: int
    d: int
    lam: float
    p: int
    q: int
    upsilon: float
    groups: tuple
    questions: tuple
    w: np.ndarray
    family: tuple = ()

    @property
    def elevation(self) -> float:
        return self.upsilon / np.sqrt(self.p * self.lam)


def lower_bound_preset(n: int, d: int, lam: float) -> tuple[int, int, float]:
    """``(p, q, upsilon)`` for the regime of ``lam``; upsilon is the largest feasible value."""
    if lam * n <= 1:
        p, q = n // 2, dyadic_floor(np.sqrt(d / lam))
    elif lam <= 8 * n * n:
        p = dyadic_floor(n ** (2 / 3) / lam ** (1 / 3))
        q = dyadic_floor(n ** (1 / 3) * np.sqrt(d) / lam ** (1 / 6))
    else:
        p, q = 2, dyadic_floor(np.sqrt(d))
    p = int(min(max(p, 2), n))
    q = int(min(max(q, 1), d))
    ups = min(1.0, np.sqrt(p * lam), np.sqrt(p * d) / q, np.sqrt(lam) * p ** 1.5 / (8 * n))
    return p, q, float(ups)


def _is_dyadic(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


def packing_sets(p: int, count: int, rng: np.random.Generator, max_tries: int = 2000,
                 strict: bool = False) -> list[np.ndarray]:
    """Up to ``count`` subsets of ``range(p)`` of size ``p/2``, pairwise ``p/4``-separated.

    Random subsets are kept when they clear every set drawn so far.  After
    ``max_tries`` draws the family found so far is returned (at least one set),
    or ``RuntimeError`` is raised when ``strict``.
    """
    half = p // 2
    out: list[np.ndarray] = []
    masks: list[np.ndarray] = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > max_tries:
            if strict:
                raise RuntimeError("could not draw enough separated sets")
            break
        G = np.sort(rng.choice(p, size=half, replace=False))
        m = np.zeros(p, dtype=bool)
        m[G] = True
        if all(np.count_nonzero(m ^ o) >= p / 4 for o in masks):
            out.append(G)
            masks.append(m)
    return out


def gen_lower_bound(n: int, d: int, lam: float, p: int | None = None, q: int | None = None,
                    upsilon: float | None = None, seed: int = 0,
                    shuffle: bool = True) -> tuple[SignalInstance, LowerBoundPrior]:
    """Draw ``M = w 1' + upsilon / sqrt(p lam) * B`` from the hard prior.

    ``w`` is constant on consecutive strips of ``p`` rows and rises by
    ``p / 4n`` per strip.  A separated family of half-sets is drawn once; strip
    ``s`` picks a member ``G`` of it uniformly and raises those rows on a random
    set of ``q`` questions.  Rows are finally shuffled
    by a uniform permutation unless ``shuffle`` is false.
    """
    dp, dq, du = lower_bound_preset(n, d, lam)
    p = dp if p is None else int(p)
    q = dq if q is None else int(q)
    upsilon = du if upsilon is None else float(upsilon)
    if not (_is_dyadic(p) and _is_dyadic(q)):
        raise ValueError("p and q must be powers of two")
    if not (2 <= p <= n and n % p == 0):
        raise ValueError("p must divide n and satisfy 2 <= p <= n")
    if q > d:
        raise ValueError("q must not exceed d")
    if upsilon < 0:
        raise ValueError("upsilon must be nonnegative")
    elev = upsilon / np.sqrt(p * lam)
    if elev > p / (8 * n) * (1 + 1e-12):
        raise ValueError(f"condition_v violated: upsilon/sqrt(p*lam)={elev:.4g} > p/(8n)={p / (8 * n):.4g}")
    rng = make_rng(seed, 0x10B)
    strips = n // p
    w = (np.arange(n) // p) * p / (4 * n)
    family = packing_sets(p, strips, rng)
    t = rng.integers(len(family), size=strips)
    groups = [family[k] for k in t]
    B = np.zeros((n, d))
    questions = []
    for s in range(strips):
        Q = np.sort(rng.choice(d, size=q, replace=False))
        rows = s * p + groups[s]
        B[np.ix_(rows, Q)] = 1.0
        questions.append(Q)
    S = w[:, None] + elev * B
    prior = LowerBoundPrior(n, d, float(lam), p, q, upsilon,
                            tuple(s * p + G for s, G in enumerate(groups)), tuple(questions), w,
                            tuple(family))
    # sorted order: within a strip the raised rows go on top
    order_key = np.lexsort((B.sum(axis=1), np.arange(n) // p))
    rank = np.empty(n, dtype=np.int64)
    rank[order_key] = np.arange(n)
    if shuffle:
        perm = rng.permutation(n)
        # expert e holds original row perm[e]
        M = S[perm]
        pi = rank[perm]
    else:
        M, pi = S, rank
    return SignalInstance(M, pi, lam), prior
