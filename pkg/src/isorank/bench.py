"""Losses, baselines, rate sweeps and the Monte Carlo concentration check."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .isr import ISRConfig, check_lambda_range, practical_preset, run_isr
from .linalg import sym_opnorm
from .sampling import (
    BatchedObservations,
    NoiseModel,
    ObservationStream,
    SignalInstance,
    make_rng,
    poissonize,
    sorted_view,
    subsample_batches,
)

log = logging.getLogger(__name__)

SCHEMA = "isorank/1"
CSV_HEADER = ("n", "d", "lambda", "estimator", "replicate", "loss_perm", "loss_reco", "seconds", "seed")


def permutation_loss(M: np.ndarray, pi_star: np.ndarray, pi_hat: np.ndarray) -> float:
    """Squared Frobenius distance between the two row orderings of ``M``."""
    M = np.asarray(M, dtype=float)
    D = sorted_view(M, pi_hat) - sorted_view(M, pi_star)
    return float(np.sum(D * D))


def reconstruction_loss(M: np.ndarray, M_hat: np.ndarray) -> float:
    D = np.asarray(M_hat, dtype=float) - np.asarray(M, dtype=float)
    return float(np.sum(D * D))


def rank_by_score(score: np.ndarray) -> np.ndarray:
    """Ranks by increasing score; equal scores are ordered by index."""
    order = np.lexsort((np.arange(score.size), score))
    pi = np.empty(score.size, dtype=np.int64)
    pi[order] = np.arange(score.size)
    return pi


def baseline_rowsum(obs) -> np.ndarray:
    """Rank experts by their mean observed value (0 for unobserved experts)."""
    if isinstance(obs, ObservationStream):
        tot = np.bincount(obs.rows, weights=obs.values, minlength=obs.n)
        cnt = np.bincount(obs.rows, minlength=obs.n)
    elif isinstance(obs, BatchedObservations):
        tot = np.einsum("snd,snd->n", obs.Y, obs.r.astype(float))
        cnt = obs.r.sum(axis=(0, 2))
    else:
        Y = np.asarray(obs, dtype=float)
        tot, cnt = Y.sum(axis=1), np.full(Y.shape[0], Y.shape[1])
    score = tot / np.maximum(cnt, 1)
    return rank_by_score(score)


@dataclass
class ExperimentReport:
    """Per-replicate rows plus a summary; serializes to CSV or JSON."""

    config: dict
    rows: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    seed: int = 0

    def add(self, **row):
        self.rows.append(row)

    def summary(self) -> list[dict]:
        groups: dict = {}
        for r in self.rows:
            if r.get("loss_perm") is None or not np.isfinite(r["loss_perm"]):
                continue
            groups.setdefault((r["n"], r["d"], r["lambda"], r["estimator"]), []).append(r)
        out = []
        for (n, d, lam, est), rs in sorted(groups.items()):
            lp = np.array([r["loss_perm"] for r in rs])
            lr = np.array([r["loss_reco"] for r in rs if r.get("loss_reco") is not None], dtype=float)
            out.append({"n": n, "d": d, "lambda": lam, "estimator": est, "replicates": len(rs),
                        "median_loss_perm": float(np.median(lp)),
                        "q95_loss_perm": float(np.quantile(lp, 0.95)),
                        "median_loss_reco": float(np.median(lr)) if lr.size else None,
                        "median_seconds": _median_or_none([r.get("seconds") for r in rs])})
        return out

    def slopes(self, estimator: str = "isr") -> dict:
        """Log-log slope of the median permutation loss against ``n``."""
        pts = [(s["n"], s["median_loss_perm"]) for s in self.summary() if s["estimator"] == estimator]
        pts = [(n, v) for n, v in pts if v > 0]
        if len(pts) < 2:
            return {"estimator": estimator, "slope": None, "reference": 7 / 6}
        x = np.log([p[0] for p in pts])
        y = np.log([p[1] for p in pts])
        return {"estimator": estimator, "slope": float(np.polyfit(x, y, 1)[0]), "reference": 7 / 6,
                "reference_ratio": 2 ** (7 / 6)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([_fmt(r.get(k)) for k in CSV_HEADER])
        return buf.getvalue()

    def to_json(self, include_seconds: bool = True) -> dict:
        rows = self.rows if include_seconds else [{k: v for k, v in r.items() if k != "seconds"}
                                                  for r in self.rows]
        return {"schema": SCHEMA, "seed": self.seed, "config": self.config, "rows": rows,
                "summary": self.summary(), "slope": self.slopes(), "warnings": self.warnings}


def _median_or_none(vals):
    vals = [v for v in vals if v is not None]
    return float(np.median(vals)) if vals else None


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def make_instance(family: str, n: int, d: int, lam: float, seed: int) -> SignalInstance:
    from .synth import gen_isotonic, gen_lower_bound

    if family == "lower-bound":
        return gen_lower_bound(n, d, lam, seed=seed)[0]
    return gen_isotonic(n, d, family=family, seed=seed, lam=lam)


def run_point(inst: SignalInstance, config: ISRConfig, noise: NoiseModel, seed: int,
              estimators=("isr", "rowsum"), timeout: float | None = None) -> list[dict]:
    """Draw one replicate and evaluate each estimator on it."""
    stream = poissonize(inst, noise, seed)
    out = []
    for est in estimators:
        t0 = time.perf_counter()
        if est == "isr":
            batches = subsample_batches(stream, config.T, seed)
            pi_hat = run_isr(batches, config).pi_hat
        elif est == "rowsum":
            pi_hat = baseline_rowsum(stream)
        elif est == "oracle":
            pi_hat = inst.pi_star
        else:
            raise ValueError(f"unknown estimator {est!r}")
        secs = time.perf_counter() - t0
        row = {"n": inst.n, "d": inst.d, "lambda": inst.lam, "estimator": est,
               "loss_perm": permutation_loss(inst.M, inst.pi_star, pi_hat), "loss_reco": None,
               "seconds": secs, "seed": seed}
        if timeout is not None and secs > timeout:
            row["timed_out"] = True
        out.append(row)
    return out


def point_seed(seed: int, point: int, replicate: int) -> int:
    """Independent integer seed for ``(point, replicate)``."""
    return int(make_rng(seed, 0xC0DE, point, replicate).integers(0, 2**62))


def rate_sweep(family: str, ns, ds, lams, replicates: int, seed: int = 0, config_fn=None,
               noise: NoiseModel | None = None, estimators=("isr", "rowsum"),
               timeout: float | None = None) -> ExperimentReport:
    """Run every estimator on ``replicates`` draws per grid point.

    ``ds`` may be ``None`` to use ``d = n``.  ``config_fn(n, d, lam)`` builds
    the ISR config (practical preset by default).  Failures are logged and
    recorded as rows with a missing loss; the sweep continues.
    """
    noise = noise or NoiseModel("gaussian")
    config_fn = config_fn or (lambda n, d, lam: practical_preset(n, d, lam))
    rep = ExperimentReport(config={"family": family, "n": list(ns),
                                   "d": None if ds is None else list(ds),
                                   "lambda": list(lams), "replicates": replicates,
                                   "noise": noise.kind, "estimators": list(estimators)},
                           seed=seed)
    point = 0
    for n in ns:
        for d in ([n] if ds is None else ds):
            for lam in lams:
                if lam < 1.0 / d:
                    rep.warnings.append(f"n={n} d={d} lambda={lam}: below 1/d, fewer than one "
                                        "observation per expert; trivial regime")
                if not (1.0 / d <= lam <= 8.0 * n * n):
                    rep.warnings.append(f"n={n} d={d} lambda={lam}: outside [1/d, 8n^2]")
                cfg = config_fn(n, d, lam)
                rep.config.setdefault("isr", {})[f"{n}x{d}@{lam:g}"] = cfg.to_dict()
                for r in range(replicates):
                    s = point_seed(seed, point, r)
                    try:
                        inst = make_instance(family, n, d, lam, s)
                        for row in run_point(inst, cfg, noise, s, estimators, timeout):
                            row["replicate"] = r
                            rep.add(**row)
                    except Exception as exc:  # keep sweeping
                        log.warning("point n=%d d=%d lam=%g rep=%d failed: %s", n, d, lam, r, exc)
                        rep.add(n=n, d=d, **{"lambda": lam}, estimator="error", replicate=r,
                                loss_perm=None, loss_reco=None, seconds=0.0, seed=s)
                point += 1
    return rep


def concentration_check(p: int, q: int, sigma2: float, replicates: int, seed: int = 0) -> dict:
    """Monte Carlo quantiles of ``||X X' - sigma2 q I||_op`` with ``X = B * E``."""
    if not 0 < sigma2 <= 1:
        raise ValueError("sigma2 must lie in (0, 1]")
    rng = make_rng(seed, 0xC0C, p, q)
    stats = np.empty(replicates)
    for r in range(replicates):
        B = rng.random((p, q)) < sigma2
        E = rng.standard_normal((p, q))
        X = np.where(B, E, 0.0)
        S = X @ X.T
        S[np.diag_indices(p)] -= sigma2 * q
        stats[r] = sym_opnorm(S)
    return {"schema": SCHEMA, "p": p, "q": q, "sigma2": sigma2, "replicates": replicates,
            "seed": seed, "median": float(np.median(stats)),
            "q95": float(np.quantile(stats, 0.95)), "mean_diag": sigma2 * q,
            "reference": sigma2 * math.sqrt(p * q)}


def concentration_slope(ps, qs, sigma2: float, replicates: int, seed: int = 0) -> dict:
    """Pooled log-log slope of the median statistic against ``q`` (one intercept per ``p``)."""
    rows = [concentration_check(p, q, sigma2, replicates, seed) for p in ps for q in qs]
    x, y, groups = [], [], []
    for r in rows:
        x.append(math.log(r["q"]))
        y.append(math.log(r["median"]))
        groups.append(ps.index(r["p"]))
    X = np.zeros((len(x), 1 + len(ps)))
    X[:, 0] = x
    X[np.arange(len(x)), 1 + np.array(groups)] = 1.0
    coef, *_ = np.linalg.lstsq(X, np.array(y), rcond=None)
    return {"schema": SCHEMA, "slope": float(coef[0]), "points": rows}
