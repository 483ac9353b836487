"""Command line entry point: ``isorank <subcommand> [options]``.

Options may also come from a ``key = value`` config file given with
``--config``; flags on the command line win.  Usage errors exit with 2,
runtime failures exit with 1 and print a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io as iio
from .bench import (
    concentration_check,
    permutation_loss,
    rate_sweep,
    reconstruction_loss,
)
from .isr import build_grid, check_lambda_range, ISRConfig, practical_preset, run_isr
from .reconstruct import ReconConfig, reconstruct_biso, reconstruct_iso
from .sampling import NoiseModel, SignalInstance, poissonize, subsample_batches
from .synth import FAMILIES, gen_biisotonic, gen_isotonic, gen_lower_bound, gen_toy_34

ALL_FAMILIES = FAMILIES + ("lower-bound", "toy", "biisotonic")


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x]


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x]


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment; quotes are stripped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val.strip("'\"")
    return out


def _common(p: argparse.ArgumentParser, sweep: bool = False):
    if sweep:
        p.add_argument("--n", type=_ints, default=[32])
        p.add_argument("--d", type=_ints, default=None)
        p.add_argument("--lambda", dest="lam", type=_floats, default=[1.0])
    else:
        p.add_argument("--n", type=int, default=32)
        p.add_argument("--d", type=int, default=None)
        p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--family", choices=ALL_FAMILIES, default="uniform-sorted")
    p.add_argument("--noise", choices=("gaussian", "bernoulli", "none"), default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)


def _isr_opts(p: argparse.ArgumentParser):
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--grid", choices=("arithmetic", "geometric"), default="arithmetic")
    p.add_argument("--grid-scale", type=float, default=None,
                   help="noise unit of the grid; default is the practical preset")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--final-threshold", choices=("grid", "exact"), default="grid")
    p.add_argument("--trace", default=None, help="write per-pass JSON lines here")
    p.add_argument("--input", default=None, help="instance or stream file (.json or .npz)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isorank", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("generate", help="draw an instance and its observations")
    _common(p)
    p.add_argument("--no-records", action="store_true")

    p = sub.add_parser("run-isr", help="estimate the row permutation")
    _common(p)
    _isr_opts(p)
    p.add_argument("--dump-graph", default=None, help="write the weighted graph as JSON lines")

    p = sub.add_parser("dump-graph", help="run ISR and print the weighted graph as JSON lines")
    _common(p)
    _isr_opts(p)

    p = sub.add_parser("reconstruct", help="estimate the matrix")
    _common(p)
    _isr_opts(p)
    p.add_argument("--route", choices=("iso", "biso"), default="iso")
    p.add_argument("--y-scale", choices=("split", "lambda"), default="split")

    p = sub.add_parser("sweep", help="rate sweep over a grid of sizes")
    _common(p, sweep=True)
    p.add_argument("--replicates", type=int, default=5)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--grid", choices=("arithmetic", "geometric"), default="arithmetic")
    p.add_argument("--grid-scale", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--estimators", default="isr,rowsum")
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--no-timing", action="store_true",
                   help="leave the seconds column empty so reruns are byte-identical")

    p = sub.add_parser("concentration", help="Monte Carlo operator-norm check")
    p.add_argument("--p", type=int, default=16)
    p.add_argument("--q", type=int, default=4096)
    p.add_argument("--sigma2", type=float, default=0.05)
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    return ap


def parse(argv) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        try:
            conf = read_config_file(args.config)
        except (OSError, ValueError) as exc:
            ap.error(str(exc))
        sub = ap._subparsers._group_actions[0].choices[args.cmd]
        dests = {a.dest: a for a in sub._actions}
        defaults = {}
        for k, v in conf.items():
            k = "lam" if k == "lambda" else k
            if k not in dests:
                ap.error(f"unknown config key {k!r}")
            act = dests[k]
            if act.const is True and act.nargs == 0:
                defaults[k] = v.lower() in ("1", "true", "yes", "on")
            else:
                defaults[k] = act.type(v) if act.type else v
        sub.set_defaults(**defaults)
        args = ap.parse_args(argv)
    return args


def _instance(args) -> tuple[SignalInstance | None, object]:
    """Instance (if known) and the observation stream for ``args``."""
    n, d = args.n, args.d if args.d is not None else args.n
    noise = NoiseModel(args.noise)
    if getattr(args, "input", None):
        path = args.input
        if str(path).endswith(".npz"):
            obj = iio.load_npz(path)
            if isinstance(obj, SignalInstance):
                return obj, poissonize(obj, noise, args.seed)
            return None, obj
        doc = iio.load_json(path)
        if doc.get("type") == "instance":
            inst = iio.instance_from_dict(doc)
            stream = iio.stream_from_dict(doc) if "records" in doc else poissonize(inst, noise, args.seed)
            return inst, stream
        return None, iio.stream_from_dict(doc)
    fam = args.family
    if fam == "lower-bound":
        inst = gen_lower_bound(n, d, args.lam, seed=args.seed)[0]
    elif fam == "toy":
        inst = gen_toy_34(lam=args.lam)
    elif fam == "biisotonic":
        inst = gen_biisotonic(n, d, seed=args.seed, lam=args.lam)[0]
    else:
        inst = gen_isotonic(n, d, family=fam, seed=args.seed, lam=args.lam)
    return inst, poissonize(inst, noise, args.seed)


def _isr_config(args, n: int, d: int, lam: float) -> ISRConfig:
    cfg = practical_preset(n, d, lam, delta=args.delta, T=args.T, kind=args.grid)
    if args.grid_scale is not None:
        cfg.grid = build_grid(args.grid, n, d, args.delta, scale=args.grid_scale)
        cfg.preset = "custom-scale"
    if hasattr(args, "final_threshold"):
        cfg.final_threshold = args.final_threshold
    cfg.seed = args.seed
    return cfg


def _write(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def cmd_generate(args) -> int:
    inst, stream = _instance(args)
    if args.out and args.out.endswith(".npz"):
        iio.save_npz(args.out, inst)
        iio.save_npz(args.out[:-4] + ".stream.npz", stream)
        return 0
    doc = iio.instance_to_dict(inst, None if args.no_records else stream)
    _write(iio.dumps(doc) + "\n", args.out)
    return 0


def _run(args):
    inst, stream = _instance(args)
    check_lambda_range(stream.n, stream.d, stream.lam)
    cfg = _isr_config(args, stream.n, stream.d, stream.lam)
    trace_fh = open(args.trace, "w") if args.trace else None
    try:
        tr = None if trace_fh is None else (lambda r: trace_fh.write(json.dumps(r) + "\n"))
        res = run_isr(subsample_batches(stream, cfg.T, args.seed), cfg, trace=tr)
    finally:
        if trace_fh:
            trace_fh.close()
    return inst, stream, cfg, res


def cmd_run_isr(args) -> int:
    inst, stream, cfg, res = _run(args)
    doc = {"schema": iio.SCHEMA, "type": "run", "seed": args.seed, "config": cfg.to_dict(),
           "n": stream.n, "d": stream.d, "lambda": stream.lam,
           "gamma_hat_path": res.gamma_path, "gamma_hat": res.gamma_hat,
           "final_gamma": res.final_gamma, "pi_hat": res.pi_hat.tolist()}
    if inst is not None:
        doc["loss_perm"] = permutation_loss(inst.M, inst.pi_star, res.pi_hat)
    if args.dump_graph:
        Path(args.dump_graph).write_text(res.W.to_jsonl())
    _write(_json(doc), args.out)
    return 0


def cmd_dump_graph(args) -> int:
    _, _, _, res = _run(args)
    _write(res.W.to_jsonl(), args.out)
    return 0


def cmd_reconstruct(args) -> int:
    inst, stream = _instance(args)
    check_lambda_range(stream.n, stream.d, stream.lam)
    rc = ReconConfig(isr=lambda n, d, lam: _isr_config(args, n, d, lam), y_scale=args.y_scale,
                     seed=args.seed)
    extra = {"route": args.route, "seed": args.seed}
    if args.route == "iso":
        fit, pi_hat = reconstruct_iso(stream, rc)
        extra["pi_hat"] = pi_hat.tolist()
    else:
        fit, (pi_hat, eta_hat) = reconstruct_biso(stream, rc)
        extra["pi_hat"] = pi_hat.tolist()
        extra["eta_hat"] = eta_hat.tolist()
        extra["converged"] = fit.converged
    extra["objective"] = fit.objective
    if inst is not None:
        extra["loss_reco"] = reconstruction_loss(inst.M, fit.M_hat)
    _write(iio.dumps(iio.matrix_to_dict(fit.M_hat, **extra)) + "\n", args.out)
    return 0


def cmd_sweep(args) -> int:
    def config_fn(n, d, lam):
        ns = argparse.Namespace(**vars(args))
        return _isr_config(ns, n, d, lam)

    rep = rate_sweep(args.family, args.n, args.d, args.lam, args.replicates, seed=args.seed,
                     config_fn=config_fn, noise=NoiseModel(args.noise),
                     estimators=tuple(args.estimators.split(",")), timeout=args.timeout)
    if args.no_timing:
        for r in rep.rows:
            r["seconds"] = None
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.format == "json":
        _write(_json(rep.to_json()), args.out)
    else:
        stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        _write(f"# {iio.SCHEMA} generated={stamp} seed={args.seed}\n" + rep.to_csv(), args.out)
    return 0


def cmd_concentration(args) -> int:
    res = concentration_check(args.p, args.q, args.sigma2, args.replicates, args.seed)
    _write(_json(res), args.out)
    return 0


COMMANDS = {"generate": cmd_generate, "run-isr": cmd_run_isr, "dump-graph": cmd_dump_graph,
            "reconstruct": cmd_reconstruct, "sweep": cmd_sweep, "concentration": cmd_concentration}


def main(argv=None) -> int:
    args = parse(sys.argv[1:] if argv is None else argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda m, *a, **k: print(f"warning: {m}", file=sys.stderr)
            return COMMANDS[args.cmd](args)
    except Exception as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.cmd}
        print(json.dumps(err), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
