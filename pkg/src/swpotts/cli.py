"""Command-line front end: `swpotts <subcommand> ...` (or `python -m swpotts`)."""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys

import numpy as np

from . import __version__
from .analytic import (DomainError, ModelParams, NumericError, bu_residual, classify_fixpoints,
                       resolve_b, thresholds)
from .dynamics import heavy_light_profile, sw_step_counts
from .experiments import (default_workers, emit_figure_data, escape_probe, header,
                          output_name, records_to_rows, render_table, scan_scaling, write_table)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CENSORED = 0, 2, 3, 4
OUTPUT_ENV = "SWPOTTS_OUTPUT_DIR"


class UsageError(Exception):
    pass


def _out_dir(args) -> str:
    d = args.out_dir or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(d, exist_ok=True)
    return d


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _b(args) -> float:
    try:
        return resolve_b(args.q, args.B)
    except ValueError as e:
        raise UsageError(f"bad --B {args.B!r}: {e}")


def _config(args, **extra) -> dict:
    skip = {"func", "out_dir", "workers", "json"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    cfg.update(extra)
    return cfg


def _emit(args, kind, q, B, n, rows, meta) -> str:
    fmt = "json" if args.json else "csv"
    path = os.path.join(_out_dir(args), output_name(kind, q, B, n, "jsonl" if args.json else "csv"))
    write_table(path, rows, meta, fmt)
    return path


# ---------------------------------------------------------------- subcommands

def cmd_thresholds(args) -> int:
    q = args.q
    if q == 2:
        msg = {"q": 2, "b_u": 2.0, "b_o": 2.0, "b_rc": 2.0,
               "note": "thresholds coincide (Ising)"}
    else:
        th = thresholds(q)
        msg = {"q": q, "b_u": th.b_u, "b_o": th.b_o, "b_rc": th.b_rc,
               "bu_residual": bu_residual(q)}
    if args.json:
        print(json.dumps(msg, sort_keys=True))
    else:
        for k, v in msg.items():
            print(f"{k}: {v}")
    return EXIT_OK


def cmd_fixpoints(args) -> int:
    B = _b(args)
    rep = classify_fixpoints(ModelParams(args.q, B))
    d = {"q": rep.q, "B": rep.B, "regime": rep.regime, "uniform": rep.uniform,
         "majority": rep.majority, "warnings": rep.warnings}
    if args.json:
        print(json.dumps(d, sort_keys=True))
    else:
        print(f"q={rep.q} B={rep.B!r} regime: {rep.regime}")
        u = rep.uniform
        print(f"  uniform u={u['value']:.6g}: {u['class']} (F'={u['jacobian']:.6g})")
        if rep.majority:
            m = rep.majority
            print(f"  majority a={m['a']:.10g} b={m['b']:.6g}: {m['class']} (F'(a)={m['jacobian']:.10g})")
        else:
            print("  majority: none")
        for w in rep.warnings:
            print(f"  warning: {w}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    B = _b(args)
    seed = _seed(args)
    q, n = args.q, args.n
    P = ModelParams(q, B, n)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    if args.start == "ordered":
        counts = np.zeros(q, dtype=np.int64)
        counts[0] = n
    else:
        counts = np.full(q, n // q, dtype=np.int64)
        counts[: n % q] += 1
    rows = []

    def row(t, c):
        r = {"step": t}
        r.update({f"c{i}": int(v) for i, v in enumerate(c)})
        r["S"] = int(c.max())
        r["tags"] = "|".join(heavy_light_profile(c, P, args.eps))
        return r

    rows.append(row(0, counts))
    for t in range(1, args.steps + 1):
        counts = sw_step_counts(counts, P, rng)
        if t % args.stride == 0 or t == args.steps:
            rows.append(row(t, counts))
    meta = header(seed, _config(args, B=B))
    if args.trace:
        sys.stdout.write(render_table(rows, meta, "json" if args.json else "csv"))
    path = _emit(args, "trajectory", q, B, n, rows, meta)
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def _parse_n_list(s: str) -> list[int]:
    try:
        return [int(float(v)) for v in s.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --n list {s!r}")


def cmd_mixscan(args) -> int:
    B = _b(args)
    seed = _seed(args)
    n_list = _parse_n_list(args.n)
    if len(set(n_list)) < 3:
        raise UsageError("mixscan needs at least three distinct n values")
    kw = {"max_steps": args.max_steps}
    if args.estimator == "hit-uniform":
        kw["delta"] = args.delta
    else:
        kw["L"] = args.L
    P = ModelParams(args.q, B)
    fit, recs = scan_scaling(args.estimator, n_list, P, args.reps, seed, args.workers, **kw)
    kind = "coupling_time" if args.estimator == "coupling" else "hit_uniform"
    meta = header(seed, _config(args, B=B))
    path = _emit(args, kind, args.q, B, "-".join(map(str, n_list)), records_to_rows(recs), meta)
    summary = {"model": fit.model, "exponent_or_slope": fit.exponent_or_slope,
               "r_squared": fit.r_squared, "n_values": fit.n_values, "medians": fit.outcomes,
               "alternatives": fit.alternatives, "censored": fit.censored, "output": path}
    print(json.dumps(summary, sort_keys=True, indent=None if args.json else 1))
    if recs and all(r.censored for r in recs):
        return EXIT_CENSORED
    return EXIT_OK


def cmd_escape(args) -> int:
    B = _b(args)
    seed = _seed(args)
    P = ModelParams(args.q, B, args.n)
    frac, recs = escape_probe(P, args.center, args.radius, args.horizon, args.reps, seed,
                              args.workers)
    meta = header(seed, _config(args, B=B))
    path = _emit(args, "escape_probe", args.q, B, args.n, records_to_rows(recs), meta)
    print(json.dumps({"escape_fraction": frac, "reps": args.reps, "output": path}, sort_keys=True))
    return EXIT_OK


def cmd_figure(args) -> int:
    B_list = [resolve_b(args.q, b) for b in args.B_list.split(",")]
    rows = emit_figure_data(args.kind, args.q, B_list, args.grid)
    meta = header(None, _config(args, B_values=B_list))
    fmt = "json" if args.json else "csv"
    path = os.path.join(_out_dir(args), f"figure_{args.kind}_q{args.q}.{'jsonl' if args.json else 'csv'}")
    write_table(path, rows, meta, fmt)
    print(f"wrote {path} ({len(rows)} rows)", file=sys.stderr)
    return EXIT_OK


def cmd_potential_check(args) -> int:
    from .potential import build_potential, verify_drift

    seed = _seed(args)
    spec = build_potential(args.q, args.n, args.L, args.Lp)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    grid = [int(round(f * args.n)) for f in args.grid] if args.grid else []
    if args.at_fixpoint:
        grid.append(int(np.ceil(spec.a * args.n)))
    rows = []
    for eps in args.eps:
        est = verify_drift(spec, sorted(set(grid)), args.reps, rng, eps=eps)
        for z, m, e in zip(est.zeta_grid, est.delta_g_mean, est.std_err):
            rows.append({"eps": eps, "zeta": z, "zeta_over_n": z / args.n, "mean_dG": m,
                         "std_err": e, "margin_sigma": -m / e, "skipped": ""})
        for z, why in est.skipped.items():
            rows.append({"eps": eps, "zeta": z, "zeta_over_n": z / args.n, "mean_dG": "",
                         "std_err": "", "margin_sigma": "", "skipped": why})
    meta = header(seed, _config(args, B=spec.B))
    meta["potential"] = json.loads(spec.to_json())
    path = _emit(args, "drift_check", args.q, spec.B, args.n, rows, meta)
    print(spec.to_json() if args.json else json.dumps(spec.checks, indent=1, default=float))
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swpotts", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=True, out=True):
        p.add_argument("--q", type=int, default=3)
        p.add_argument("--json", action="store_true", help="machine-readable output")
        if seed:
            p.add_argument("--seed", type=int, default=None)
        if out:
            p.add_argument("--out-dir", default=None, help=f"output directory (default ${OUTPUT_ENV} or .)")
            p.add_argument("--workers", type=int, default=default_workers())

    p = sub.add_parser("thresholds", help="print B_u, B_o, B_rc")
    common(p, seed=False, out=False)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("fixpoints", help="classify the fixpoints of F")
    common(p, seed=False, out=False)
    p.add_argument("--B", required=True, help="coupling or one of bu, bo, brc")
    p.set_defaults(func=cmd_fixpoints)

    p = sub.add_parser("simulate", help="run the count-level chain")
    common(p)
    p.add_argument("--B", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--start", choices=["ordered", "uniform"], default="ordered")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--trace", action="store_true", help="also print the trace to stdout")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mixscan", help="scaling scan of a mixing proxy")
    common(p)
    p.add_argument("--B", required=True)
    p.add_argument("--n", required=True, help="comma-separated list, e.g. 1000,10000,100000")
    p.add_argument("--estimator", choices=["coupling", "hit-uniform"], required=True)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=10 ** 6)
    p.add_argument("--delta", type=float, default=5.0)
    p.add_argument("--L", type=float, default=10.0)
    p.set_defaults(func=cmd_mixscan)

    p = sub.add_parser("escape", help="ball-escape probe")
    common(p)
    p.add_argument("--B", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--center", choices=["u", "m"], required=True)
    p.add_argument("--radius", type=float, default=0.05)
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--reps", type=int, default=50)
    p.set_defaults(func=cmd_escape)

    p = sub.add_parser("figure", help="tables of Psi_1 or F(z) - z")
    common(p, seed=False)
    p.add_argument("--kind", choices=["psi1", "fdrift"], required=True)
    p.add_argument("--B-list", dest="B_list", required=True)
    p.add_argument("--grid", type=int, default=200)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("potential-check", help="build G and Monte Carlo its drift")
    common(p)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--Lp", type=float, default=None)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--eps", type=float, nargs="+", default=[0.1])
    p.add_argument("--grid", type=float, nargs="*", default=[0.40, 0.45, 0.6, 0.8, 1.0])
    p.add_argument("--no-fixpoint", dest="at_fixpoint", action="store_false")
    p.set_defaults(func=cmd_potential_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    if getattr(args, "command", None) == "potential-check":
        from .potential import DEFAULT_L, DEFAULT_LP
        args.L = DEFAULT_L if args.L is None else args.L
        args.Lp = DEFAULT_LP if args.Lp is None else args.Lp
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, ArithmeticError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
