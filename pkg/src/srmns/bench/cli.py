"""Command-line front end: ``srmns-bench`` or ``python -m srmns.bench``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..core import InstanceError, load_instance
from ..offline import (
    BRUTE_FORCE_BUDGET,
    BudgetExceededError,
    SolveContext,
    objective,
    solve_global_ascent,
    solve_global_bruteforce,
    solve_index,
    solve_index_exhaustive,
)
from ..policies import DegeneratePolicyError
from ..sim import BENCHMARKS, POLICIES, ExperimentConfig, run_replications
from . import emit
from .presets import PRESET_NAMES, preset, run_coupling, run_index_gap, run_scaling, run_switching

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_DEGENERATE = 4
EXIT_IO = 5

SWITCH_COLUMNS = ("T", "B", "solver", "x1", "x2", "x3", "n1", "n2", "n3", "objective")
GAP_COLUMNS = ("T", "B", "index_obj", "alt_obj", "gap")
COUPLING_COLUMNS = ("T", "B", "reps", "mean_loss_events", "stderr", "max_loss_events",
                    "mean_total_loss")


def _common(p: argparse.ArgumentParser, reps_default=None):
    p.add_argument("--seed", type=int, default=None, help="root seed (default: preset seed or 0)")
    p.add_argument("--reps", type=int, default=reps_default, help="replications per grid point")
    p.add_argument("--out-dir", type=Path, default=None, help="directory for output files")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--budget", type=int, default=BRUTE_FORCE_BUDGET,
                   help="max objective evaluations for exact enumeration")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="srmns-bench",
                                 description="Overbooking with no-shows: solvers and experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve the offline problem for an instance file")
    s.add_argument("instance", type=Path)
    s.add_argument("--mode", choices=("index", "exhaustive-index", "brute", "ascent"), default="index")
    s.add_argument("--nf", type=int, nargs="+", default=None,
                   help="future arrival counts in input order (default: T * lambda rounded)")
    _common(s)

    m = sub.add_parser("simulate", help="replicate one policy on an instance file")
    m.add_argument("instance", type=Path)
    m.add_argument("--policy", choices=POLICIES + BENCHMARKS, default="online_index")
    m.add_argument("--benchmark", choices=BENCHMARKS, default="clairvoyant_index")
    m.add_argument("--workers", type=int, default=1)
    _common(m, reps_default=100)

    r = sub.add_parser("run", help="run a preset experiment")
    r.add_argument("preset", choices=PRESET_NAMES)
    r.add_argument("--horizons", type=int, nargs="+", default=None,
                   help="override the preset's horizon grid")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--eps", type=float, default=0.1, help="low value in dpd_counter")
    _common(r)

    c = sub.add_parser("coupling", help="hindsight coupling diagnostic for a preset")
    c.add_argument("preset", choices=PRESET_NAMES)
    c.add_argument("--horizons", type=int, nargs="+", default=None)
    c.add_argument("--eps", type=float, default=0.1)
    _common(c)

    sub.add_parser("presets", help="list preset names")
    return ap


def _default_nf(inst):
    return np.rint(inst.horizon * inst.arrival_probs).astype(np.int64)


def cmd_solve(args) -> dict:
    inst = load_instance(args.instance)
    if args.nf is not None:
        if len(args.nf) != inst.k:
            raise InstanceError(f"--nf needs {inst.k} counts")
        nf = inst.from_input_order(np.array(args.nf))
    else:
        nf = _default_nf(inst)
    ctx = SolveContext.fresh(inst, nf)
    threshold = None
    if args.mode == "index":
        sol = solve_index(ctx)
        x, threshold = sol.x, sol.threshold
    elif args.mode == "exhaustive-index":
        sol = solve_index_exhaustive(ctx)
        x, threshold = sol.x, sol.threshold
    elif args.mode == "brute":
        x = solve_global_bruteforce(ctx, budget=args.budget)
    else:
        x = solve_global_ascent(ctx, seed=args.seed or 0)
    doc = {"mode": args.mode, "nf": inst.to_input_order(nf), "x": inst.to_input_order(x),
           "objective": objective(ctx, x)}
    if threshold is not None:
        doc["threshold_type"] = int(inst.perm[threshold]) + 1
    print(json.dumps(emit._plain(doc), sort_keys=True))
    if args.out_dir:
        emit.write_json(args.out_dir / "solution.json", doc)
        emit.write_manifest(args.out_dir, "solve", {"instance": inst.to_dict(), "mode": args.mode,
                                                    "budget": args.budget}, {"seed": args.seed})
    return doc


def cmd_simulate(args):
    inst = load_instance(args.instance)
    seed = args.seed or 0
    cfg = ExperimentConfig(inst, (args.policy,), args.benchmark, args.reps, seed,
                           args.budget, args.workers)
    rep = run_replications(cfg)
    rows = emit.report_rows("instance", [rep])
    out = args.out_dir or Path("bench_out") / "simulate"
    emit.write_table(out, "results", emit.SCALING_COLUMNS, rows, args.format)
    emit.write_manifest(out, "simulate",
                        {"instance": inst.to_dict(), "policy": args.policy,
                         "benchmark": args.benchmark, "reps": args.reps, "budget": args.budget},
                        {"seed": seed}, rep.solver_used)
    for row in rows:
        print(f"{row['policy']:>20}  mean {row['mean_obj']:.6f}  loss {row['abs_loss']:.6f}")


def _select(args):
    p = preset(args.preset, eps=args.eps)
    if args.horizons:
        p = p.at_horizons(args.horizons)
    return p


def _seeds(p, args):
    return {"root": p.seed if args.seed is None else args.seed,
            "rule": "grid point i uses root + i"}


def cmd_run(args):
    p = _select(args)
    out = args.out_dir or Path("bench_out") / p.name
    config = {"preset": p.name, "kind": p.kind, "points": [dict(pt) for pt in p.points],
              "policies": list(p.policies), "benchmark": p.benchmark,
              "reps": args.reps or p.reps, "budget": args.budget, "tag": p.tag}
    notes = {k: v for k, v in p.notes.items() if not callable(v)}
    gates = {}
    if p.kind in ("scaling", "sweep"):
        reports = run_scaling(p, args.reps, args.seed, args.workers, args.budget)
        rows = emit.report_rows(p.name, reports)
        emit.write_table(out, "results", emit.SCALING_COLUMNS, rows, args.format)
        for rep in reports:
            for k, v in rep.solver_used.items():
                gates[k] = gates.get(k, 0) + v
        if p.kind == "scaling":
            emit.write_table(out, "plot_rel_loss", emit.LOGLOG_COLUMNS,
                             emit.loglog_rows([r for r in rows if r["policy"] != p.benchmark], "T", "rel_loss"),
                             args.format)
            emit.write_table(out, "plot_abs_loss", emit.LOGLOG_COLUMNS,
                             emit.loglog_rows([r for r in rows if r["policy"] != p.benchmark], "T", "abs_loss"),
                             args.format)
    elif p.kind == "switching":
        rows = run_switching(p, args.seed)
        emit.write_table(out, "results", SWITCH_COLUMNS, rows, args.format)
    else:
        rows = run_index_gap(p)
        emit.write_table(out, "results", GAP_COLUMNS, rows, args.format)
        emit.write_table(out, "plot_gap", emit.LOGLOG_COLUMNS,
                         emit.loglog_rows(rows, "T", "gap", series="B"), args.format)
    emit.write_manifest(out, f"run {p.name}", config, _seeds(p, args), gates, notes)
    print(f"wrote {len(rows)} rows to {out}")


def cmd_coupling(args):
    p = _select(args)
    if p.kind != "scaling":
        raise ValueError(f"coupling needs a horizon-scaling preset, not {p.kind}")
    out = args.out_dir or Path("bench_out") / f"{p.name}_coupling"
    rows = run_coupling(p, args.reps, args.seed)
    emit.write_table(out, "coupling", COUPLING_COLUMNS, rows, args.format)
    emit.write_table(out, "plot_loss_events", emit.LOGLOG_COLUMNS,
                     emit.loglog_rows(rows, "T", "mean_loss_events", series="B"), args.format)
    config = {"preset": p.name, "points": [dict(pt) for pt in p.points], "reps": args.reps or p.reps}
    notes = {k: v for k, v in p.notes.items() if not callable(v)}
    emit.write_manifest(out, f"coupling {p.name}", config, _seeds(p, args), {}, notes)
    print(f"wrote {len(rows)} rows to {out}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            print("\n".join(PRESET_NAMES))
        elif args.command == "solve":
            cmd_solve(args)
        elif args.command == "simulate":
            cmd_simulate(args)
        elif args.command == "run":
            cmd_run(args)
        else:
            cmd_coupling(args)
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except DegeneratePolicyError as exc:
        print(f"degenerate policy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        if isinstance(exc, FileNotFoundError):
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InstanceError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
