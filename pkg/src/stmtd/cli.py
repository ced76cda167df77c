"""Command-line interface: solve, baseline, simulate, sweep, ingest."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .baselines import KINDS, solve_baseline
from .bilevel import build_subproblem, export_miqp, miqp_filename
from .io import load_instance, load_policy, load_recipe, save_instance, synthetic_instance
from .model import GameInstance, InvalidInstanceError, validate_instance
from .nvd import build_instance, parse_cve_records
from .simulator import TRAJECTORY_HEADER, TYPE_MODES, SimConfig, simulate
from .solver import SPAN_MODES, SolverConfig, relative_value_iteration, value_iteration
from .sweep import SOLVERS, SweepRow, parse_list, parse_range, run_sweep, write_csv

log = logging.getLogger("stmtd")


def _grid(spec: str):
    parts = [float(x) for x in spec.split(":")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected lo:hi:step")
    return parts


def _instance_args(p: argparse.ArgumentParser, alpha: bool = True) -> None:
    p.add_argument("instance", help="instance JSON file, or 'synthetic' for the bundled one")
    p.add_argument("--tau-grid", type=_grid, metavar="LO:HI:STEP", help="override the defending-period grid")
    p.add_argument("--gamma", type=float, help="transformation parameter, 0 < gamma < tau_lo")
    if alpha:
        p.add_argument("--alpha", type=float, help="override the migration-cost scale")
    p.add_argument("--zero-attack-time", action="store_true", help="compromise is instantaneous wherever an attack applies")


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--span-mode", choices=SPAN_MODES, default="signed")
    p.add_argument("--max-iterations", type=int, default=10_000)
    p.add_argument("--reference-state", type=int, default=0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rvi", dest="relative", action="store_true", help="relative value iteration")
    g.add_argument("--vi", dest="relative", action="store_false", help="value iteration (default)")
    p.set_defaults(relative=False)


def _load(args) -> GameInstance:
    inst = synthetic_instance() if args.instance == "synthetic" else load_instance(args.instance)
    if getattr(args, "tau_grid", None):
        inst = inst.with_tau_grid(*args.tau_grid)
    if getattr(args, "alpha", None) is not None:
        inst = inst.with_alpha(args.alpha)
    if getattr(args, "gamma", None) is not None:
        inst = inst.replace(gamma=args.gamma)
    if getattr(args, "zero_attack_time", False):
        inst = inst.with_zero_attack_times()
    report = validate_instance(inst)
    if not report.ok:
        raise InvalidInstanceError("; ".join(report.violations))
    return inst


def _config(args, trace: bool = False) -> SolverConfig:
    return SolverConfig(
        epsilon=args.epsilon,
        max_iterations=args.max_iterations,
        reference_state=args.reference_state,
        span_mode=args.span_mode,
        gamma=getattr(args, "gamma", None),
        trace=trace,
    )


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    inst = _load(args)
    cfg = _config(args, trace=bool(args.trace))
    run = relative_value_iteration if args.relative else value_iteration
    rep = run(inst, cfg)
    _emit(json.dumps(rep.to_dict(), indent=2) + "\n", args.out)
    row = SweepRow(
        "MSG", inst.alpha, rep.lam, rep.policy.tau.tolist(), rep.iterations, rep.epsilon_certificate, rep.wall_time_ms
    )
    summary = sys.stderr if not args.csv else open(args.csv, "w", encoding="utf-8")
    try:
        write_csv([row], summary)
    finally:
        if args.csv:
            summary.close()
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "span"] + [f"V_{s}" for s in inst.states])
            for t in rep.trace:
                w.writerow([t.iteration, repr(t.span)] + [repr(v) for v in t.V])
    if args.export_miqp:
        out = Path(args.export_miqp)
        out.mkdir(parents=True, exist_ok=True)
        kappa = cfg.kappa_schedule(max(rep.iterations - 1, 0))
        base = rep.W if rep.W is not None else rep.V
        for i in range(inst.n):
            for t in inst.tau_grid():
                sub = build_subproblem(inst, i, float(t), kappa, base, cfg.gamma)
                (out / miqp_filename(sub)).write_text(export_miqp(sub), encoding="utf-8")
    if not rep.converged:
        log.warning("did not converge within %d iterations (last span %g)", rep.iterations, rep.epsilon_certificate)
        return 2
    return 0


def cmd_baseline(args) -> int:
    inst = _load(args)
    sol = solve_baseline(inst, args.kind, args.tau, zero_attack_time=False)
    _emit(json.dumps(sol.to_dict(), indent=2) + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    inst = _load(args)
    policy = load_policy(args.policy)
    cfg = SimConfig(
        periods=args.periods, episodes=args.episodes, seed=args.seed, type_mode=args.type_mode, trajectory=bool(args.trajectory)
    )
    res = simulate(inst, policy, cfg)
    out = {
        "empirical_avg_cost": res.empirical_avg_cost,
        "std_error": res.std_error,
        "compromise_fraction": res.compromise_fraction,
        "per_state_avg_cost": [None if np.isnan(x) else x for x in res.per_state_avg_cost],
        "migration_count": res.migration_count.tolist(),
        "attack_histogram": res.attack_histogram,
        "total_time": res.total_time,
    }
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    if args.trajectory:
        with open(args.trajectory, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_HEADER)
            w.writerows(res.trajectory)
    return 0


def cmd_sweep(args) -> int:
    inst = _load(args)
    solvers = [s.strip().upper() for s in args.solvers.split(",") if s.strip()]
    bad = [s for s in solvers if s not in SOLVERS]
    if bad:
        raise SystemExit(f"unknown solvers {bad}; choose from {', '.join(SOLVERS)}")
    cfg = _config(args)
    if args.alpha_range is not None:
        rows = run_sweep(inst, alphas=parse_range(args.alpha_range), solvers=solvers, cfg=cfg, relative=args.relative, tau_fixed=args.tau)
    else:
        rows = run_sweep(
            inst, updating_costs=parse_list(args.updating_cost), solvers=solvers, cfg=cfg, relative=args.relative, tau_fixed=args.tau
        )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    return 1 if any(r.error for r in rows) else 0


def cmd_ingest(args) -> int:
    recipe = load_recipe(args.recipe)
    if args.seed is not None:
        recipe.seed = args.seed
    parsed = parse_cve_records(args.nvd, recipe.technology_keywords())
    inst = build_instance(parsed.records, recipe)
    save_instance(inst, args.out)
    log.info(
        "%d records used, %d skipped without scores, %d skipped without a technology match",
        len(parsed),
        parsed.skipped_unscored,
        parsed.skipped_unmatched,
    )
    print(f"wrote {args.out}: {inst.n} states, {len(inst.types)} types, {len(inst.attacks)} attacks")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stmtd", description="Spatial-temporal moving target defense solver")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress details")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="optimal MSG policy by (relative) value iteration")
    _instance_args(p)
    _solver_args(p)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--csv", help="write the CSV summary here instead of stderr")
    p.add_argument("--trace", metavar="CSV", help="write per-iteration span and values")
    p.add_argument("--export-miqp", metavar="DIR", help="write every (state, period) subproblem at the final values")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("baseline", parents=[common], help="URS / BSG comparison policies")
    _instance_args(p)
    p.add_argument("--kind", required=True, type=str.upper, choices=KINDS)
    p.add_argument("--tau", type=float, default=1.0, help="period for the fixed-period kinds")
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo replay of a policy")
    _instance_args(p)
    p.add_argument("--policy", required=True, help="policy JSON (P and tau) or a solve report")
    p.add_argument("--periods", type=int, default=100_000)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--type-mode", choices=TYPE_MODES, default="sample-per-episode")
    p.add_argument("--trajectory", metavar="CSV", help="dump one row per period")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="solve across alpha or updating-cost values")
    _instance_args(p, alpha=False)
    _solver_args(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--alpha", dest="alpha_range", metavar="A0:A1:STEP")
    g.add_argument("--updating-cost", metavar="LIST", help="comma-separated diagonal migration costs")
    p.add_argument("--solvers", default="MSG,BSG,URS")
    p.add_argument("--tau", type=float, default=1.0, help="period for BSG and URS")
    p.add_argument("--seed", type=int, default=0, help="accepted for reproducible pipelines; solvers are deterministic")
    p.add_argument("--out", help="CSV file (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ingest", parents=[common], help="build an instance from NVD records and a recipe")
    p.add_argument("--nvd", required=True)
    p.add_argument("--recipe", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="override the recipe's sampling seed")
    p.set_defaults(func=cmd_ingest)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InvalidInstanceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
