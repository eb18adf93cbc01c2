"""Command-line front end.

Subcommands cover the full workflow: fit laws to run tables, compare
variants, analyze residuals, solve allocations and frontiers, locate
crossover budgets, generate synthetic sweeps, and rerun the published-vs-
refit base comparison.  Fitted laws are persisted as small JSON files so
allocation and crossover never silently refit.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from typing import Optional

import numpy as np

from . import analysis, data
from .allocate import (
    AllocationQuery,
    continuous_epoch_candidates,
    find_crossover,
    solve_allocation,
    trace_frontier,
)
from .errors import RepscaleError
from .fit import FitConfig, fit_phase1, fit_phase2
from .laws import LAW_KINDS
from .reference import REFERENCE_SPECS

LAW_CHOICES = list(LAW_KINDS)


def _add_common_out(p: argparse.ArgumentParser):
    p.add_argument("--out", help="output file for machine-readable records")
    p.add_argument(
        "--format",
        choices=("table", "records"),
        default="table",
        help="stdout format (default: table)",
    )


def _emit(rows, args) -> None:
    if args.out:
        data.write_report(rows, args.out, fmt="records")
    if args.format == "table":
        print(data.render_table(rows))
    else:
        import json

        rows = rows if isinstance(rows, (list, tuple)) else [rows]
        for row in rows:
            print(json.dumps(data._row_to_dict(row)))


def _epoch_candidates(args) -> tuple:
    if getattr(args, "continuous", False):
        return continuous_epoch_candidates(args.epochs_max)
    return tuple(range(1, int(args.epochs_max) + 1))


def _compute_grid(args) -> np.ndarray:
    return np.geomspace(args.c_min, args.c_max, args.c_points)


def _fit_config(args) -> FitConfig:
    return FitConfig(huber_delta=args.huber_delta)


def _load_runs(args) -> list:
    ds = data.load_native_csv(args.data)
    return list(ds.records)


def cmd_fit(args) -> int:
    runs = _load_runs(args)
    cfg = _fit_config(args)
    single = [r for r in runs if r.point.epochs == 1]

    # With --phase 1 the report stays at the base law regardless of --law.
    report = fit_phase1(single, cfg)
    if args.phase != "1" and args.law != "chinchilla":
        report = fit_phase2(report.spec.base, args.law, runs, cfg)

    if args.out:
        data.write_report(report, args.out, fmt="records")
    if args.spec_out:
        data.save_law_spec(report.spec, args.spec_out)
    print(data.render_table(report))

    if args.boot:
        base = report.spec.base

        def procedure(resampled):
            if args.law == "chinchilla" or args.phase == "1":
                fitted = fit_phase1([r for r in resampled if r.point.epochs == 1], cfg)
                return dataclasses.asdict(fitted.spec.base)
            fitted = fit_phase2(base, args.law, resampled, cfg)
            return dataclasses.asdict(fitted.spec.rep)

        boot = analysis.bootstrap_fit(runs, procedure, args.boot, args.seed)
        rows = [
            {"parameter": k, "estimate": boot.point_estimate[k], "mad": boot.mad[k]}
            for k in boot.point_estimate
        ]
        print(data.render_table(rows))
        if args.boot_out:
            data.write_report(rows, args.boot_out, fmt="records")
    return 0


def cmd_compare(args) -> int:
    runs = _load_runs(args)
    cfg = _fit_config(args)
    single = [r for r in runs if r.point.epochs == 1]
    base = fit_phase1(single, cfg).spec.base
    rows = []
    for law in args.law:
        try:
            rep = fit_phase2(base, law, runs, cfg)
            row = {"law": law}
            row.update(rep.metrics)
            row.update({f"param_{k}": v for k, v in dataclasses.asdict(rep.spec.rep).items()})
            rows.append(row)
        except RepscaleError as exc:
            print(f"warning: {law} fit failed: {exc}", file=sys.stderr)
            rows.append({"law": law, "error": str(exc)})
    _emit(rows, args)
    return 0


def cmd_residuals(args) -> int:
    runs = _load_runs(args)
    if args.spec:
        base = data.load_law_spec(args.spec).base
    else:
        base = fit_phase1([r for r in runs if r.point.epochs == 1], _fit_config(args)).spec.base
    cells = analysis.compute_residuals(base, runs)
    power = analysis.fit_shared_power(cells)
    rows = [
        {
            "n_params": n,
            "u_tokens": u,
            "coefficient": p,
            "shared_exponent": power.delta,
            "excluded_points": power.n_excluded,
        }
        for (n, u), p in sorted(power.p_per_cell.items())
    ]
    _emit(rows, args)
    return 0


def cmd_allocate(args) -> int:
    spec = data.load_law_spec(args.spec[0])
    q = AllocationQuery(compute=args.C, u_tokens=args.U, epoch_candidates=_epoch_candidates(args))
    point = solve_allocation(spec, q)
    _emit([dataclasses.asdict(point)], args)
    return 0


def cmd_frontier(args) -> int:
    spec = data.load_law_spec(args.spec[0])
    points = trace_frontier(
        spec, args.U, _compute_grid(args), epoch_candidates=_epoch_candidates(args)
    )
    _emit([dataclasses.asdict(p) for p in points], args)
    return 0


def cmd_crossover(args) -> int:
    if len(args.spec) != 2:
        raise RepscaleError("crossover needs exactly two --spec files (baseline, challenger)")
    spec_a = data.load_law_spec(args.spec[0])
    spec_b = data.load_law_spec(args.spec[1])
    c = find_crossover(
        spec_a, spec_b, args.U, (args.c_min, args.c_max), epoch_candidates=_epoch_candidates(args)
    )
    _emit([{"u_tokens": args.U, "crossover_compute": c}], args)
    return 0


def cmd_synth(args) -> int:
    if args.spec:
        law = data.load_law_spec(args.spec[0])
    elif args.ref:
        law = REFERENCE_SPECS[args.ref]
    else:
        raise RepscaleError("synth needs --spec or --ref to define the generating law")
    grid = data.preset_grid(args.preset)
    ds = data.generate_synthetic(
        data.SyntheticSpec(
            generating_law=law, grid=grid, noise_sigma=args.sigma, seed=args.seed
        )
    )
    data.write_native_csv(ds, args.out)
    print(f"wrote {len(ds)} records to {args.out}")
    return 0


def cmd_reanalyze(args) -> int:
    runs = _load_runs(args)
    published = data.load_published_params(args.published)
    rows = analysis.compare_bases(published, runs, args.law, _fit_config(args))
    _emit(rows, args)

    if args.U:
        single = [r for r in runs if r.point.epochs == 1]
        refit = fit_phase1(single, _fit_config(args)).spec.base
        grid = _compute_grid(args)
        candidates = _epoch_candidates(args)
        for label, base in (("published", published), ("refit", refit)):
            spec = fit_phase2(base, args.law, runs, _fit_config(args)).spec
            points = trace_frontier(spec, args.U, grid, epoch_candidates=candidates)
            table = [dict(condition=label, **dataclasses.asdict(p)) for p in points]
            print(data.render_table(table))
            if args.out:
                data.write_report(table, f"{args.out}.frontier-{label}", fmt="records")
    return 0


def cmd_report(args) -> int:
    rows = data.read_report(args.input)
    print(data.render_table(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repscale",
        description="Fit data-constrained scaling laws and solve compute-optimal allocations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        p = sub.add_parser(
            name, help=help, formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )
        p.set_defaults(fn=fn)
        return p

    p = add("fit", cmd_fit, "two-phase fit of a law variant to a run table")
    p.add_argument("--data", required=True, help="native run-record CSV")
    p.add_argument("--law", choices=LAW_CHOICES, default="add4", help="repetition law variant")
    p.add_argument("--phase", choices=("1", "both"), default="both", help="fit phases to run")
    p.add_argument("--huber-delta", type=float, default=1e-3, help="Huber transition width")
    p.add_argument("--boot", type=int, default=0, help="bootstrap resamples (0 disables)")
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    p.add_argument("--out", help="fit report output file")
    p.add_argument("--spec-out", help="fitted law spec output file")
    p.add_argument("--boot-out", help="bootstrap table output file")

    p = add("compare", cmd_compare, "fit several variants over a shared base law")
    p.add_argument("--data", required=True, help="native run-record CSV")
    p.add_argument(
        "--law",
        choices=LAW_CHOICES,
        action="append",
        default=None,
        help="variant to include (repeatable; default: all)",
    )
    p.add_argument("--huber-delta", type=float, default=1e-3, help="Huber transition width")
    _add_common_out(p)

    p = add("residuals", cmd_residuals, "repetition excess-loss power-law analysis")
    p.add_argument("--data", required=True, help="native run-record CSV")
    p.add_argument("--spec", action="append", default=None, help="base law spec file (else refit)")
    p.add_argument("--huber-delta", type=float, default=1e-3, help="Huber transition width")
    _add_common_out(p)

    p = add("allocate", cmd_allocate, "optimal model size and epochs for one budget")
    p.add_argument("--spec", action="append", required=True, help="fitted law spec file")
    p.add_argument("--C", type=float, required=True, help="training compute budget in FLOPs")
    p.add_argument("--U", type=float, required=True, help="unique token budget")
    p.add_argument("--epochs-max", type=float, default=64, help="largest epoch candidate")
    p.add_argument("--continuous", action="store_true", help="fractional epoch candidates")
    _add_common_out(p)

    p = add("frontier", cmd_frontier, "allocation frontier over a compute grid")
    p.add_argument("--spec", action="append", required=True, help="fitted law spec file")
    p.add_argument("--U", type=float, required=True, help="unique token budget")
    p.add_argument("--c-min", type=float, default=1e17, help="smallest compute budget")
    p.add_argument("--c-max", type=float, default=1e21, help="largest compute budget")
    p.add_argument("--c-points", type=int, default=60, help="log-spaced grid size")
    p.add_argument("--epochs-max", type=float, default=64, help="largest epoch candidate")
    p.add_argument("--continuous", action="store_true", help="fractional epoch candidates")
    _add_common_out(p)

    p = add("crossover", cmd_crossover, "compute budget where the second law overtakes the first")
    p.add_argument(
        "--spec", action="append", required=True, help="fitted law spec file (give twice: a, b)"
    )
    p.add_argument("--U", type=float, required=True, help="unique token budget")
    p.add_argument("--c-min", type=float, default=1e17, help="search range lower bound")
    p.add_argument("--c-max", type=float, default=1e21, help="search range upper bound")
    p.add_argument("--epochs-max", type=float, default=64, help="largest epoch candidate")
    p.add_argument("--continuous", action="store_true", help="fractional epoch candidates")
    _add_common_out(p)

    p = add("synth", cmd_synth, "generate a synthetic sweep from a known law")
    p.add_argument("--preset", required=True, choices=data.PRESET_NAMES, help="sweep grid preset")
    p.add_argument("--spec", action="append", default=None, help="generating law spec file")
    p.add_argument(
        "--ref", choices=sorted(REFERENCE_SPECS), default=None, help="built-in reference law"
    )
    p.add_argument("--sigma", type=float, default=0.0, help="log-space noise std dev")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--out", required=True, help="output CSV path")

    p = add("reanalyze", cmd_reanalyze, "published-vs-refit base comparison and frontiers")
    p.add_argument("--data", required=True, help="native run-record CSV")
    p.add_argument("--published", required=True, help="JSON file of published base constants")
    p.add_argument("--law", choices=LAW_CHOICES, default="eff-param", help="repetition variant")
    p.add_argument("--U", type=float, default=None, help="unique budget for frontier output")
    p.add_argument("--c-min", type=float, default=1e17, help="frontier grid lower bound")
    p.add_argument("--c-max", type=float, default=1e21, help="frontier grid upper bound")
    p.add_argument("--c-points", type=int, default=40, help="frontier grid size")
    p.add_argument("--epochs-max", type=float, default=64, help="largest epoch candidate")
    p.add_argument("--continuous", action="store_true", help="fractional epoch candidates")
    p.add_argument("--huber-delta", type=float, default=1e-3, help="Huber transition width")
    _add_common_out(p)

    p = add("report", cmd_report, "render a machine-readable records file as a table")
    p.add_argument("--input", required=True, help="records file written by another subcommand")

    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "compare" and args.law is None:
        args.law = [k for k in LAW_CHOICES if k != "chinchilla"]
    try:
        return args.fn(args)
    except (RepscaleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
