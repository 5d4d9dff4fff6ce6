"""Command-line interface.

Subcommands (each writes ``<out>/<name>.csv``, ``<name>.png`` and a
``<name>.manifest.json`` sidecar):

* ``sweep-current``    charge current and energy flows over a hot-temperature range
* ``precision-curve``  error budget and single-shot bounds over a cold-temperature range
* ``qfi-compare``      current-measurement precision against the optimal bound
* ``protocol``         seeded zero-current search runs with summary statistics

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
``QTM_THREADS`` caps worker parallelism for model sweeps.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError
from .fock import FockCutoff, choose_cutoff, observables, steady_state, \
    build_liouvillian, dump_operators
from .gaussian import GaussianParams, mean_current
from .protocol import (ProtocolConfig, current_at, precision_curve,
                       run_protocol_ensemble)
from .reporting import RunManifest, SCHEMA_VERSION, write_sidecar, write_table
from .units import (BathState, RunConfig, carnot_hot_temperature,
                    default_config, load_config)
from . import figures

NAN = math.nan


def _worker_count() -> int:
    env = os.environ.get("QTM_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"QTM_THREADS must be an integer, got {env!r}") from exc
    return min(4, os.cpu_count() or 1)


def _parallel_map(fn, items, heavy: bool = False):
    """Map preserving input order; dispatches concurrently when allowed.

    ``heavy`` caps the workers at 2: concurrent sparse factorizations of
    large generators are memory-bound, not CPU-bound.
    """
    items = list(items)
    workers = _worker_count()
    if heavy:
        workers = min(workers, 2)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _load(args) -> RunConfig:
    if args.config is None:
        return default_config()
    return load_config(args.config)


def _grid(lo: float, hi: float, n: int) -> np.ndarray:
    if n < 0:
        raise ConfigError("--grid must be non-negative")
    if n == 0:
        return np.empty(0)
    if n == 1:
        return np.array([lo])
    return np.linspace(lo, hi, n)


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _explicit_cutoff(args) -> FockCutoff | None:
    if args.cutoff_c is None and args.cutoff_h is None:
        return None
    if args.cutoff_c is None or args.cutoff_h is None:
        raise ConfigError("--cutoff-c and --cutoff-h must be given together")
    try:
        return FockCutoff(args.cutoff_c, args.cutoff_h)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_sweep_current(args) -> int:
    run = _load(args)
    out = _outdir(args)
    tc_mk = args.tc_mk if args.tc_mk is not None else run.tc_mk
    th_grid = _grid(args.th_min_mk, args.th_max_mk, args.grid)
    want_fock = args.model in ("fock", "both")
    want_gauss = args.model in ("gaussian", "both")

    cutoff = _explicit_cutoff(args)
    if want_fock and cutoff is None and len(th_grid):
        th_top = float(th_grid.max())
        hottest = BathState.from_mk(run.params, tc_mk, th_top)
        try:
            cutoff = choose_cutoff(run.params, hottest, hard_cap=args.cutoff_cap)
        except NumericalError as exc:
            raise NumericalError(f"T_h = {th_top:g} mK: {exc}") from exc

    gp = GaussianParams.from_machine(run.params, run.g_fit_ratio)

    def solve_point(th_mk: float):
        th_mk = float(th_mk)
        baths = BathState.from_mk(run.params, tc_mk, th_mk)
        i_gauss = mean_current(gp, baths) if want_gauss else NAN
        if not want_fock:
            return (th_mk, NAN, i_gauss, NAN, NAN, NAN)
        try:
            obs = observables(steady_state(
                build_liouvillian(run.params, baths, cutoff)),
                run.params, baths, cutoff)
        except NumericalError as exc:
            raise NumericalError(f"T_h = {th_mk:g} mK: {exc}") from exc
        return (th_mk, obs.charge_current_pa, i_gauss,
                obs.heat_current_c_aw, obs.heat_current_h_aw, obs.power_aw)

    rows = _parallel_map(solve_point, th_grid, heavy=want_fock)

    if args.debug_dump and cutoff is not None:
        dump_operators(run.params, BathState.from_mk(run.params, tc_mk,
                                                     float(th_grid.max()) if len(th_grid) else tc_mk),
                       cutoff, os.path.join(out, "operators"))

    manifest = RunManifest(
        command="sweep_current", schema=SCHEMA_VERSION, config=run,
        artifact_version=__version__,
        extra={"model": args.model, "tc_mk": tc_mk,
               "th_min_mk": args.th_min_mk, "th_max_mk": args.th_max_mk,
               "grid": args.grid,
               "cutoff": f"({cutoff.n_max_c},{cutoff.n_max_h})" if cutoff else "none"})
    csv_path = os.path.join(out, "sweep_current.csv")
    write_table(csv_path, ["th_mk", "i_pa_fock", "i_pa_gaussian",
                           "jc_aw", "jh_aw", "p_aw"], rows, manifest)
    manifest.outputs.append(
        figures.sweep_current_figure(rows, os.path.join(out, "sweep_current.png"), tc_mk))
    write_sidecar(csv_path, manifest)
    return 0


def cmd_precision_curve(args) -> int:
    run = _load(args)
    out = _outdir(args)
    tc_grid = _grid(args.tc_min_mk, args.tc_max_mk, args.grid)
    include_fock = args.model in ("fock", "both")

    def solve_point(tc_mk: float):
        tc_mk = float(tc_mk)
        try:
            row = precision_curve(run, [tc_mk], include_fock=include_fock)[0]
        except NumericalError as exc:
            raise NumericalError(f"T_c = {tc_mk:g} mK: {exc}") from exc
        return (row.tc_mk, row.budget_total_mk, row.budget_current_mk,
                row.budget_temperature_mk, row.single_shot_current_mk,
                row.single_shot_qfi_mk, row.budget_total_fock_mk,
                row.budget_current_fock_mk)

    rows = _parallel_map(solve_point, tc_grid, heavy=include_fock)

    manifest = RunManifest(
        command="precision_curve", schema=SCHEMA_VERSION, config=run,
        artifact_version=__version__,
        extra={"model": args.model, "tc_min_mk": args.tc_min_mk,
               "tc_max_mk": args.tc_max_mk, "grid": args.grid})
    csv_path = os.path.join(out, "precision_curve.csv")
    write_table(csv_path,
                ["tc_mk", "dtc_total_mk", "dtc_current_mk", "dtc_temperature_mk",
                 "dtc_single_shot_current_mk", "dtc_qfi_mk",
                 "dtc_total_fock_mk", "dtc_current_fock_mk"], rows, manifest)
    manifest.outputs.append(
        figures.precision_curve_figure(rows, os.path.join(out, "precision_curve.png")))
    write_sidecar(csv_path, manifest)
    return 0


def cmd_qfi_compare(args) -> int:
    run = _load(args)
    out = _outdir(args)
    tc_grid = _grid(args.tc_min_mk, args.tc_max_mk, args.grid)

    def solve_point(tc_mk: float):
        tc_mk = float(tc_mk)
        try:
            row = precision_curve(run, [tc_mk])[0]
        except NumericalError as exc:
            raise NumericalError(f"T_c = {tc_mk:g} mK: {exc}") from exc
        return (row.tc_mk, row.single_shot_current_mk, row.single_shot_qfi_mk)

    rows = _parallel_map(solve_point, tc_grid)

    manifest = RunManifest(
        command="qfi_compare", schema=SCHEMA_VERSION, config=run,
        artifact_version=__version__,
        extra={"tc_min_mk": args.tc_min_mk, "tc_max_mk": args.tc_max_mk,
               "grid": args.grid})
    csv_path = os.path.join(out, "qfi_compare.csv")
    write_table(csv_path, ["tc_mk", "dtc_current_mk", "dtc_qfi_mk"],
                rows, manifest)
    manifest.outputs.append(
        figures.qfi_compare_figure(rows, os.path.join(out, "qfi_compare.png")))
    write_sidecar(csv_path, manifest)
    return 0


def cmd_protocol(args) -> int:
    run = _load(args)
    out = _outdir(args)
    tc_mk = args.tc_mk if args.tc_mk is not None else run.tc_mk

    if args.th_min_mk is not None or args.th_max_mk is not None:
        if args.th_min_mk is None or args.th_max_mk is None:
            raise ConfigError("--th-min-mk and --th-max-mk must be given together")
        config = ProtocolConfig(
            run=run, tc_true_mk=tc_mk,
            th_bracket_mk=(args.th_min_mk, args.th_max_mk),
            seed=args.seed, model=args.model,
            readings_per_point=args.readings_per_point,
            tolerance_mk=args.bisect_tol_mk)
    else:
        if run.noise.delta_i_pa > 0.0:
            config = ProtocolConfig.for_budget_validation(
                run, tc_true_mk=tc_mk, seed=args.seed, model=args.model)
        else:
            center = carnot_hot_temperature(tc_mk, run.params)
            config = ProtocolConfig(
                run=run, tc_true_mk=tc_mk,
                th_bracket_mk=(0.75 * center, 1.35 * center),
                seed=args.seed, model=args.model,
                readings_per_point=args.readings_per_point,
                tolerance_mk=args.bisect_tol_mk)

    summary = run_protocol_ensemble(config, runs=args.runs,
                                    master_seed=args.seed)
    run_rows = [("run", i, r.seed, r.th_located_mk, r.tc_estimate_mk,
                 r.iterations, r.stop_reason, NAN, NAN, NAN, NAN)
                for i, r in enumerate(summary.results)]
    summary_row = ("summary", len(run_rows), args.seed, NAN,
                   summary.mean_tc_mk, 0, "", summary.mean_tc_mk,
                   summary.std_tc_mk, summary.bias_mk,
                   summary.predicted.total_mk)
    rows = run_rows + [summary_row]

    manifest = RunManifest(
        command="protocol", schema=SCHEMA_VERSION, config=run,
        artifact_version=__version__, seed=args.seed,
        extra={"model": config.model, "tc_true_mk": tc_mk,
               "runs": args.runs,
               "bracket_mk": f"({config.th_bracket_mk[0]:.6g},"
                             f"{config.th_bracket_mk[1]:.6g})",
               "tolerance_mk": config.tolerance_mk,
               "readings_per_point": config.readings_per_point})
    csv_path = os.path.join(out, "protocol.csv")
    write_table(csv_path,
                ["kind", "run_index", "seed", "th_located_mk", "tc_estimate_mk",
                 "iterations", "stop_reason", "mean_tc_mk", "std_tc_mk",
                 "bias_mk", "predicted_dtc_mk"], rows, manifest)
    manifest.outputs.append(
        figures.protocol_figure(run_rows, summary,
                                os.path.join(out, "protocol.png"), tc_mk))
    write_sidecar(csv_path, manifest)

    print(f"runs = {summary.runs}  mean = {summary.mean_tc_mk:.4f} mK  "
          f"std = {summary.std_tc_mk:.4f} mK  "
          f"predicted = {summary.predicted.total_mk:.4f} mK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtherm",
        description="Thermometry with a two-oscillator Josephson thermal machine")
    parser.add_argument("--version", action="version",
                        version=f"qtherm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None,
                       help="key=value configuration file (default: bundled)")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("sweep-current",
                       help="current and energy flows over a hot-temperature range")
    common(p)
    p.add_argument("--model", choices=("fock", "gaussian", "both"), default="both")
    p.add_argument("--tc-mk", type=float, default=None)
    p.add_argument("--th-min-mk", type=float, default=100.0)
    p.add_argument("--th-max-mk", type=float, default=200.0)
    p.add_argument("--grid", type=int, default=21)
    p.add_argument("--cutoff-c", type=int, default=None,
                   help="explicit cold-mode Fock cutoff (skip auto-choice)")
    p.add_argument("--cutoff-h", type=int, default=None)
    p.add_argument("--cutoff-cap", type=int, default=40,
                   help="hard cap per mode for the automatic cutoff search")
    p.add_argument("--debug-dump", action="store_true",
                   help="dump model operators as plain-text matrices")
    p.set_defaults(func=cmd_sweep_current)

    p = sub.add_parser("precision-curve",
                       help="error budget over a cold-temperature range")
    common(p)
    p.add_argument("--model", choices=("fock", "gaussian", "both"),
                   default="gaussian",
                   help="'both'/'fock' adds full-model budget columns; the "
                        "auto-chosen Fock cutoff grows quickly with tc-max")
    p.add_argument("--tc-min-mk", type=float, default=15.0)
    p.add_argument("--tc-max-mk", type=float, default=100.0)
    p.add_argument("--grid", type=int, default=18)
    p.set_defaults(func=cmd_precision_curve)

    p = sub.add_parser("qfi-compare",
                       help="single-shot precision against the optimal bound")
    common(p)
    p.add_argument("--tc-min-mk", type=float, default=10.0)
    p.add_argument("--tc-max-mk", type=float, default=100.0)
    p.add_argument("--grid", type=int, default=46)
    p.set_defaults(func=cmd_qfi_compare)

    p = sub.add_parser("protocol",
                       help="seeded zero-current search runs")
    common(p)
    p.add_argument("--model", choices=("fock", "gaussian"), default="gaussian")
    p.add_argument("--tc-mk", type=float, default=None)
    p.add_argument("--th-min-mk", type=float, default=None,
                   help="bracket low end (default: budget-validation bracket)")
    p.add_argument("--th-max-mk", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--readings-per-point", type=int, default=1)
    p.add_argument("--bisect-tol-mk", type=float, default=0.05)
    p.set_defaults(func=cmd_protocol)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
