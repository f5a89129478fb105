"""Command-line interface: run scenarios, convergence studies, benchmarks.

Subcommands
    run          execute a scenario (or sweep) and export CSV + report files
    convergence  rerun one scenario over a list of resolutions and tabulate errors
    bench        time the fast and dense operator paths over a list of J
    check        report the maximum-principle margin of a scenario

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import Snapshot, error_norms, exact_levy_density, snapshots_of
from .discretize import BoundaryCondition
from .operators import FastWorkspace, apply_A
from .scenarios import (ConfigError, ScenarioConfig, figure_recipe, named_recipe,
                        parse_config)
from .stepping import SolverError, check_max_principle_condition, forward_euler_step, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

WORKERS_ENV = "LEVYFPE_WORKERS"


def _format_float(x: float) -> str:
    return f"{x:.17g}"


def _write_snapshot_csv(path: Path, snap: Snapshot) -> None:
    lines = ["x,p"]
    lines += [f"{_format_float(x)},{_format_float(p)}"
              for x, p in zip(snap.x_nodes, snap.p_values)]
    path.write_text("\n".join(lines) + "\n")


def _write_long_csv(path: Path, snaps: list[Snapshot]) -> None:
    lines = ["t,x,p"]
    for snap in snaps:
        t_txt = _format_float(snap.t)
        lines += [f"{t_txt},{_format_float(x)},{_format_float(p)}"
                  for x, p in zip(snap.x_nodes, snap.p_values)]
    path.write_text("\n".join(lines) + "\n")


def _config_echo(cfg: ScenarioConfig) -> dict:
    drift = cfg.drift
    return {
        "alpha": cfg.alpha, "beta": cfg.beta, "epsilon": cfg.epsilon,
        "sigma": cfg.sigma, "b": cfg.b, "J": cfg.J, "dt": cfg.dt_value,
        "t_final": cfg.t_final,
        "drift": "zero" if drift.kind == "zero" else
                 (f"linear:{drift.slope:g}" if drift.kind == "linear" else "tabulated"),
        "bc": cfg.bc.value, "ic": cfg.ic.describe(), "scheme": cfg.scheme,
        "solver": cfg.resolved_solver(), "mode": cfg.mode,
        "snapshot_times": list(cfg.snapshot_times),
    }


def execute_entry(label: str, cfg: ScenarioConfig, out_dir: str) -> dict:
    """Run one resolved scenario and write its snapshot files and report."""
    run_dir = Path(out_dir) / label if label else Path(out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    captured: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        op = cfg.build_operator()
        captured += [str(w.message) for w in caught]

    ic = cfg.initial_values(op)
    stepper = cfg.stepper_config()
    traj = run(op, ic, stepper)

    requested = set(cfg.snapshot_times) if cfg.snapshot_times else {cfg.t_final}
    snaps = [s for s in snapshots_of(traj)
             if any(abs(s.t - t) <= 1e-12 * max(1.0, abs(t)) for t in requested)]
    for snap in snaps:
        _write_snapshot_csv(run_dir / f"snap_t{snap.t:.6f}.csv", snap)
    if "long" in cfg.formats:
        _write_long_csv(run_dir / "long.csv", snaps)

    satisfied, margin = check_max_principle_condition(op)
    snap_min = min(e.vmin for e in traj.entries)
    if snap_min < -1e-12:
        captured.append(f"negativity in snapshots: min value {snap_min:.3e}")
    elif traj.global_min < -1e-12:
        captured.append(
            f"negativity at intermediate steps: min value {traj.global_min:.3e}")
    if cfg.bc == BoundaryCondition.ABSORBING:
        increase = float(np.max(np.diff(traj.per_step_mass), initial=0.0))
        if increase > 1e-8:
            captured.append(f"mass increased by {increase:.3e} during an "
                            "absorbing-condition run")
    if cfg.scheme == "forward_euler":
        captured.append("forward Euler is not positivity-preserving")

    report = {
        "config": _config_echo(cfg),
        "label": label,
        "grid": {"J": cfg.J, "h": 1.0 / cfg.J, "unknowns": op.n},
        "max_principle": {"satisfied": satisfied, "margin": margin},
        "positivity_preserving": cfg.scheme == "backward_euler",
        "snapshots": [
            {"t": e.t, "mass": e.mass, "min": e.vmin, "max": e.vmax,
             "argmax_index": e.argmax_index,
             "argmax_x": float(traj.x_nodes[e.argmax_index])}
            for e in traj.entries
        ],
        "global_min": traj.global_min,
        "global_max": traj.global_max,
        "mass_monotone": bool(np.all(np.diff(traj.per_step_mass) <= 1e-8)),
        "timing": {
            "steps": int(len(traj.step_seconds)),
            "total_seconds": float(np.sum(traj.step_seconds)),
            "median_step_seconds": (float(np.median(traj.step_seconds))
                                    if len(traj.step_seconds) else 0.0),
        },
        "solver_iterations": (
            {"median": float(np.median(traj.solver_iterations)),
             "max": int(np.max(traj.solver_iterations))}
            if traj.solver_iterations else None),
        "warnings": captured,
    }
    (run_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def _execute_entry_star(item: tuple[str, ScenarioConfig, str]) -> dict:
    return execute_entry(*item)


def cmd_run(args: argparse.Namespace) -> int:
    entries = _load_entries(args)
    out_dir = Path(args.out)
    if out_dir.exists() and not out_dir.is_dir():
        raise OSError(f"output path {out_dir} exists and is not a directory")
    out_dir.mkdir(parents=True, exist_ok=True)

    workers = int(os.environ.get(WORKERS_ENV, args.workers))
    items = [(label, cfg, str(out_dir)) for label, cfg in entries]
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_execute_entry_star, items))
    else:
        reports = [_execute_entry_star(item) for item in items]

    for report in reports:
        final = report["snapshots"][-1]
        flag = "" if report["max_principle"]["satisfied"] else " [m2 < 0]"
        warn = f"  warnings: {len(report['warnings'])}" if report["warnings"] else ""
        label = report["label"] or "run"
        print(f"{label}: t={final['t']:g} mass={final['mass']:.6f} "
              f"min={final['min']:.3e} margin={report['max_principle']['margin']:.4f}"
              f"{flag}{warn}")
    return EXIT_OK


def convergence_table(cfg: ScenarioConfig, j_list: list[int],
                      x_min: float | None, x_max: float | None) -> list[dict]:
    """Errors of one scenario across resolutions.

    Scenarios started from the exact skewed-Levy density are compared with
    that density at the final time; anything else is compared with a run at
    four times the finest resolution, interpolated onto each grid.
    """
    exact_mode = cfg.ic.kind == "levy_exact"
    if exact_mode:
        t_exact = cfg.ic.t0 + cfg.t_final
        reference = lambda x: exact_levy_density(x, t_exact)
        lo = 0.0 if x_min is None else x_min
        hi = 5.0 if x_max is None else x_max
    else:
        ref_cfg = dataclasses.replace(cfg, J=4 * max(j_list), dt=cfg.dt,
                                      snapshot_times=())
        ref_traj = _final_snapshot(ref_cfg)
        reference = lambda x: np.interp(x, ref_traj.x_nodes, ref_traj.p_values)
        lo = -cfg.b if x_min is None else x_min
        hi = cfg.b if x_max is None else x_max

    rows = []
    for J in j_list:
        snap = _final_snapshot(dataclasses.replace(cfg, J=J, snapshot_times=()))
        keep = (snap.x_nodes > lo) & (snap.x_nodes <= hi)
        windowed = Snapshot(t=snap.t, x_nodes=snap.x_nodes[keep],
                            p_values=snap.p_values[keep])
        sup, l1 = error_norms(windowed, reference)
        rows.append({"J": J, "h": 1.0 / J, "sup_error": sup, "l1_error": l1})
    for prev, cur in zip(rows, rows[1:]):
        cur["sup_ratio"] = prev["sup_error"] / cur["sup_error"] \
            if cur["sup_error"] > 0 else float("inf")
    return rows


def _final_snapshot(cfg: ScenarioConfig) -> Snapshot:
    op = cfg.build_operator()
    traj = run(op, cfg.initial_values(op), cfg.stepper_config())
    return snapshots_of(traj)[-1]


def cmd_convergence(args: argparse.Namespace) -> int:
    entries = _load_entries(args)
    if len(entries) != 1:
        raise ConfigError("convergence needs a single scenario, not a sweep")
    cfg = entries[0][1]
    j_list = _parse_int_list(args.j_list)
    rows = convergence_table(cfg, j_list, args.x_min, args.x_max)

    sups = [row["sup_error"] for row in rows]
    monotone = all(b < a for a, b in zip(sups, sups[1:]))
    print(f"{'J':>8} {'h':>12} {'sup_error':>14} {'l1_error':>14} {'ratio':>8}")
    for row in rows:
        ratio = f"{row.get('sup_ratio', float('nan')):8.3f}" if "sup_ratio" in row else " " * 8
        print(f"{row['J']:8d} {row['h']:12.6g} {row['sup_error']:14.6e} "
              f"{row['l1_error']:14.6e} {ratio}")
    print(f"errors strictly decreasing: {'yes' if monotone else 'NO (flagged)'}")

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = ["J,h,sup_error,l1_error"]
        lines += [f"{r['J']},{_format_float(r['h'])},{_format_float(r['sup_error'])},"
                  f"{_format_float(r['l1_error'])}" for r in rows]
        (out_dir / "convergence.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def bench_table(cfg: ScenarioConfig, j_list: list[int], modes: list[str],
                applies: int) -> list[dict]:
    """Median per-apply and per-step wall times for each (J, mode)."""
    rows = []
    for J in j_list:
        run_cfg = dataclasses.replace(cfg, J=J, snapshot_times=())
        op = run_cfg.build_operator()
        ws = FastWorkspace(op)
        v = run_cfg.initial_values(op)
        nsteps = max(1, round(run_cfg.t_final / run_cfg.dt_value))
        for mode in modes:
            if mode == "dense":
                ws.dense()  # materialize outside the timed region
            apply_times = []
            for _ in range(applies):
                t0 = time.perf_counter()
                apply_A(op, v, ws, mode=mode)
                apply_times.append(time.perf_counter() - t0)
            step_times = []
            for _ in range(min(applies, 100)):
                t0 = time.perf_counter()
                forward_euler_step(op, v, 1e-300, ws, mode=mode)
                step_times.append(time.perf_counter() - t0)
            apply_med = float(np.median(apply_times))
            step_med = float(np.median(step_times))
            rows.append({"J": J, "mode": mode,
                         "apply_seconds": apply_med,
                         "step_seconds": step_med,
                         "run_seconds_estimate": step_med * nsteps})
    by_mode: dict[str, list[dict]] = {}
    for row in rows:
        by_mode.setdefault(row["mode"], []).append(row)
    for mode_rows in by_mode.values():
        for prev, cur in zip(mode_rows, mode_rows[1:]):
            cur["apply_ratio"] = cur["apply_seconds"] / prev["apply_seconds"]
    return rows


def cmd_bench(args: argparse.Namespace) -> int:
    if args.config or args.figure:
        entries = _load_entries(args)
        if len(entries) != 1:
            raise ConfigError("bench needs a single scenario, not a sweep")
        cfg = entries[0][1]
    else:
        cfg = parse_config(named_recipe("timing"))[0][1]
    j_list = _parse_int_list(args.j_list)
    if sorted(j_list) != j_list:
        raise ConfigError("--j-list must be ascending")
    modes = [m.strip() for m in args.modes.split(",")]
    if any(m not in ("fast", "dense") for m in modes):
        raise ConfigError(f"--modes must name fast and/or dense, got {args.modes!r}")

    rows = bench_table(cfg, j_list, modes, args.applies)
    print(f"{'J':>8} {'mode':>6} {'apply_s':>12} {'step_s':>12} {'run_est_s':>12} {'ratio':>8}")
    for row in rows:
        ratio = f"{row['apply_ratio']:8.3f}" if "apply_ratio" in row else " " * 8
        print(f"{row['J']:8d} {row['mode']:>6} {row['apply_seconds']:12.3e} "
              f"{row['step_seconds']:12.3e} {row['run_seconds_estimate']:12.3e} {ratio}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = ["J,mode,apply_seconds,step_seconds,run_seconds_estimate"]
        lines += [f"{r['J']},{r['mode']},{_format_float(r['apply_seconds'])},"
                  f"{_format_float(r['step_seconds'])},"
                  f"{_format_float(r['run_seconds_estimate'])}" for r in rows]
        (out_dir / "bench.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    for label, cfg in _load_entries(args):
        op = cfg.build_operator()
        satisfied, margin = check_max_principle_condition(op)
        verdict = "satisfied" if satisfied else "NOT satisfied"
        print(f"{label or 'scenario'}: maximum principle {verdict} "
              f"(margin = min m2 = {margin:.6f})")
    return EXIT_OK


def _parse_int_list(text: str) -> list[int]:
    try:
        values = [int(s.strip()) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma list of integers, got {text!r}") from None
    if not values:
        raise ConfigError("empty J list")
    return values


def _load_entries(args: argparse.Namespace) -> list[tuple[str, ScenarioConfig]]:
    if getattr(args, "figure", None) and getattr(args, "config", None):
        raise ConfigError("--config and --figure are mutually exclusive")
    if getattr(args, "figure", None):
        text = figure_recipe(args.figure)
    elif getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        text = path.read_text()
    else:
        raise ConfigError("one of --config or --figure is required")
    entries = parse_config(text)
    mode = getattr(args, "mode", None)
    if mode:
        entries = [(label, dataclasses.replace(cfg, mode=mode, solver="auto"))
                   for label, cfg in entries]
    return entries


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a scenario file")
    p.add_argument("--figure", type=int, choices=range(2, 10), metavar="N",
                   help="use the built-in recipe for figure N (2-9)")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="levyfpe",
        description="Nonlocal Fokker-Planck solver driven by asymmetric "
                    "alpha-stable noise")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario or sweep")
    _add_scenario_args(p_run)
    p_run.add_argument("--out", default="levyfpe_out", help="output directory")
    p_run.add_argument("--mode", choices=("fast", "dense"),
                       help="override the operator application mode")
    p_run.add_argument("--workers", type=int, default=1,
                       help=f"sweep worker processes (env {WORKERS_ENV} overrides)")
    p_run.set_defaults(func=cmd_run)

    p_conv = sub.add_parser("convergence", help="resolution study of one scenario")
    _add_scenario_args(p_conv)
    p_conv.add_argument("--j-list", default="250,500,1000",
                        help="comma list of resolutions J")
    p_conv.add_argument("--x-min", type=float, default=None,
                        help="left edge of the error window (exclusive)")
    p_conv.add_argument("--x-max", type=float, default=None,
                        help="right edge of the error window (inclusive)")
    p_conv.add_argument("--out", default=None, help="directory for convergence.csv")
    p_conv.set_defaults(func=cmd_convergence)

    p_bench = sub.add_parser("bench", help="time fast vs dense operator application")
    _add_scenario_args(p_bench)
    p_bench.add_argument("--j-list", default="100,200,400,800",
                         help="ascending comma list of resolutions J")
    p_bench.add_argument("--modes", default="fast,dense")
    p_bench.add_argument("--applies", type=int, default=200,
                         help="operator applications per timing sample")
    p_bench.add_argument("--out", default=None, help="directory for bench.csv")
    p_bench.set_defaults(func=cmd_bench)

    p_check = sub.add_parser("check", help="report the maximum-principle margin")
    _add_scenario_args(p_check)
    p_check.set_defaults(func=cmd_check)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
