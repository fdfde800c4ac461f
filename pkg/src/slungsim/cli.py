"""Command-line front end: simulate, verify, sweep.

Outputs land in the requested directory as ``trajectory.csv`` (fixed
column order, see ``simulator.CSV_COLUMNS``) and ``metrics.json``.
Exit codes: 0 success, 1 runtime failure (divergence, controller stage
error, failed verification), 2 configuration or parse error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, scenario_io, verify
from .exceptions import (
    ControlStageError,
    DivergenceError,
    ScenarioFormatError,
    SlungSimError,
)
from .simulator import Scenario, run_scenario


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _write_outputs(out_dir: Path, log, params, extra: dict | None = None) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    log.to_csv(out_dir / "trajectory.csv")
    metrics = analysis.compute_metrics(log, params)
    if extra:
        metrics.update(extra)
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(_jsonable(metrics), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return metrics


def _load_scenario(arg: str, sets: list[str]) -> Scenario:
    path = Path(arg)
    if path.exists():
        return scenario_io.load_scenario(path, sets)
    if "/" not in arg and "\\" not in arg and not arg.endswith(".cfg"):
        return scenario_io.load_builtin_scenario(arg, sets)
    raise ScenarioFormatError(f"scenario file not found: {arg}")


def cmd_simulate(args) -> int:
    try:
        scenario = _load_scenario(args.scenario, args.set)
    except (ScenarioFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    try:
        log = run_scenario(scenario)
    except DivergenceError as exc:
        if exc.log is not None and len(exc.log):
            _write_outputs(out_dir, exc.log, scenario.params,
                           {"diverged": True, "divergence_time_s": exc.time})
        print(f"error: simulation diverged: {exc}", file=sys.stderr)
        return 1
    except ControlStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    metrics = _write_outputs(out_dir, log, scenario.params, {"diverged": False})
    tension = metrics.get("tension_mean_n")
    print(
        f"{scenario.name}: {len(log)} samples over {scenario.duration:g} s, "
        f"steady tension {tension:.4f} N -> {out_dir}"
    )
    return 0


def cmd_verify(args) -> int:
    try:
        params, gains = scenario_io.params_gains_from_sets(args.set)
    except ScenarioFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    results = verify.run_all(args.seed, params, gains, corrupt=args.corrupt)
    failed = False
    for result in results:
        print(result.line())
        failed = failed or (not result.passed and not result.skipped)
    return 1 if failed else 0


def _sweep_one(payload):
    scenario, out_dir = payload
    try:
        log = run_scenario(scenario)
    except (DivergenceError, ControlStageError, SlungSimError) as exc:
        return {"status": f"failed: {exc}"}
    metrics = _write_outputs(Path(out_dir), log, scenario.params, {"diverged": False})
    metrics["status"] = "ok"
    return metrics


_SUMMARY_FIELDS = [
    "status",
    "ydot_settling_s", "ydot_overshoot_pct",
    "xdot_settling_s", "xdot_overshoot_pct",
    "tension_mean_n", "saturation_rate", "swing_max_abs_deg",
]


def _summary_row(value, metrics: dict) -> dict:
    row = {"value": value, "status": metrics.get("status", "ok")}
    velocity = metrics.get("velocity", {})
    row["ydot_settling_s"] = velocity.get("ydot_p", {}).get("settling_time_s")
    row["ydot_overshoot_pct"] = velocity.get("ydot_p", {}).get("overshoot_pct")
    row["xdot_settling_s"] = velocity.get("xdot_p", {}).get("settling_time_s")
    row["xdot_overshoot_pct"] = velocity.get("xdot_p", {}).get("overshoot_pct")
    row["tension_mean_n"] = metrics.get("tension_mean_n")
    row["saturation_rate"] = metrics.get("saturation_rate")
    row["swing_max_abs_deg"] = metrics.get("swing_max_abs_deg")
    return row


def cmd_sweep(args) -> int:
    values = [v for v in (s.strip() for s in args.values.split(",")) if v]
    if not values:
        print("error: empty sweep value list", file=sys.stderr)
        return 2
    if not (args.param.startswith("params.") or args.param.startswith("gains.")):
        print(f"error: sweep parameter must be a params.* or gains.* key, "
              f"got {args.param!r}", file=sys.stderr)
        return 2

    jobs = []
    out_root = Path(args.out)
    for value in values:
        sets = list(args.set) + [f"{args.param}={value}"]
        try:
            scenario = _load_scenario(args.scenario, sets)
        except (ScenarioFormatError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        slug = f"{args.param.split('.', 1)[1]}={value}"
        jobs.append((scenario, str(out_root / slug)))

    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
            metrics_list = list(pool.map(_sweep_one, jobs))
    else:
        metrics_list = [_sweep_one(job) for job in jobs]

    out_root.mkdir(parents=True, exist_ok=True)
    rows = [_summary_row(value, m) for value, m in zip(values, metrics_list)]
    with open(out_root / "summary.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("value," + ",".join(_SUMMARY_FIELDS) + "\n")
        for row in rows:
            cells = [str(row["value"])]
            for field in _SUMMARY_FIELDS:
                v = row.get(field)
                if v is None:
                    cells.append("")
                elif isinstance(v, float):
                    cells.append(format(v, ".17g") if math.isfinite(v) else "inf")
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")

    failures = [r for r in rows if r["status"] != "ok"]
    for row in rows:
        print(f"{args.param}={row['value']}: {row['status']}")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slungsim",
        description="Quadrotor with off-center slung load: simulation testbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True,
                           help="scenario file path or bundled scenario name")
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a params.* or gains.* entry (repeatable)")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for verification sampling")

    p_sim = sub.add_parser("simulate", help="run one scenario and write logs")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="run the property/oracle suite")
    common(p_ver, scenario=False)
    p_ver.add_argument("--corrupt", choices=["gravity-sign"], default=None,
                       help="inject a known defect (negative control)")
    p_ver.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="run a scenario across parameter values")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True,
                         help="dotted key to sweep, e.g. params.L_x")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated list of values")
    p_sweep.add_argument("--workers", type=int, default=1,
                         help="concurrent scenario runs")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
