"""Command-line entry points: run, sweep, and validate scenarios.

Exit codes: 0 success, 2 configuration/validation error, 3 instability
(diverged run), 4 I/O error (missing files, unwritable paths).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import yaml

from . import scenario as scenario_io
from .engine import stability_dt_bound
from .scenario import ScenarioError, build_engine, build_network

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INSTABILITY = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _apply_override(data: dict, spec: str) -> None:
    if "=" not in spec:
        raise CliError(f"override {spec!r} is not KEY=VALUE", EXIT_CONFIG)
    key, raw_value = spec.split("=", 1)
    try:
        value = yaml.safe_load(raw_value)
    except yaml.YAMLError as err:
        raise CliError(f"override {spec!r}: unparseable value ({err})", EXIT_CONFIG)
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[parts[-1]] = value


def _load_raw(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as err:
        raise CliError(str(err), EXIT_IO)
    except OSError as err:
        raise CliError(str(err), EXIT_IO)
    except yaml.YAMLError as err:
        raise CliError(f"{path}: YAML parse error: {err}", EXIT_CONFIG)
    if not isinstance(data, dict):
        raise CliError(f"{path}: scenario file must contain a mapping", EXIT_CONFIG)
    return data


def _prepare_scenario(path: str, overrides: list[str], out_dir: str | None, log_interval: float | None):
    data = _load_raw(path)
    for spec in overrides:
        _apply_override(data, spec)
    if out_dir is not None:
        data.setdefault("output", {})["directory"] = out_dir
    if log_interval is not None:
        data.setdefault("output", {})["interval"] = log_interval
    try:
        return scenario_io.scenario_from_dict(data)
    except ScenarioError as err:
        raise CliError("invalid scenario:\n  " + "\n  ".join(err.problems), EXIT_CONFIG)


def _check_writable(directory: str) -> None:
    try:
        os.makedirs(directory, exist_ok=True)
        probe = os.path.join(directory, ".write-probe")
        with open(probe, "w", encoding="utf-8"):
            pass
        os.remove(probe)
    except OSError as err:
        raise CliError(f"output directory {directory!r} is not writable: {err}", EXIT_IO)


def _execute(scenario) -> tuple:
    engine = build_engine(scenario)
    result = engine.run(output_interval=scenario.output_interval)
    paths = scenario_io.write_outputs(result, scenario)
    return result, paths


def cmd_run(args) -> int:
    scenario = _prepare_scenario(args.scenario, args.override, args.out, args.log_interval)
    _check_writable(scenario.output_directory)
    result, paths = _execute(scenario)
    m = result.metrics
    print(
        f"captured={m.captured} capture_time={m.capture_time} "
        f"wrap_score_max={m.wrap_score:.3f} first_contact={m.first_contact_time} "
        f"wall_time={result.wall_time:.1f}s outputs={scenario.output_directory}"
    )
    if not result.completed:
        print(f"run failed: {result.failure}", file=sys.stderr)
        return EXIT_INSTABILITY
    return EXIT_OK


def _sweep_one(payload: tuple) -> dict:
    """Executes one sweep cell in a worker process."""
    index, base_path, overrides, out_dir = payload
    try:
        scenario = _prepare_scenario(base_path, overrides, out_dir, None)
        result, _ = _execute(scenario)
        m = result.metrics
        return {
            "index": index,
            "overrides": overrides,
            "completed": result.completed,
            "captured": m.captured,
            "capture_time": m.capture_time,
            "wrap_score": m.wrap_score,
            "error": result.failure,
        }
    except CliError as err:
        return {
            "index": index,
            "overrides": overrides,
            "completed": False,
            "captured": False,
            "capture_time": None,
            "wrap_score": 0.0,
            "error": str(err),
        }


def cmd_sweep(args) -> int:
    spec = _load_raw(args.sweep_spec)
    allowed = {"base", "axes", "workers", "output_directory"}
    unknown = set(spec) - allowed
    if unknown:
        raise CliError(f"sweep spec: unknown keys {sorted(unknown)}", EXIT_CONFIG)
    base = spec.get("base")
    if not isinstance(base, str):
        raise CliError("sweep spec: 'base' must be a scenario path", EXIT_CONFIG)
    if not os.path.isabs(base):
        base = os.path.join(os.path.dirname(os.path.abspath(args.sweep_spec)), base)
    axes = spec.get("axes", [])
    if not isinstance(axes, list):
        raise CliError("sweep spec: 'axes' must be a list", EXIT_CONFIG)
    fields, value_lists = [], []
    for idx, axis in enumerate(axes):
        if not isinstance(axis, dict) or "field" not in axis or "values" not in axis:
            raise CliError(f"sweep spec: axes[{idx}] needs 'field' and 'values'", EXIT_CONFIG)
        fields.append(str(axis["field"]))
        values = axis["values"]
        if not isinstance(values, list) or not values:
            raise CliError(f"sweep spec: axes[{idx}].values must be a non-empty list", EXIT_CONFIG)
        value_lists.append(values)

    out_dir = args.out or spec.get("output_directory", "sweep_out")
    workers = args.workers or int(spec.get("workers", 1))
    _check_writable(out_dir)

    cells = list(itertools.product(*value_lists)) if value_lists else [()]
    print(f"sweep: {len(cells)} runs over {fields or 'base scenario only'}")
    payloads = []
    for index, combo in enumerate(cells):
        overrides = [
            f"{f}={json.dumps(v)}" for f, v in zip(fields, combo)
        ] + list(args.override)
        payloads.append((index, base, overrides, os.path.join(out_dir, f"run_{index:04d}")))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, payloads))
    else:
        rows = [_sweep_one(p) for p in payloads]
    rows.sort(key=lambda r: r["index"])  # deterministic spec order

    summary = os.path.join(out_dir, "summary.csv")
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        fh.write("# schema: tethernet-sweep-v1\n")
        writer = csv.writer(fh, lineterminator="\n")
        header = [f"axis:{f}" for f in fields]
        writer.writerow(["index"] + header + ["completed", "captured", "capture_time", "wrap_score", "error"])
        for row, combo in zip(rows, cells):
            cols = [str(row["index"])]
            cols += [json.dumps(v) for v in combo]
            cols += [
                str(row["completed"]),
                str(row["captured"]),
                "" if row["capture_time"] is None else repr(row["capture_time"]),
                repr(row["wrap_score"]),
                row["error"] or "",
            ]
            writer.writerow(cols)
    print(f"sweep summary written to {summary}")
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = _prepare_scenario(args.scenario, args.override, None, None)
    network = build_network(scenario)
    build_engine(scenario)
    stiffnesses = sorted({e.stiffness for e in network.elements})
    dampings = sorted({e.damping for e in network.elements})
    rests = sorted({e.rest_length for e in network.elements})
    masses = [n.mass for n in network.nodes]
    report = {
        "nodes": len(network.nodes),
        "elements": len(network.elements),
        "robots": [n.id for n in network.nodes if n.is_robot],
        "element_rest_length_m": rests,
        "element_stiffness_N_per_m": stiffnesses,
        "element_damping_Ns_per_m": dampings,
        "node_mass_kg": {"min": min(masses), "max": max(masses)},
        "stability_dt_bound_s": stability_dt_bound(network),
        "integrator_dt_s": scenario.integrator.dt,
        "target_mode": scenario.target.mode,
        "target_angular_velocity_deg_s": list(scenario.target.angular_velocity_deg),
    }
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print("scenario is valid")
        for key, value in report.items():
            print(f"  {key}: {value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tethernet",
        description="Deterministic tethered-net satellite capture simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="load, run, and write outputs for one scenario")
    run_p.add_argument("scenario", help="scenario YAML path")
    run_p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path scenario override, repeatable")
    run_p.add_argument("--out", default=None, help="output directory (overrides scenario)")
    run_p.add_argument("--log-interval", type=float, default=None, metavar="S",
                       help="trajectory/event sampling interval in seconds")
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run the Cartesian product of overrides")
    sweep_p.add_argument("sweep_spec", help="sweep spec YAML (base, axes, workers)")
    sweep_p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                         help="extra override applied to every run")
    sweep_p.add_argument("--out", default=None, help="sweep output directory")
    sweep_p.add_argument("--workers", type=int, default=None, metavar="N",
                         help="parallel worker count")
    sweep_p.set_defaults(func=cmd_sweep)

    val_p = sub.add_parser("validate", help="validate a scenario and print derived values")
    val_p.add_argument("scenario", help="scenario YAML path")
    val_p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    val_p.add_argument("--json", action="store_true", help="machine-readable report")
    val_p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        print(str(err), file=sys.stderr)
        return err.code
    except ScenarioError as err:
        print(str(err), file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        print(str(err), file=sys.stderr)
        return EXIT_IO
    except OSError as err:
        print(str(err), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
