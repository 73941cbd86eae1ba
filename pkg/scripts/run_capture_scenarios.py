#!/usr/bin/env python3
"""Run the two bundled capture scenarios and print a metrics summary.

Usage:
    python scripts/run_capture_scenarios.py [--out-dir OUT] [--duration SECONDS]

Each scenario writes trajectory.csv / events.csv / metrics.json / manifest.yaml
under OUT/<scenario-name>/. The 6 s horizon takes a few minutes per scenario
with numba installed; pass a shorter --duration for a quick look.
"""

from __future__ import annotations

import argparse
import os
import time

from tethernet.scenario import (
    build_engine,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    write_outputs,
)

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "..", "scenarios")
SCENARIOS = ["capture_static.yaml", "capture_rotating.yaml"]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="out", help="root output directory")
    parser.add_argument("--duration", type=float, default=None, help="override horizon (s)")
    args = parser.parse_args()

    rows = []
    for name in SCENARIOS:
        data = scenario_to_dict(load_scenario(os.path.join(SCENARIO_DIR, name)))
        if args.duration is not None:
            data["integrator"]["duration"] = args.duration
        stem = os.path.splitext(name)[0]
        data["output"]["directory"] = os.path.join(args.out_dir, stem)
        scenario = scenario_from_dict(data)

        start = time.perf_counter()
        result = build_engine(scenario).run(output_interval=scenario.output_interval)
        wall = time.perf_counter() - start
        write_outputs(result, scenario)

        m = result.metrics
        rows.append((stem, m.first_contact_time, m.wrap_score, m.captured, m.capture_time, wall))
        print(f"{stem}: done in {wall:.1f}s -> {scenario.output_directory}")

    print()
    print(f"{'scenario':<18} {'first contact':>13} {'max wrap':>9} {'captured':>9} {'capture t':>10} {'wall s':>7}")
    for stem, t_contact, wrap, captured, t_capture, wall in rows:
        print(
            f"{stem:<18} {t_contact if t_contact is not None else '-':>13} "
            f"{wrap:>9.3f} {str(captured):>9} "
            f"{t_capture if t_capture is not None else '-':>10} {wall:>7.1f}"
        )


if __name__ == "__main__":
    main()
