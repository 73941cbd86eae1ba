#!/usr/bin/env python3
"""Sweep closing speed x target spin on the bundled static scenario.

Usage:
    python scripts/sweep_closing_conditions.py [--out-dir OUT] [--workers N]
                                               [--duration SECONDS]

Runs the 4 x 2 grid of closing speeds {5, 10, 15, 20} m/s against a static
and a slowly tumbling target, and writes OUT/summary.csv plus per-run output
directories. This is a thin wrapper over `tethernet sweep`; the generated
sweep spec is left at OUT/sweep_spec.yaml for reuse.
"""

from __future__ import annotations

import argparse
import os
import sys

import yaml

from tethernet.cli import main as tethernet_main

SCENARIO = os.path.join(os.path.dirname(__file__), "..", "scenarios", "capture_static.yaml")

CLOSING_SPEEDS = [5.0, 10.0, 15.0, 20.0]
SPINS_DEG = [[0.0, 0.0, 0.0], [1.0, 0.5, 0.2]]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="out/closing_sweep")
    parser.add_argument("--workers", type=int, default=2)
    parser.add_argument("--duration", type=float, default=None, help="override horizon (s)")
    args = parser.parse_args()

    spec = {
        "base": os.path.abspath(SCENARIO),
        "axes": [
            {"field": "initial_velocity", "values": [[0.0, -v, 0.0] for v in CLOSING_SPEEDS]},
            {"field": "target.angular_velocity_deg", "values": SPINS_DEG},
        ],
        "workers": args.workers,
        "output_directory": args.out_dir,
    }
    os.makedirs(args.out_dir, exist_ok=True)
    spec_path = os.path.join(args.out_dir, "sweep_spec.yaml")
    with open(spec_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(spec, fh, sort_keys=False)

    argv = ["sweep", spec_path]
    if args.duration is not None:
        argv += ["--override", f"integrator.duration={args.duration}"]
    return tethernet_main(argv)


if __name__ == "__main__":
    sys.exit(main())
