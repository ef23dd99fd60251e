"""Classify a parameter set and run the 9x5 generalization battery.

Uses the bundled static-blob fixture (identity rules hold the init square
frozen forever) so the demo runs in minutes at a 64-grid; point --params at
a discovery-run pattern to evaluate a real find at full scale.
"""

import argparse
import pathlib

import numpy as np

from lenialab.evaluation import (EvalConfig, evaluate_agent,
                                 generalization_battery)
from lenialab.params import load_params

parser = argparse.ArgumentParser()
parser.add_argument("--params", help="params JSON (default: bundled fixture)")
parser.add_argument("--full-scale", action="store_true",
                    help="256 grid, 2000-step tests (slow)")
args = parser.parse_args()

if args.params:
    rules, init = load_params(args.params)
    cfg = EvalConfig() if args.full_scale else EvalConfig.desk()
else:
    fixture = (pathlib.Path(__file__).parents[1] / "tests" / "fixtures"
               / "static_blob_64.params.json")
    rules, init = load_params(fixture)
    cfg = EvalConfig.desk(grid_shape=(64, 64))

report = evaluate_agent(rules, init, "demo", rng=np.random.default_rng(0),
                        cfg=cfg)
print(f"prefilter={report.prefilter} agent={report.agent} "
      f"moving={report.moving} speed={report.speed:.2f} "
      f"robustness={report.robustness_basic:.2f}")

print("\ngeneralization battery (survival over"
      f" {cfg.battery_seeds} seeds per cell):")
grid = generalization_battery(rules, init, cfg)
for family, cells in grid.items():
    row = "  ".join(f"{value}:{survival:.1f}" for value, survival in cells.items())
    print(f"  {family:18s} {row}")
