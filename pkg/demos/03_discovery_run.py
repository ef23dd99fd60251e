"""A miniature discovery run, end to end.

Runs the workstation-scale search for a handful of outer steps and prints
the history with its rollout ledger.  A full desk run (30 outer steps) takes
on the order of 10-25 minutes depending on how many bootstrap restarts the
seed needs; a paper-scale run (256 grid, 120 steps) is an overnight job.

    python demos/03_discovery_run.py [seed]

The run directory layout matches `lenialab discover`:
run.json + history.jsonl + patterns/NNN.params.json + NNN.init.bin.
"""

import pathlib
import sys

from lenialab.imgep import SearchConfig, run_imgep

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
out = pathlib.Path(__file__).parent / "out" / f"mini-run-seed{seed}"

config = SearchConfig.desk(n_outer=8, max_restarts=2)
run = run_imgep(config, seed, out_dir=out, progress=print)

print(f"\n{len(run.history)} records, {run.restarts} restarts")
print("rollout ledger:", run.ledger.as_dict())
best = max((e for e in run.history if e.c <= config.c_filter),
           key=lambda e: e.reached[0], default=None)
if best is not None:
    print(f"furthest admissible entry: id {best.id} "
          f"reached ({best.reached[0]:+.3f}, {best.reached[1]:+.3f}) "
          f"c={best.c:.4f}")
print(f"run directory: {out}")
