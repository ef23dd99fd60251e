"""Command-line entry points.

    lenialab discover         run the goal-directed search
    lenialab random-search    uniform-sampling baseline
    lenialab evaluate         classify + robustness for saved parameters
    lenialab generalize       the 9x5 perturbation battery
    lenialab render           frames / trajectory overlay for parameters
    lenialab serve            live session service for the playground
    lenialab attractor-search random search for attractor rules

DATA_DIR sets the default output root; THREADS sizes the worker pool used
for batched FFT work.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np


def _data_dir() -> Path:
    return Path(os.environ.get("DATA_DIR", "."))


def _load_search_config(path: str | None, ablation: str | None,
                        desk: bool) -> "SearchConfig":
    from .imgep import SearchConfig

    if path:
        config = SearchConfig.from_json(json.loads(Path(path).read_text()))
    elif desk:
        config = SearchConfig.desk()
    else:
        config = SearchConfig()
    if ablation:
        flag = {"no-obstacles": "no_obstacles", "no-gradient": "no_gradient",
                "uniform-goals": "uniform_goals"}[ablation]
        setattr(config, flag, True)
    return config


def cmd_discover(args) -> int:
    from .imgep import run_imgep

    config = _load_search_config(args.config, args.ablation, args.desk)
    out = Path(args.out or (_data_dir() / f"discover-seed{args.seed}"))
    run = run_imgep(config, args.seed, out_dir=out,
                    progress=(print if args.verbose else None))
    print(f"wrote {len(run.history)} records to {out}")
    print(f"rollout ledger: {run.ledger.as_dict()}")
    return 0


def cmd_random_search(args) -> int:
    from .imgep import SearchConfig, run_random_search

    config = _load_search_config(args.config, None, args.desk)
    out = Path(args.out or (_data_dir() / f"random-seed{args.seed}"))
    run = run_random_search(args.budget, args.seed, config=config, out_dir=out)
    print(f"wrote {len(run.history)} records to {out}")
    return 0


def _iter_params(path: Path):
    """Yield (id, rules, init) for a params file or a run directory."""
    from .params import load_params

    if path.is_dir():
        pattern_dir = path / "patterns" if (path / "patterns").exists() else path
        for f in sorted(pattern_dir.glob("*.params.json")):
            rules, init = load_params(f)
            yield f.stem.replace(".params", ""), rules, init
    else:
        rules, init = load_params(path)
        yield path.stem.replace(".params", ""), rules, init


def cmd_evaluate(args) -> int:
    from .evaluation import EvalConfig, evaluate_agent, report_csv, save_report

    cfg = EvalConfig.desk() if args.desk else EvalConfig()
    reports = []
    for pid, rules, init in _iter_params(Path(args.params)):
        report = evaluate_agent(rules, init, pid,
                                rng=np.random.default_rng(args.seed),
                                cfg=cfg, with_battery=args.battery,
                                progress=(print if args.verbose else None))
        reports.append(report)
        print(f"{pid}: prefilter={report.prefilter} agent={report.agent} "
              f"moving={report.moving} speed={report.speed:.2f} "
              f"robustness={report.robustness_basic:.2f}")
    save_report(args.out, reports, cfg)
    if args.csv:
        report_csv(args.csv, reports)
    return 0


def cmd_generalize(args) -> int:
    from .evaluation import EvalConfig, generalization_battery

    cfg = EvalConfig.desk() if args.desk else EvalConfig()
    cfg.battery_seeds = args.seeds
    results = {}
    for pid, rules, init in _iter_params(Path(args.params)):
        grid = generalization_battery(rules, init, cfg,
                                      progress=(print if args.verbose else None))
        results[pid] = grid
    Path(args.out).write_text(json.dumps(
        {"seeds": args.seeds, "grids": results}, sort_keys=True, indent=2))
    print(f"wrote {args.out}")
    return 0


def cmd_render(args) -> int:
    from .engine import rollout
    from .obstacles import ObstacleConfig
    from .render import render_frames, trajectory_overlay, write_ppm

    for pid, rules, init in _iter_params(Path(args.params)):
        obstacles = None
        if args.obstacles:
            obstacles = ObstacleConfig.load(args.obstacles)
        traj = rollout(init, rules, obstacles, steps=args.steps,
                       shape=(args.grid, args.grid), record="full",
                       rng=np.random.default_rng(args.seed))
        out = Path(args.out) / pid
        states = [np.stack([s, traj.obstacle_mask]) for s in traj.states]
        paths = render_frames(states, out)
        overlay = trajectory_overlay(traj.states[:: max(1, args.steps // 40)],
                                     traj.obstacle_mask)
        write_ppm(out / "overlay.ppm", overlay)
        print(f"{pid}: {len(paths)} frames + overlay in {out}")
        break
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    assets = args.assets
    if assets is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        assets = bundled if bundled.exists() else None
    serve(args.bind, params_dir=args.params_dir, assets_dir=assets)
    return 0


def cmd_attractor_search(args) -> int:
    from .evaluation import EvalConfig, search_attractor_rules
    from .params import load_params, ruleset_to_json

    rules, init = load_params(args.agent)
    cfg = EvalConfig.desk() if args.desk else EvalConfig()
    found = search_attractor_rules(rules, init, args.budget,
                                   np.random.default_rng(args.seed), cfg)
    doc = [{
        "r": r.r, "b": list(r.b), "w": list(r.w), "a": list(r.a),
        "mu": r.mu, "sigma": r.sigma, "h": r.h,
        "c_src": r.c_src, "c_dst": r.c_dst,
    } for r in found]
    Path(args.out).write_text(json.dumps(doc, indent=2))
    print(f"{len(found)}/{args.budget} candidate attractor rules -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lenialab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discover", help="run the goal-directed search")
    p.add_argument("--config", help="SearchConfig JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output run directory")
    p.add_argument("--ablation",
                   choices=["no-obstacles", "no-gradient", "uniform-goals"])
    p.add_argument("--desk", action="store_true",
                   help="workstation-scale preset (128 grid)")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("random-search", help="uniform-sampling baseline")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--config")
    p.add_argument("--desk", action="store_true")
    p.set_defaults(func=cmd_random_search)

    p = sub.add_parser("evaluate", help="classify and measure parameters")
    p.add_argument("--params", required=True, help="params file or run dir")
    p.add_argument("--out", default="report.json")
    p.add_argument("--csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--battery", action="store_true",
                   help="include the 9x5 generalization battery")
    p.add_argument("--desk", action="store_true")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generalize", help="9x5 perturbation battery")
    p.add_argument("--params", required=True)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--out", default="grid.json")
    p.add_argument("--desk", action="store_true")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_generalize)

    p = sub.add_parser("render", help="write PPM frames and an overlay")
    p.add_argument("--params", required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--out", default="frames")
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--obstacles", help="obstacle config JSON")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("serve", help="live session service")
    p.add_argument("--bind", default="127.0.0.1:8700")
    p.add_argument("--params-dir")
    p.add_argument("--assets", help="static playground assets directory")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("attractor-search",
                       help="random search for attractor rules")
    p.add_argument("--agent", required=True, help="agent params file")
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="attractor_rules.json")
    p.add_argument("--desk", action="store_true")
    p.set_defaults(func=cmd_attractor_search)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
