"""Certification battery: agency and moving classifiers, speed measures,
the basic obstacle test and the 9x5 generalization grid.

An "agent" here is an empirical notion: after a long rollout the learnable
channel must hold a bounded, stable, single-soliton pattern.  A "moving
agent" additionally travels a minimum distance early in the rollout, and a
"sensorimotor agent" survives nearly every obstacle-strewn rollout of the
basic obstacle test.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .engine import rollout, rollout_batch
from .geometry import rescale
from .kernels import compile_rules
from .obstacles import ObstacleConfig, uniform_obstacles
from .params import DegenerateKernelError, InitPattern, RuleSet
from .perturb import IDENTITY, PerturbationSpec


@dataclass
class EvalConfig:
    """Rollout lengths and thresholds for the battery.

    Defaults follow the full-scale battery (256 grid, 2000-step tests);
    :meth:`desk` shrinks the grid for workstation-scale fixtures while
    keeping every classifier definition intact.
    """

    grid_shape: tuple[int, int] = (256, 256)
    prefilter_steps: int = 500
    test_steps: int = 2000
    mass_max: float = 6400.0
    window: int = 500                  # mass-ratio windows: first/last `window`
    mass_ratio_max: float = 2.0
    blob_threshold: float = 0.1
    moving_distance: float = 100.0
    moving_window: int = 1000
    speed_window: int = 25
    speed_start: int = 150
    basic_rollouts: int = 50
    basic_obstacles: int = 24
    obstacle_radius: float = 10.0
    battery_seeds: int = 10
    battery_free_tail: int = 100       # last steps free of update perturbations
    clear_init: bool = True
    dtype: str = "float32"

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    @classmethod
    def desk(cls, **overrides) -> "EvalConfig":
        base = dict(grid_shape=(128, 128))
        base.update(overrides)
        return cls(**base)


@dataclass
class TrajectoryStats:
    """Per-step mass and center of mass plus the final state of one rollout."""

    masses: np.ndarray
    coms: np.ndarray
    com0: tuple[float, float]
    final: np.ndarray

    @classmethod
    def from_trajectory(cls, traj) -> "TrajectoryStats":
        return cls(masses=traj.masses, coms=traj.coms, com0=traj.com0,
                   final=traj.final)

    @classmethod
    def from_batch(cls, batch, i: int) -> "TrajectoryStats":
        return cls(masses=batch.masses[i], coms=batch.coms[i],
                   com0=batch.com0, final=batch.finals[i])


# ---------------------------------------------------------------------------
# Soliton analysis


def _torus_label(occupied: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected components with wraparound adjacency merged."""
    structure = np.ones((3, 3), dtype=bool)
    labels, n = ndimage.label(occupied, structure=structure)
    if n <= 1:
        return labels, n
    parent = list(range(n + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    H, W = occupied.shape
    for j in range(W):
        if labels[0, j] and labels[H - 1, j]:
            union(labels[0, j], labels[H - 1, j])
        for dj in (-1, 0, 1):
            jj = (j + dj) % W
            if labels[0, j] and labels[H - 1, jj]:
                union(labels[0, j], labels[H - 1, jj])
    for i in range(H):
        if labels[i, 0] and labels[i, W - 1]:
            union(labels[i, 0], labels[i, W - 1])
        for di in (-1, 0, 1):
            ii = (i + di) % H
            if labels[i, 0] and labels[ii, W - 1]:
                union(labels[i, 0], labels[ii, W - 1])
    remap = {}
    for lab in range(1, n + 1):
        root = find(lab)
        remap.setdefault(root, len(remap) + 1)
    out = np.zeros_like(labels)
    for lab in range(1, n + 1):
        out[labels == lab] = remap[find(lab)]
    return out, len(remap)


def count_solitons(state: np.ndarray, merge_distance: float,
                   threshold: float = 0.1) -> int:
    """Number of macro blobs after merging blobs closer than
    ``merge_distance`` (torus metric).  Zero for an empty state."""
    occupied = state > threshold
    if not occupied.any():
        return 0
    labels, n = _torus_label(occupied)
    if n <= 1:
        return n
    coords = [np.argwhere(labels == lab).astype(np.float64)
              for lab in range(1, n + 1)]
    boxsize = np.array(state.shape, dtype=np.float64)
    trees = [cKDTree(c, boxsize=boxsize) for c in coords]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            d, _ = trees[i].query(coords[j], k=1)
            if d.min() < merge_distance:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    return len({find(i) for i in range(n)})


def merge_radius(rules: RuleSet) -> float:
    """Blob merge distance R * max(r) over the learnable rules."""
    return rules.R * rules.max_relative_radius()


# ---------------------------------------------------------------------------
# Classifiers


def prefilter(rules: RuleSet, init: InitPattern, cfg: EvalConfig = EvalConfig()
              ) -> bool:
    """One 500-step rollout; pass iff 0 < final mass < 6400.

    Vacuum-stable rule sets whose mass hits zero cannot regrow, so the
    rollout short-circuits to the (exact) failing verdict.
    """
    from .engine import vacuum_stable

    can_stop = vacuum_stable(rules)
    try:
        batch = rollout_batch(init, rules, None, steps=cfg.prefilter_steps,
                              shape=cfg.grid_shape, seeds=[0],
                              dtype=cfg.np_dtype, record_trace=False,
                              prune_dead=can_stop, check_every=25)
    except (DegenerateKernelError, FloatingPointError):
        return False
    if batch.blowup[0]:
        return False
    mass = float(batch.finals[0].sum())
    return 0.0 < mass < cfg.mass_max


def agency_test(stats: TrajectoryStats, rules: RuleSet,
                cfg: EvalConfig = EvalConfig()) -> bool:
    """Bounded final mass, stable window-mass ratio, single soliton."""
    final_mass = float(stats.masses[-1])
    if not (0.0 < final_mass < cfg.mass_max):
        return False
    w = cfg.window
    m1 = float(stats.masses[:w].mean())
    m2 = float(stats.masses[-w:].mean())
    if m1 <= 0.0 or m2 <= 0.0:
        return False
    if max(m1, m2) / min(m1, m2) > cfg.mass_ratio_max:
        return False
    return count_solitons(stats.final, merge_radius(rules),
                          cfg.blob_threshold) == 1


def moving_test(stats: TrajectoryStats, cfg: EvalConfig = EvalConfig()) -> bool:
    """Center of mass strays beyond the distance floor within the first
    ``moving_window`` steps."""
    coms = stats.coms[:cfg.moving_window]
    d = np.hypot(coms[:, 0] - stats.com0[0], coms[:, 1] - stats.com0[1])
    return bool(np.nanmax(d, initial=0.0) > cfg.moving_distance)


def speed(stats: TrajectoryStats, cfg: EvalConfig = EvalConfig()) -> float:
    """Mean windowed center-of-mass displacement per step.

    Sliding windows [t, t + w] with w = 25, t running from 150 up to the
    rollout end, suppress the back-and-forth jitter of self-organization.
    ``coms[i]`` is the position after step i+1, so step t maps to index
    t - 1.
    """
    w = cfg.speed_window
    n = len(stats.coms)
    t0 = cfg.speed_start
    starts = np.arange(t0, n - w + 1)
    if len(starts) == 0:
        return 0.0
    a = stats.coms[starts - 1]
    b = stats.coms[starts - 1 + w]
    d = np.hypot(b[:, 0] - a[:, 0], b[:, 1] - a[:, 1])
    d = d[np.isfinite(d)]
    return float(d.mean() / w) if len(d) else 0.0


# ---------------------------------------------------------------------------
# Obstacle robustness


def free_position_at(rules: RuleSet, init: InitPattern, step: int,
                     cfg: EvalConfig) -> tuple[float, float] | None:
    """Center of mass at ``step`` of an obstacle-free rollout."""
    traj = rollout(init, rules, None, steps=step, shape=cfg.grid_shape,
                   record="stats", dtype=cfg.np_dtype,
                   rng=np.random.default_rng(0))
    com = traj.coms[step - 1]
    if not np.isfinite(com).all():
        return None
    return float(com[0]), float(com[1])


def basic_obstacle_test(rules: RuleSet, init: InitPattern,
                        rng: np.random.Generator,
                        cfg: EvalConfig = EvalConfig()
                        ) -> tuple[float, float, np.ndarray]:
    """50 seeded 2000-step rollouts with 24 obstacles each, one placed on
    the agent's obstacle-free trajectory.

    Returns (robustness, speed with obstacles, per-rollout pass flags);
    rollouts failing the agency test contribute speed 0.
    """
    B = cfg.basic_rollouts
    mid = cfg.test_steps // 2
    anchor = free_position_at(rules, init, mid, cfg)
    masks = []
    for _ in range(B):
        conf = uniform_obstacles(rng, cfg.grid_shape,
                                 n=cfg.basic_obstacles - 1,
                                 radius=cfg.obstacle_radius)
        if anchor is not None:
            conf.disks.append((anchor[0], anchor[1], cfg.obstacle_radius))
        masks.append(conf.rasterize(cfg.grid_shape))
    batch = rollout_batch(init, rules, np.stack(masks), steps=cfg.test_steps,
                          shape=cfg.grid_shape, clear_init=cfg.clear_init,
                          dtype=cfg.np_dtype)
    passes = np.zeros(B, dtype=bool)
    speeds = np.zeros(B)
    for i in range(B):
        stats = TrajectoryStats.from_batch(batch, i)
        if not batch.blowup[i] and agency_test(stats, rules, cfg):
            passes[i] = True
            speeds[i] = speed(stats, cfg)
    return float(passes.mean()), float(speeds.mean()), passes


# ---------------------------------------------------------------------------
# Generalization battery


def battery_families(cfg: EvalConfig) -> list[tuple[str, list]]:
    """The 9 perturbation families with their 5 tested values each."""
    return [
        ("obstacle_number", [24, 30, 36, 42, 48]),
        ("obstacle_radius", [4, 7, 10, 13, 16]),
        ("obstacle_speed", ["1/3", "1/2", "1", "2", "3"]),
        ("update_mask_rate", [0.2, 0.6, 1.0, 1.4, 1.8]),
        ("update_noise_rate", [0.2, 0.4, 0.6, 0.8, 1.0]),
        ("update_noise_std", [0.2, 0.6, 1.0, 1.4, 1.8]),
        ("init_noise_rate", [0.2, 0.4, 0.6, 0.8, 1.0]),
        ("init_noise_std", [0.5, 1.5, 2.5, 3.5, 4.5]),
        ("scaling", [0.15, 0.65, 1.15, 1.65, 2.15]),
    ]


def radius_matched_count(radius: float, cfg: EvalConfig) -> int:
    """Obstacle count keeping the covered-cell ratio of 24 radius-10 disks."""
    return int(round(cfg.basic_obstacles * (cfg.obstacle_radius / radius) ** 2))


def _family_tag(family: str) -> int:
    import zlib

    return zlib.crc32(family.encode()) & 0x7FFFFFFF


def _battery_cell(rules, init, family, value, seed, cfg: EvalConfig) -> bool:
    """One seeded 2000-step rollout under the family's perturbation; pass
    iff the final trajectory still satisfies the agency test."""
    rng = np.random.default_rng([seed, _family_tag(family)])
    perturb = IDENTITY
    obstacles = None
    motion = None
    cur_rules, cur_init = rules, init
    window_end = cfg.test_steps - cfg.battery_free_tail

    if family == "obstacle_number":
        obstacles = uniform_obstacles(rng, cfg.grid_shape, n=int(value),
                                      radius=cfg.obstacle_radius)
    elif family == "obstacle_radius":
        obstacles = uniform_obstacles(rng, cfg.grid_shape,
                                      n=radius_matched_count(value, cfg),
                                      radius=float(value))
    elif family == "obstacle_speed":
        num, den = (int(v) for v in (value.split("/") + ["1"])[:2])
        obstacles = uniform_obstacles(rng, cfg.grid_shape,
                                      n=cfg.basic_obstacles,
                                      radius=cfg.obstacle_radius,
                                      speed=(num, den))
        motion = obstacles
    elif family == "update_mask_rate":
        perturb = PerturbationSpec(update_mask_rate=float(value),
                                   window=(0, window_end))
    elif family == "update_noise_rate":
        perturb = PerturbationSpec(update_noise_rate=float(value),
                                   update_noise_std=1.0,
                                   window=(0, window_end))
    elif family == "update_noise_std":
        perturb = PerturbationSpec(update_noise_rate=1.0,
                                   update_noise_std=float(value),
                                   window=(0, window_end))
    elif family == "init_noise_rate":
        perturb = PerturbationSpec(init_noise_rate=float(value),
                                   init_noise_std=1.0)
    elif family == "init_noise_std":
        perturb = PerturbationSpec(init_noise_rate=1.0,
                                   init_noise_std=float(value))
    elif family == "scaling":
        try:
            cur_rules, cur_init = rescale(rules, init, float(value))
        except Exception:
            return False
    else:
        raise ValueError(f"unknown family {family!r}")

    try:
        traj = rollout(cur_init, cur_rules, obstacles, steps=cfg.test_steps,
                       perturb=perturb, rng=rng, record="stats",
                       shape=cfg.grid_shape, clear_init=cfg.clear_init,
                       dtype=cfg.np_dtype)
    except (DegenerateKernelError, FloatingPointError, ValueError):
        return False
    stats = TrajectoryStats.from_trajectory(traj)
    return agency_test(stats, cur_rules, cfg)


def _battery_cell_batch(rules, init, family, value, cfg: EvalConfig) -> float:
    """Survival over the battery seeds; batches seeds where the perturbation
    allows it, falls back to per-seed rollouts otherwise."""
    n = cfg.battery_seeds
    if family in ("obstacle_number", "obstacle_radius", "obstacle_speed"):
        # One obstacle draw per seed, shared motion; batched rollout.
        if family == "obstacle_speed":
            num, den = (int(v) for v in (str(value).split("/") + ["1"])[:2])
            speed_t = (num, den)
            count, radius = cfg.basic_obstacles, cfg.obstacle_radius
        else:
            speed_t = (0, 1)
            if family == "obstacle_number":
                count, radius = int(value), cfg.obstacle_radius
            else:
                count, radius = radius_matched_count(value, cfg), float(value)
        confs = [uniform_obstacles(np.random.default_rng([s, _family_tag(family)]),
                                   cfg.grid_shape, n=count, radius=radius,
                                   speed=speed_t) for s in range(n)]
        masks = np.stack([c.rasterize(cfg.grid_shape) for c in confs])
        motion = confs[0] if speed_t[0] else None
        batch = rollout_batch(init, rules, masks, steps=cfg.test_steps,
                              shape=cfg.grid_shape, clear_init=cfg.clear_init,
                              dtype=cfg.np_dtype, motion=motion)
        passes = [
            (not batch.blowup[i])
            and agency_test(TrajectoryStats.from_batch(batch, i), rules, cfg)
            for i in range(n)
        ]
        return float(np.mean(passes))
    passes = [_battery_cell(rules, init, family, value, s, cfg)
              for s in range(n)]
    return float(np.mean(passes))


def generalization_battery(rules: RuleSet, init: InitPattern,
                           cfg: EvalConfig = EvalConfig(),
                           progress=None) -> dict[str, dict[str, float]]:
    """Mean agency survival over the battery seeds for all 9 x 5 cells."""
    grid: dict[str, dict[str, float]] = {}
    for family, values in battery_families(cfg):
        grid[family] = {}
        for value in values:
            survival = _battery_cell_batch(rules, init, family, value, cfg)
            grid[family][str(value)] = survival
            if progress:
                progress(f"{family}={value}: {survival:.2f}")
    return grid


# ---------------------------------------------------------------------------
# Attractor-rule search


def search_attractor_rules(rules: RuleSet, init: InitPattern, budget: int,
                           rng: np.random.Generator,
                           cfg: EvalConfig = EvalConfig(),
                           steps: int = 300, disk_radius: float = 10.0,
                           overlap_threshold: float = 0.1) -> list:
    """Random attractor->learnable rules prefiltered for "the agent ended up
    on the moving attractor disk".

    The attractor disk starts ahead of the init square and drifts 1 cell per
    step along +x; a rule passes when at least one cell holds both channels
    above the overlap threshold at the last step.  Human selection happens
    downstream (in the playground).
    """
    from .params import CHANNEL_ATTRACTOR, sample_rule

    candidates = []
    x0, y0 = init.centroid()
    start = (x0 + 25.0, y0)
    for _ in range(budget):
        rule = sample_rule(rng)
        rule.c_src = CHANNEL_ATTRACTOR
        rule.c_dst = 0
        trial = rules.copy()
        trial.rules.append(rule)
        try:
            traj = rollout(init, trial, None, steps=steps,
                           shape=cfg.grid_shape, record="final",
                           dtype=cfg.np_dtype, rng=np.random.default_rng(0),
                           attractor_track=(start, (1.0, 0.0), disk_radius))
        except (DegenerateKernelError, FloatingPointError):
            continue
        end = (start[0] + steps, start[1])
        from .engine import _disk_mask
        disk = _disk_mask((end[0] % cfg.grid_shape[0], end[1]), disk_radius,
                          cfg.grid_shape)
        overlap = (traj.final > overlap_threshold) & disk
        if overlap.any():
            candidates.append(rule)
    return candidates


# ---------------------------------------------------------------------------
# Report emission


@dataclass
class EvalReport:
    params_id: str
    prefilter: bool = False
    agent: bool = False
    moving: bool = False
    speed: float = 0.0
    speed_obstacles: float = 0.0
    robustness_basic: float = 0.0
    generalization: dict = field(default_factory=dict)
    seeds: int = 10

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def evaluate_agent(rules: RuleSet, init: InitPattern, params_id: str,
                   rng: np.random.Generator | None = None,
                   cfg: EvalConfig = EvalConfig(),
                   with_battery: bool = False,
                   progress=None) -> EvalReport:
    """Run the full certification pipeline for one parameter set."""
    rng = rng or np.random.default_rng(0)
    report = EvalReport(params_id=params_id, seeds=cfg.battery_seeds)
    report.prefilter = prefilter(rules, init, cfg)
    if not report.prefilter:
        return report
    traj = rollout(init, rules, None, steps=cfg.test_steps,
                   shape=cfg.grid_shape, record="stats", dtype=cfg.np_dtype,
                   rng=np.random.default_rng(0))
    stats = TrajectoryStats.from_trajectory(traj)
    report.agent = agency_test(stats, rules, cfg)
    if not report.agent:
        return report
    report.moving = moving_test(stats, cfg)
    report.speed = speed(stats, cfg)
    if not report.moving:
        return report
    robustness, speed_obs, _ = basic_obstacle_test(rules, init, rng, cfg)
    report.robustness_basic = robustness
    report.speed_obstacles = speed_obs
    if with_battery:
        report.generalization = generalization_battery(rules, init, cfg,
                                                       progress=progress)
    return report


def save_report(path: str | Path, reports: list[EvalReport],
                cfg: EvalConfig) -> None:
    doc = {
        "config": dataclasses.asdict(cfg),
        "reports": [r.to_json() for r in reports],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2))


def report_csv(path: str | Path, reports: list[EvalReport]) -> None:
    """One row per (params id, family, value) with survival and seed count."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["params_id", "family", "value", "survival", "seeds"])
        for report in reports:
            for family, cells in report.generalization.items():
                for value, survival in cells.items():
                    writer.writerow([report.params_id, family, value,
                                     survival, report.seeds])
