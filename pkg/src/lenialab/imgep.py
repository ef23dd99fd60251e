"""Goal-directed discovery loop over CA parameters.

The search keeps a history of (parameters, reached position, collapse
proxy) records.  Each outer step samples a target position (deterministic
warm-up for the first eight steps, then a curriculum-biased stochastic
sampler), warm-starts from the history entry closest to the goal, usually
mutates it, optimizes it toward the goal by differentiating through the
rollout, then re-evaluates the result over 20 obstacle draws and appends it
to the history.  A restart mechanism re-rolls the whole history while any
of the first three warm-up optimizations fails to get close to its target.

Positions are normalized to [-0.5, 0.5] per axis.  The collapse proxy ``c``
is the cell-mean squared mismatch between the final state and the target
disk re-centered on its own center of mass: tiny for compact patterns and
dead grids alike, large only when mass has exploded across the grid, so the
c <= 0.11 reuse filter screens explosions.  Dead rollouts contribute the
init-square center as their reached position, and the selection metric's
(c - 0.065)^2 term plus the warm-up loss gate keep dead parameter sets from
seeding descents.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import LossSpec, backward, forward_loss
from .engine import rollout, rollout_batch
from .geometry import (center_of_mass, collapse_score, disk_score, goal_score,
                       normalize_position)
from .kernels import compile_rules
from .obstacles import training_obstacles
from .optim import Adam
from .params import (DegenerateKernelError, InitPattern, MUTATION,
                     MUTATION_RT, RuleSet, project_ruleset, sample_init,
                     sample_ruleset, save_params)

WARMUP_START = (-0.19, 0.0)  # first deterministic target (normalized)
WARMUP_DX = 0.06             # per-step x advance of the warm-up targets


class HistoryExhaustedError(RuntimeError):
    """No history entry passes the collapse filter."""


class GoalSamplingStalledError(RuntimeError):
    def __init__(self, goal):
        super().__init__("goal sampling stalled; returning last draw")
        self.goal = goal


class MutationStuckError(RuntimeError):
    """Mutation retries exhausted without a non-collapsing draw."""


@dataclass
class SearchConfig:
    """All knobs of the discovery loop; defaults are the paper-scale run."""

    grid_shape: tuple[int, int] = (256, 256)
    init_shape: tuple[int, int] = (40, 40)
    init_offset: tuple[int, int] = (36, 105)
    n_rules: int = 10
    r_range: tuple[int, int] = (15, 40)

    n_outer: int = 120
    history_init: int = 40
    warmup_goals: int = 8
    warmup_start: tuple[float, float] = WARMUP_START
    warmup_dx: float = WARMUP_DX
    long_every: int = 5           # 1 out of 5 outer steps gets the long descent
    grad_steps_long: int = 125
    grad_steps_short: int = 15
    rollout_steps: int = 50
    eval_rollouts: int = 20

    n_obstacles: int = 8
    obstacle_radius: float = 10.0
    clear_init: bool = True

    c_filter: float = 0.11
    c_goal: float = 0.065
    close_radius: float = 0.1
    veryclose_radius: float = 0.05
    goal_draw_cap: int = 1000

    init_sel_threshold: float = 0.08
    init_sel_steps: int = 3
    max_restarts: int = 20

    mutation_cap: int = 50
    mutation_mass_min: float = 10.0
    mutation_score_max: float = 25.0
    mutate_warmups: bool = False  # no mutation during deterministic warm-ups

    lr_rules: float = 1e-3
    lr_init: float = 1e-2
    h_init_max: float = 1.0 / 3.0

    dtype: str = "float32"

    no_obstacles: bool = False
    no_gradient: bool = False
    uniform_goals: bool = False

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    @classmethod
    def desk(cls, **overrides) -> "SearchConfig":
        """Workstation-scale preset: 128 grid, 20x20 init, 4 small obstacles.

        Warm-up targets start closer and advance in smaller strides than at
        full scale: the target disk radii (10/5 cells) are absolute, so on a
        128 grid the full-scale stride would outrun the disk overlap that
        gradients need.
        """
        base = dict(
            grid_shape=(128, 128), init_shape=(20, 20), init_offset=(18, 52),
            r_range=(8, 20), n_outer=30, n_obstacles=4, obstacle_radius=6.0,
            warmup_start=(-0.24, 0.0), warmup_dx=0.04,
            init_sel_threshold=0.20, max_restarts=12,
        )
        base.update(overrides)
        return cls(**base)

    def to_json(self) -> dict:
        doc = dataclasses.asdict(self)
        for key, value in doc.items():
            if isinstance(value, tuple):
                doc[key] = list(value)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "SearchConfig":
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name in doc:
                value = doc[f.name]
                if isinstance(value, list):
                    value = tuple(value)
                kwargs[f.name] = value
        return cls(**kwargs)


@dataclass
class RolloutLedger:
    """Budget accounting; ``total`` counts every rollout as it happens."""

    history_init: int = 0
    mutation_retries: int = 0
    gradient_steps: int = 0
    evaluation: int = 0
    restart_discarded: int = 0
    total: int = 0

    def count(self, bucket: str, n: int = 1) -> None:
        setattr(self, bucket, getattr(self, bucket) + n)
        self.total += n

    def discard_cycle(self, snapshot: dict) -> None:
        """Move everything consumed since ``snapshot`` into the restart bucket."""
        for bucket in ("history_init", "mutation_retries", "gradient_steps",
                       "evaluation"):
            delta = getattr(self, bucket) - snapshot[bucket]
            setattr(self, bucket, snapshot[bucket])
            self.restart_discarded += delta

    def snapshot(self) -> dict:
        return {k: getattr(self, k) for k in
                ("history_init", "mutation_retries", "gradient_steps",
                 "evaluation")}

    def as_dict(self) -> dict:
        return {
            "history_init": self.history_init,
            "mutation_retries": self.mutation_retries,
            "gradient_steps": self.gradient_steps,
            "evaluation": self.evaluation,
            "restart_discarded": self.restart_discarded,
            "total": self.total,
        }


@dataclass
class HistoryEntry:
    id: int
    rules: RuleSet
    init: InitPattern
    reached: np.ndarray           # normalized (x, y), mean over eval rollouts
    c: float
    kind: str = "init"            # "init" | "step"
    step: int = -1                # 1-based outer step for kind == "step"
    parent: int | None = None
    goal: tuple[float, float] | None = None
    opt_loss: float | None = None
    blowup: bool = False

    def admissible(self, c_filter: float) -> bool:
        return self.c <= c_filter


@dataclass
class EvalResult:
    reached: np.ndarray
    c: float
    goal_loss: float | None
    mean_mass: float
    dead_fraction: float


@dataclass
class DiscoveryRun:
    config: SearchConfig
    seed: int
    history: list[HistoryEntry]
    ledger: RolloutLedger
    restarts: int = 0
    ablation: str | None = None
    kind: str = "imgep"


# ---------------------------------------------------------------------------
# Evaluation of a parameter set


def _draw_obstacles(rng, config: SearchConfig):
    if config.no_obstacles:
        return None
    return training_obstacles(rng, config.grid_shape,
                              n=config.n_obstacles,
                              radius=config.obstacle_radius)


def evaluate_params(rules: RuleSet, init: InitPattern,
                    rng: np.random.Generator, config: SearchConfig,
                    ledger: RolloutLedger | None = None,
                    goal=None) -> EvalResult:
    """Mean reached position and collapse proxy over ``eval_rollouts``
    training-style obstacle draws.

    Dead rollouts (zero final mass or a numerical blowup) contribute the
    init-square center as their reached position and the dead-state disk
    score as their c, which keeps them out of history reuse.
    """
    shape = config.grid_shape
    B = config.eval_rollouts
    masks = None
    if not config.no_obstacles:
        masks = np.stack([
            _draw_obstacles(rng, config).rasterize(shape) for _ in range(B)
        ])
    try:
        batch = rollout_batch(init, rules, masks, steps=config.rollout_steps,
                              shape=shape, clear_init=config.clear_init,
                              dtype=config.np_dtype, record_trace=False,
                              seeds=list(range(B)) if masks is None else None)
        finals = batch.finals
        blowups = batch.blowup
    except DegenerateKernelError:
        finals = np.zeros((B, *shape), dtype=config.np_dtype)
        blowups = np.zeros(B, dtype=bool)
    if ledger is not None:
        ledger.count("evaluation", B)

    centroid = normalize_position(init.centroid(), shape)
    reached = np.zeros((B, 2))
    cs = np.zeros(B)
    goal_losses = np.zeros(B)
    dead = 0
    for i in range(B):
        final = finals[i]
        mass = float(final.sum())
        if blowups[i] or mass <= 0.0:
            final = np.zeros_like(final)
            reached[i] = centroid
            cs[i] = collapse_score(final)
            dead += 1
        else:
            com = center_of_mass(final)
            reached[i] = normalize_position(com, shape)
            cs[i] = collapse_score(final, center=com)
        if goal is not None:
            goal_losses[i] = goal_score(final, goal)
    return EvalResult(
        reached=reached.mean(axis=0),
        c=float(cs.mean()),
        goal_loss=float(goal_losses.mean()) if goal is not None else None,
        mean_mass=float(finals.sum(axis=(1, 2)).mean()),
        dead_fraction=dead / B,
    )


# ---------------------------------------------------------------------------
# History bootstrap


def init_history(rng: np.random.Generator, config: SearchConfig,
                 ledger: RolloutLedger | None = None,
                 n: int | None = None) -> list[HistoryEntry]:
    """Random parameter sets (kernel weights h drawn in [0, h_init_max])
    evaluated and stored; failures keep their measured c."""
    n = config.history_init if n is None else n
    entries = []
    for i in range(n):
        rules = sample_ruleset(rng, n_rules=config.n_rules,
                               h_max=config.h_init_max,
                               r_range=config.r_range)
        init = sample_init(rng, shape=config.init_shape,
                           placement=config.init_offset)
        result = evaluate_params(rules, init, rng, config, ledger)
        entries.append(HistoryEntry(
            id=i, rules=rules, init=init, reached=result.reached,
            c=result.c, kind="init",
        ))
    return entries


# ---------------------------------------------------------------------------
# Goal sampling


def bestgoal(history: list[HistoryEntry], config: SearchConfig) -> np.ndarray:
    """Reached position with maximal x among admissible entries."""
    best = None
    for entry in history:
        if not entry.admissible(config.c_filter):
            continue
        if best is None or entry.reached[0] > best.reached[0]:
            best = entry
    if best is None:
        raise HistoryExhaustedError("no admissible entry for bestgoal")
    return np.array(best.reached, dtype=np.float64)


def _count_close(history, goal, config):
    nb_close = nb_very = 0
    for entry in history:
        d = float(np.hypot(entry.reached[0] - goal[0],
                           entry.reached[1] - goal[1]))
        if d <= config.close_radius:
            nb_close += 1
        if d <= config.veryclose_radius:
            nb_very += 1
    return nb_close, nb_very


def sample_goal(history: list[HistoryEntry], step_index: int,
                rng: np.random.Generator, config: SearchConfig,
                return_info: bool = False):
    """Target for outer step ``step_index`` (1-based).

    Steps 1..8 take deterministic warm-up positions marching along +x.
    Later steps loop over three stochastic branches (probabilities
    0.2 / 0.56 / 0.24): a nudge past the best reached x, and two bands of
    far points ahead of the obstacle frontier; draws are accepted once at
    least one reached position is close (<= 0.1) and at most two are very
    close (<= 0.05).  A stalled loop raises with the last draw attached.
    """
    if config.uniform_goals:
        goal = rng.uniform(-0.5, 0.5, size=2)
        return (goal, ("uniform", 1)) if return_info else goal
    if step_index <= config.warmup_goals:
        goal = np.array([config.warmup_start[0]
                         + config.warmup_dx * (step_index - 1),
                         config.warmup_start[1]])
        return (goal, ("warmup", 0)) if return_info else goal

    goal = None
    branch = None
    for draw in range(1, config.goal_draw_cap + 1):
        if rng.random() < 0.2:
            bg = bestgoal(history, config)
            goal = bg + np.array([rng.random() * 0.04 + 0.02,
                                  (rng.random() * 0.45 - 0.22) / 4.0])
            branch = "best"
        elif rng.random() < 0.7:
            goal = np.array([-rng.random() * 0.2 + 0.35,
                             rng.random() * 0.45 - 0.22])
            branch = "far"
        else:
            goal = np.array([-rng.random() * 0.35 + 0.35,
                             rng.random() * 0.45 - 0.22])
            branch = "wide"
        nb_close, nb_very = _count_close(history, goal, config)
        if nb_close >= 1 and nb_very <= 2:
            return (goal, (branch, draw)) if return_info else goal
    raise GoalSamplingStalledError(goal)


# ---------------------------------------------------------------------------
# Candidate selection and mutation


def select_candidate(history: list[HistoryEntry], goal,
                     config: SearchConfig) -> HistoryEntry:
    """Admissible entry minimizing || (c, reached) - (c_goal, goal) ||."""
    best = None
    best_d = np.inf
    for entry in history:
        if not entry.admissible(config.c_filter):
            continue
        d = ((entry.c - config.c_goal) ** 2
             + (entry.reached[0] - goal[0]) ** 2
             + (entry.reached[1] - goal[1]) ** 2)
        if d < best_d:
            best, best_d = entry, d
    if best is None:
        raise HistoryExhaustedError("no history entry passes the c filter")
    return best


def mutate_once(rules: RuleSet, rng: np.random.Generator) -> RuleSet:
    """One gated-Gaussian mutation of every learnable rule, clamped to the
    legal ranges.  R and T mutate with std 0.1 gate 0.01 and then round,
    which in practice leaves them fixed."""
    out = rules.copy()
    for rule in out.rules:
        if not rule.is_learnable():
            continue
        rule.r += rng.normal(0.0, MUTATION["r"][0])
        rule.b = rule.b + rng.normal(0.0, MUTATION["b"][0], size=rule.b.shape)
        rule.w = rule.w + rng.normal(0.0, MUTATION["w"][0], size=rule.w.shape)
        rule.a = rule.a + rng.normal(0.0, MUTATION["a"][0], size=rule.a.shape)
        if rng.random() < MUTATION["mu"][1]:
            rule.mu += rng.normal(0.0, MUTATION["mu"][0])
        if rng.random() < MUTATION["sigma"][1]:
            rule.sigma += rng.normal(0.0, MUTATION["sigma"][0])
        if rng.random() < MUTATION["h"][1]:
            rule.h += rng.normal(0.0, MUTATION["h"][0])
    std_rt, gate_rt = MUTATION_RT
    if rng.random() < gate_rt:
        out.R = int(round(out.R + rng.normal(0.0, std_rt)))
    if rng.random() < gate_rt:
        out.T = int(round(out.T + rng.normal(0.0, std_rt)))
    return project_ruleset(out)


def _soft_check(rules, init, rng, config, ledger) -> bool:
    """Non-collapse screen: one 50-step rollout must keep mass above the
    floor and a bounded disk mismatch (shape score < 25, i.e. the mass has
    not exploded into a large smear)."""
    obstacles = _draw_obstacles(rng, config)
    if ledger is not None:
        ledger.count("mutation_retries")
    try:
        traj = rollout(init, rules, obstacles, steps=config.rollout_steps,
                       shape=config.grid_shape, record="final",
                       clear_init=config.clear_init, dtype=config.np_dtype,
                       rng=np.random.default_rng(0))
    except (DegenerateKernelError, FloatingPointError):
        return False
    mass = float(traj.final.sum())
    if mass <= config.mutation_mass_min:
        return False
    return disk_score(traj.final) < config.mutation_score_max


def mutate(rules: RuleSet, init: InitPattern, rng: np.random.Generator,
           config: SearchConfig, ledger: RolloutLedger | None = None
           ) -> tuple[RuleSet, InitPattern, int]:
    """Mutate until the draw passes the non-collapse screen (capped)."""
    for attempt in range(1, config.mutation_cap + 1):
        candidate = mutate_once(rules, rng)
        if _soft_check(candidate, init, rng, config, ledger):
            return candidate, init.copy(), attempt
    raise MutationStuckError(f"no viable mutation in {config.mutation_cap} tries")


# ---------------------------------------------------------------------------
# Optimization toward a goal


def optimize_goal(rules: RuleSet, init: InitPattern, goal, n_steps: int,
                  rng: np.random.Generator, config: SearchConfig,
                  ledger: RolloutLedger | None = None
                  ) -> tuple[RuleSet, InitPattern, float, bool]:
    """``n_steps`` of projected Adam on the goal loss, one fresh obstacle
    draw per step.  Returns (rules, init, last loss, blowup flag); on a
    numerical blowup the incoming parameters are returned unchanged."""
    spec = LossSpec(goal=tuple(goal), steps=config.rollout_steps)
    opt = Adam(lr_rules=config.lr_rules, lr_init=config.lr_init)
    cur_rules, cur_init = rules.copy(), init.copy()
    last_loss = np.inf
    for _ in range(n_steps):
        obstacles = _draw_obstacles(rng, config)
        if ledger is not None:
            ledger.count("gradient_steps")
        try:
            loss, grad = backward(cur_rules, cur_init, obstacles, spec,
                                  shape=config.grid_shape,
                                  dtype=config.np_dtype,
                                  clear_init=config.clear_init)
        except (FloatingPointError, DegenerateKernelError):
            return rules.copy(), init.copy(), np.inf, True
        if not np.isfinite(loss) or not np.isfinite(grad.pack()).all():
            return rules.copy(), init.copy(), np.inf, True
        cur_rules, cur_init = opt.step(cur_rules, cur_init, grad)
        last_loss = loss
    return cur_rules, cur_init, float(last_loss), False


def optimize_goal_nograd(rules: RuleSet, init: InitPattern, goal,
                         n_trials: int, rng: np.random.Generator,
                         config: SearchConfig,
                         ledger: RolloutLedger | None = None
                         ) -> tuple[RuleSet, InitPattern, float, bool]:
    """Gradient-free stand-in: ``n_trials`` parallel mutations of the
    candidate, keep the lowest goal loss (one rollout per trial)."""
    spec = LossSpec(goal=tuple(goal), steps=config.rollout_steps)
    best = (rules.copy(), init.copy())
    best_loss = np.inf
    for _ in range(n_trials):
        trial_rules = mutate_once(rules, rng)
        obstacles = _draw_obstacles(rng, config)
        if ledger is not None:
            ledger.count("gradient_steps")
        try:
            loss = forward_loss(trial_rules, init, obstacles, spec,
                                shape=config.grid_shape,
                                dtype=config.np_dtype,
                                clear_init=config.clear_init)
        except (FloatingPointError, DegenerateKernelError):
            continue
        if np.isfinite(loss) and loss < best_loss:
            best_loss = loss
            best = (trial_rules, init.copy())
    return best[0], best[1], float(best_loss), not np.isfinite(best_loss)


# ---------------------------------------------------------------------------
# The outer loop


def _outer_step(history, step_index, rng, config, ledger
                ) -> tuple[HistoryEntry, float | None]:
    try:
        goal = sample_goal(history, step_index, rng, config)
    except GoalSamplingStalledError as err:
        goal = np.asarray(err.goal)
    candidate = select_candidate(history, goal, config)

    long_branch = step_index % config.long_every == 0
    in_warmup = (step_index <= config.warmup_goals
                 and not config.uniform_goals)
    cur_rules, cur_init = candidate.rules.copy(), candidate.init.copy()
    if not long_branch and (config.mutate_warmups or not in_warmup):
        try:
            cur_rules, cur_init, _ = mutate(cur_rules, cur_init, rng, config,
                                            ledger)
        except MutationStuckError:
            cur_rules, cur_init = candidate.rules.copy(), candidate.init.copy()
    n_steps = config.grad_steps_long if long_branch else config.grad_steps_short

    optimizer = optimize_goal_nograd if config.no_gradient else optimize_goal
    new_rules, new_init, opt_loss, blowup = optimizer(
        cur_rules, cur_init, goal, n_steps, rng, config, ledger)
    if blowup:
        new_rules, new_init = candidate.rules.copy(), candidate.init.copy()

    result = evaluate_params(new_rules, new_init, rng, config, ledger,
                             goal=goal)
    entry = HistoryEntry(
        id=len(history), rules=new_rules, init=new_init,
        reached=result.reached, c=result.c, kind="step", step=step_index,
        parent=candidate.id, goal=(float(goal[0]), float(goal[1])),
        opt_loss=opt_loss if np.isfinite(opt_loss) else None, blowup=blowup,
    )
    history.append(entry)
    return entry, result.goal_loss


def run_imgep(config: SearchConfig, seed: int,
              out_dir: str | Path | None = None,
              initial_history: list[HistoryEntry] | None = None,
              progress=None) -> DiscoveryRun:
    """Full discovery run: bootstrap with initialization selection, then
    ``n_outer`` outer steps.  Identical (config, seed) pairs reproduce the
    run bit for bit."""
    rng = np.random.default_rng(seed)
    ledger = RolloutLedger()
    restarts = 0
    history: list[HistoryEntry] = []
    start_step = 1

    if initial_history is not None:
        history = list(initial_history)
    else:
        sel_steps = min(config.init_sel_steps, config.n_outer)
        while True:
            snapshot = ledger.snapshot()
            history = init_history(rng, config, ledger)
            ok = True
            for i in range(1, sel_steps + 1):
                try:
                    _, goal_loss = _outer_step(history, i, rng, config, ledger)
                except HistoryExhaustedError:
                    goal_loss = None
                if progress:
                    progress(f"warmup {i} goal_loss="
                             f"{'n/a' if goal_loss is None else f'{goal_loss:.4f}'}")
                if goal_loss is None or goal_loss > config.init_sel_threshold:
                    ok = False
                    break
            if ok or restarts >= config.max_restarts:
                break
            restarts += 1
            ledger.discard_cycle(snapshot)
            history = []
        start_step = sel_steps + 1

    step = start_step
    while step <= config.n_outer:
        try:
            entry, _ = _outer_step(history, step, rng, config, ledger)
        except HistoryExhaustedError:
            # Nothing reusable: re-bootstrap and retry the same step.
            restarts += 1
            history = init_history(rng, config, ledger)
            continue
        if progress:
            progress(f"step {step}: reached=({entry.reached[0]:+.3f},"
                     f"{entry.reached[1]:+.3f}) c={entry.c:.3f}")
        step += 1

    run = DiscoveryRun(config=config, seed=seed, history=history,
                       ledger=ledger, restarts=restarts,
                       ablation=_ablation_name(config))
    if out_dir is not None:
        save_run(run, out_dir)
    return run


def _ablation_name(config: SearchConfig) -> str | None:
    if config.no_obstacles:
        return "no-obstacles"
    if config.no_gradient:
        return "no-gradient"
    if config.uniform_goals:
        return "uniform-goals"
    return None


def run_random_search(budget: int, seed: int,
                      config: SearchConfig | None = None,
                      out_dir: str | Path | None = None) -> DiscoveryRun:
    """Uniform parameter sampling at the full ranges (h not reduced), one
    50-step summary rollout per sample."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    config = config or SearchConfig()
    rng = np.random.default_rng(seed)
    ledger = RolloutLedger()
    history = []
    for i in range(budget):
        rules = sample_ruleset(rng, n_rules=config.n_rules, h_max=1.0,
                               r_range=config.r_range)
        init = sample_init(rng, shape=config.init_shape,
                           placement=config.init_offset)
        one = dataclasses.replace(config, eval_rollouts=1)
        result = evaluate_params(rules, init, rng, one, ledger)
        history.append(HistoryEntry(
            id=i, rules=rules, init=init, reached=result.reached,
            c=result.c, kind="init",
        ))
    run = DiscoveryRun(config=config, seed=seed, history=history,
                       ledger=ledger, kind="random")
    if out_dir is not None:
        save_run(run, out_dir)
    return run


# ---------------------------------------------------------------------------
# Run directory IO


def save_run(run: DiscoveryRun, out_dir: str | Path) -> None:
    out = Path(out_dir)
    (out / "patterns").mkdir(parents=True, exist_ok=True)
    lines = []
    for entry in run.history:
        name = f"{entry.id:03d}"
        params_file = f"patterns/{name}.params.json"
        init_bin = out / "patterns" / f"{name}.init.bin"
        entry.init.values.astype("<f4").tofile(init_bin)
        doc = _entry_params_doc(entry, f"{name}.init.bin")
        (out / params_file).write_text(json.dumps(doc, sort_keys=True))
        lines.append(json.dumps({
            "id": entry.id,
            "kind": entry.kind,
            "step": entry.step,
            "parent": entry.parent,
            "goal": list(entry.goal) if entry.goal else None,
            "reached": [float(entry.reached[0]), float(entry.reached[1])],
            "c": float(entry.c),
            "opt_loss": entry.opt_loss,
            "blowup": entry.blowup,
            "params_file": params_file,
        }, sort_keys=True))
    (out / "history.jsonl").write_text("\n".join(lines) + "\n")
    (out / "run.json").write_text(json.dumps({
        "kind": run.kind,
        "seed": run.seed,
        "ablation": run.ablation,
        "restarts": run.restarts,
        "records": len(run.history),
        "ledger": run.ledger.as_dict(),
        "config": run.config.to_json(),
    }, sort_keys=True, indent=2))


def _entry_params_doc(entry: HistoryEntry, init_bin_name: str) -> dict:
    from .params import ruleset_to_json

    doc = ruleset_to_json(entry.rules, entry.init, init_data=init_bin_name)
    return doc


def load_run(run_dir: str | Path) -> DiscoveryRun:
    from .params import load_params

    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "run.json").read_text())
    config = SearchConfig.from_json(meta["config"])
    history = []
    for line in (run_dir / "history.jsonl").read_text().splitlines():
        row = json.loads(line)
        rules, init = load_params(run_dir / row["params_file"])
        history.append(HistoryEntry(
            id=row["id"], rules=rules, init=init,
            reached=np.array(row["reached"]), c=row["c"], kind=row["kind"],
            step=row["step"], parent=row["parent"],
            goal=tuple(row["goal"]) if row["goal"] else None,
            opt_loss=row["opt_loss"], blowup=row["blowup"],
        ))
    ledger = RolloutLedger(**meta["ledger"])
    return DiscoveryRun(config=config, seed=meta["seed"], history=history,
                        ledger=ledger, restarts=meta.get("restarts", 0),
                        ablation=meta.get("ablation"), kind=meta.get("kind", "imgep"))
