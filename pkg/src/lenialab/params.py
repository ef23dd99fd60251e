"""Rule-set and initialization-pattern parameter types.

A CA instance is defined by a global kernel radius ``R``, a time divisor
``T`` and a list of rules.  Each rule owns a radial kernel built from three
Gaussian bumps (heights ``b``, widths ``w``, centers ``a``, relative radius
``r``), a growth function (``mu``, ``sigma``), a weight ``h`` and channel
wiring (``c_src`` senses, ``c_dst`` receives the growth).

The canonical configuration has 10 learnable rules wired 0 -> 0 plus one
fixed obstacle rule wired 1 -> 0.  Counting the learnable rules' scalars
(13 each) plus R and T gives 132 parameters, of which the 130 rule scalars
are free for optimization (R and T stay fixed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

N_BUMPS = 3

CHANNEL_LEARNABLE = 0
CHANNEL_OBSTACLE = 1
CHANNEL_ATTRACTOR = 2

# Legal ranges for learnable-rule scalars; mutation and gradient steps both
# project back into these.
RANGES = {
    "r": (0.0, 1.0),
    "b": (0.0, 1.0),
    "w": (0.01, 0.5),
    "a": (0.0, 1.0),
    "mu": (0.05, 0.5),
    "sigma": (0.001, 0.18),
    "h": (0.0, 1.0),
}
R_RANGE = (15, 40)
T_RANGE = (1, 10)

# Per-parameter mutation law: (std, gate probability); gate 1.0 means the
# noise is always applied.  R and T are additionally rounded to integers,
# which with std 0.1 leaves them effectively frozen.
MUTATION = {
    "r": (0.2, 1.0),
    "b": (0.2, 1.0),
    "w": (0.2, 1.0),
    "a": (0.2, 1.0),
    "mu": (0.2, 0.1),
    "sigma": (0.01, 0.1),
    "h": (0.2, 0.1),
}
MUTATION_RT = (0.1, 0.01)

PARAMS_SCHEMA_VERSION = 1

# Scalars per learnable rule: r + 3*b + 3*w + 3*a + mu + sigma + h.
SCALARS_PER_RULE = 4 + 3 * N_BUMPS


class DegenerateKernelError(ValueError):
    """Kernel profile sums to zero; normalization is undefined."""


@dataclass
class Rule:
    """One (kernel, growth) pair wiring channel ``c_src`` to ``c_dst``."""

    r: float
    b: np.ndarray
    w: np.ndarray
    a: np.ndarray
    mu: float
    sigma: float
    h: float
    c_src: int = CHANNEL_LEARNABLE
    c_dst: int = CHANNEL_LEARNABLE
    kind: str = "gaussian"  # "gaussian" | "obstacle"
    radius: int | None = None  # per-rule override of the global R

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=np.float64)
        self.w = np.asarray(self.w, dtype=np.float64)
        self.a = np.asarray(self.a, dtype=np.float64)

    def copy(self) -> "Rule":
        return replace(self, b=self.b.copy(), w=self.w.copy(), a=self.a.copy())

    def is_learnable(self) -> bool:
        return (
            self.kind == "gaussian"
            and self.c_src == CHANNEL_LEARNABLE
            and self.c_dst == CHANNEL_LEARNABLE
        )


def obstacle_rule() -> Rule:
    """The fixed rule that makes obstacle cells kill learnable-channel mass.

    Small radius so obstacles act only locally; the growth is a strong
    negative clamp handled by :func:`lenialab.growth.obstacle_growth`.
    """
    return Rule(
        r=1.0,
        b=np.array([1.0, 0.0, 0.0]),
        w=np.array([0.5, 1.0, 1.0]),
        a=np.array([0.0, 0.0, 0.0]),
        mu=0.0,
        sigma=0.1,
        h=1.0,
        c_src=CHANNEL_OBSTACLE,
        c_dst=CHANNEL_LEARNABLE,
        kind="obstacle",
        radius=4,
    )


@dataclass
class RuleSet:
    """Global radius/time constants plus the list of rules."""

    R: int
    T: int
    rules: list[Rule] = field(default_factory=list)

    def copy(self) -> "RuleSet":
        return RuleSet(self.R, self.T, [rule.copy() for rule in self.rules])

    def learnable_rules(self) -> list[Rule]:
        return [rule for rule in self.rules if rule.is_learnable()]

    def rule_radius(self, rule: Rule) -> int:
        return self.R if rule.radius is None else rule.radius

    def max_relative_radius(self) -> float:
        learnable = self.learnable_rules()
        if not learnable:
            return 1.0
        return max(rule.r for rule in learnable)

    def free_parameter_count(self) -> int:
        return SCALARS_PER_RULE * len(self.learnable_rules())

    def channel_count(self) -> int:
        top = max((max(r.c_src, r.c_dst) for r in self.rules), default=0)
        return max(top + 1, 2)


def project_ruleset(rules: RuleSet) -> RuleSet:
    """Clamp every learnable scalar back into its legal range, in place."""
    for rule in rules.rules:
        if not rule.is_learnable():
            continue
        rule.r = float(np.clip(rule.r, *RANGES["r"]))
        np.clip(rule.b, *RANGES["b"], out=rule.b)
        np.clip(rule.w, *RANGES["w"], out=rule.w)
        np.clip(rule.a, *RANGES["a"], out=rule.a)
        rule.mu = float(np.clip(rule.mu, *RANGES["mu"]))
        rule.sigma = float(np.clip(rule.sigma, *RANGES["sigma"]))
        rule.h = float(np.clip(rule.h, *RANGES["h"]))
    rules.R = int(np.clip(rules.R, *R_RANGE))
    rules.T = int(np.clip(rules.T, *T_RANGE))
    return rules


def check_ranges(rules: RuleSet) -> bool:
    """True when every learnable scalar sits inside its legal range."""
    for rule in rules.learnable_rules():
        if not RANGES["r"][0] <= rule.r <= RANGES["r"][1]:
            return False
        for name, arr in (("b", rule.b), ("w", rule.w), ("a", rule.a)):
            lo, hi = RANGES[name]
            if np.any(arr < lo) or np.any(arr > hi):
                return False
        if not RANGES["mu"][0] <= rule.mu <= RANGES["mu"][1]:
            return False
        if not RANGES["sigma"][0] <= rule.sigma <= RANGES["sigma"][1]:
            return False
        if not RANGES["h"][0] <= rule.h <= RANGES["h"][1]:
            return False
    return True


def sample_rule(rng: np.random.Generator, h_max: float = 1.0) -> Rule:
    u = rng.uniform
    return Rule(
        r=float(u(*RANGES["r"])),
        b=u(*RANGES["b"], size=N_BUMPS),
        w=u(*RANGES["w"], size=N_BUMPS),
        a=u(*RANGES["a"], size=N_BUMPS),
        mu=float(u(*RANGES["mu"])),
        sigma=float(u(*RANGES["sigma"])),
        h=float(u(RANGES["h"][0], h_max)),
    )


def sample_ruleset(
    rng: np.random.Generator,
    n_rules: int = 10,
    h_max: float = 1.0,
    r_range: tuple[int, int] = R_RANGE,
    with_obstacle: bool = True,
) -> RuleSet:
    """Uniform parameters in the legal ranges, R and T drawn as integers."""
    rules = [sample_rule(rng, h_max=h_max) for _ in range(n_rules)]
    if with_obstacle:
        rules.append(obstacle_rule())
    return RuleSet(
        R=int(rng.integers(r_range[0], r_range[1] + 1)),
        T=int(rng.integers(T_RANGE[0], T_RANGE[1] + 1)),
        rules=rules,
    )


@dataclass
class InitPattern:
    """Learnable initialization square and its top-left placement offset."""

    values: np.ndarray
    placement: tuple[int, int] = (36, 105)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    def copy(self) -> "InitPattern":
        return InitPattern(self.values.copy(), tuple(self.placement))

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.values.shape)

    def centroid(self) -> tuple[float, float]:
        """Center of the placement square in cell coordinates."""
        return (
            self.placement[0] + self.values.shape[0] / 2.0,
            self.placement[1] + self.values.shape[1] / 2.0,
        )


def sample_init(
    rng: np.random.Generator,
    shape: tuple[int, int] = (40, 40),
    placement: tuple[int, int] = (36, 105),
) -> InitPattern:
    return InitPattern(rng.uniform(0.0, 1.0, size=shape), placement)


# ---------------------------------------------------------------------------
# Flat packing of the free scalars (gradient and mutation work on this view).

def pack_free(rules: RuleSet) -> np.ndarray:
    """Free scalars as one vector: per learnable rule [r, b, w, a, mu, sigma, h]."""
    out = []
    for rule in rules.learnable_rules():
        out.extend([rule.r, *rule.b, *rule.w, *rule.a, rule.mu, rule.sigma, rule.h])
    return np.array(out, dtype=np.float64)


def unpack_free(rules: RuleSet, vec: np.ndarray) -> RuleSet:
    """Write a flat vector of free scalars back into a copy of ``rules``."""
    out = rules.copy()
    i = 0
    for rule in out.rules:
        if not rule.is_learnable():
            continue
        rule.r = float(vec[i]); i += 1
        rule.b = np.array(vec[i:i + N_BUMPS], dtype=np.float64); i += N_BUMPS
        rule.w = np.array(vec[i:i + N_BUMPS], dtype=np.float64); i += N_BUMPS
        rule.a = np.array(vec[i:i + N_BUMPS], dtype=np.float64); i += N_BUMPS
        rule.mu = float(vec[i]); i += 1
        rule.sigma = float(vec[i]); i += 1
        rule.h = float(vec[i]); i += 1
    if i != len(vec):
        raise ValueError(f"vector length {len(vec)} does not match {i} free scalars")
    return out


FREE_FIELD_SLICES = {
    "r": slice(0, 1),
    "b": slice(1, 1 + N_BUMPS),
    "w": slice(1 + N_BUMPS, 1 + 2 * N_BUMPS),
    "a": slice(1 + 2 * N_BUMPS, 1 + 3 * N_BUMPS),
    "mu": slice(1 + 3 * N_BUMPS, 2 + 3 * N_BUMPS),
    "sigma": slice(2 + 3 * N_BUMPS, 3 + 3 * N_BUMPS),
    "h": slice(3 + 3 * N_BUMPS, 4 + 3 * N_BUMPS),
}


def free_bounds(rules: RuleSet) -> tuple[np.ndarray, np.ndarray]:
    """Lower/upper clamp vectors aligned with :func:`pack_free`."""
    n = len(rules.learnable_rules())
    lo = np.empty(n * SCALARS_PER_RULE)
    hi = np.empty(n * SCALARS_PER_RULE)
    for k in range(n):
        base = k * SCALARS_PER_RULE
        for name, sl in FREE_FIELD_SLICES.items():
            lo[base + sl.start:base + sl.stop] = RANGES[name][0]
            hi[base + sl.start:base + sl.stop] = RANGES[name][1]
    return lo, hi


# ---------------------------------------------------------------------------
# JSON parameter files.

def ruleset_to_json(rules: RuleSet, init: InitPattern | None = None,
                    init_data: str | list | None = None) -> dict:
    doc = {
        "schema_version": PARAMS_SCHEMA_VERSION,
        "R": int(rules.R),
        "T": int(rules.T),
        "rules": [
            {
                "r": float(rule.r),
                "b": [float(v) for v in rule.b],
                "w": [float(v) for v in rule.w],
                "a": [float(v) for v in rule.a],
                "mu": float(rule.mu),
                "sigma": float(rule.sigma),
                "h": float(rule.h),
                "c_src": int(rule.c_src),
                "c_dst": int(rule.c_dst),
                **({"kind": rule.kind} if rule.kind != "gaussian" else {}),
                **({"radius": int(rule.radius)} if rule.radius is not None else {}),
            }
            for rule in rules.rules
        ],
    }
    if init is not None:
        if init_data is None:
            init_data = [float(v) for v in init.values.ravel()]
        doc["init"] = {
            "shape": list(init.values.shape),
            "placement": list(init.placement),
            "data": init_data,
        }
    return doc


def _rule_from_json(entry: dict) -> Rule:
    kind = entry.get("kind")
    if kind is None:
        kind = "obstacle" if entry.get("c_src", 0) == CHANNEL_OBSTACLE else "gaussian"
    return Rule(
        r=float(entry["r"]),
        b=np.array(entry["b"], dtype=np.float64),
        w=np.array(entry["w"], dtype=np.float64),
        a=np.array(entry["a"], dtype=np.float64),
        mu=float(entry["mu"]),
        sigma=float(entry["sigma"]),
        h=float(entry["h"]),
        c_src=int(entry.get("c_src", 0)),
        c_dst=int(entry.get("c_dst", 0)),
        kind=kind,
        radius=entry.get("radius"),
    )


def ruleset_from_json(doc: dict, base_dir: Path | None = None
                      ) -> tuple[RuleSet, InitPattern | None]:
    rules = RuleSet(
        R=int(doc["R"]),
        T=int(doc["T"]),
        rules=[_rule_from_json(e) for e in doc["rules"]],
    )
    init = None
    if "init" in doc:
        spec = doc["init"]
        shape = tuple(spec["shape"])
        data = spec["data"]
        if isinstance(data, str):
            path = Path(data)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            values = np.fromfile(path, dtype="<f4").astype(np.float64)
        else:
            values = np.array(data, dtype=np.float64)
        values = values.reshape(shape)
        placement = tuple(spec.get("placement", (36, 105)))
        init = InitPattern(values, placement)
    return rules, init


def save_params(path: str | Path, rules: RuleSet, init: InitPattern | None = None,
                init_binary: bool = False) -> None:
    """Write a parameter JSON file; optionally spill the init to a .bin sibling."""
    path = Path(path)
    init_data = None
    if init is not None and init_binary:
        bin_path = path.with_suffix("").with_suffix(".init.bin")
        init.values.astype("<f4").tofile(bin_path)
        init_data = bin_path.name
    doc = ruleset_to_json(rules, init, init_data)
    path.write_text(json.dumps(doc, sort_keys=True))


def load_params(path: str | Path) -> tuple[RuleSet, InitPattern | None]:
    path = Path(path)
    doc = json.loads(path.read_text())
    return ruleset_from_json(doc, base_dir=path.parent)
