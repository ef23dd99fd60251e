"""The update step and rollout loops (single and batched).

Update rule for the learnable channel, per step:

    A' = clip(A + (1/T) * (m .* sum_k h_k G_k(K_k * A_src) + O + noise), 0, 1)

where the sum runs over Gaussian-growth rules, ``O`` is the obstacle-rule
contribution (never suppressed by the update mask ``m``) and ``*`` is a
circular convolution.  An update-mask rate p < 1 draws m ~ Bernoulli(p) per
cell; a rate 1 < p < 2 applies one full update and then a second full update
per-cell with probability p - 1, sensing the intermediate state.  Obstacle
and attractor channels are static within a step; a moving obstacle config
shifts channel 1 after each step.

Rollout sensing of static channels is computed once and rolled along with
the obstacle mask, which keeps a 50-step rollout at one forward FFT plus one
inverse FFT per Gaussian rule per step.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .grids import GridState
from .growth import growth, obstacle_growth
from .kernels import CompiledRules, compile_rules
from .obstacles import ObstacleConfig, clear_near_pattern
from .params import CHANNEL_LEARNABLE, InitPattern, RuleSet
from .perturb import IDENTITY, PerturbationSpec, apply_init_noise

_WORKERS = int(os.environ.get("THREADS", "0")) or (os.cpu_count() or 1)


class NumericalBlowupError(FloatingPointError):
    """Non-finite values appeared in the state or parameters."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


def _rfft2(a):
    return sfft.rfft2(a, axes=(-2, -1), workers=_WORKERS)


def _irfft2(a, shape):
    return sfft.irfft2(a, s=shape, axes=(-2, -1), workers=_WORKERS)


def split_rules(compiled: CompiledRules):
    """(dynamic gaussian, static gaussian, obstacle-kind) compiled rules."""
    dyn, stat, obs = [], [], []
    for c in compiled.compiled:
        if c.rule.kind == "obstacle":
            obs.append(c)
        elif c.rule.c_src == CHANNEL_LEARNABLE:
            dyn.append(c)
        else:
            stat.append(c)
    return dyn, stat, obs


def dynamic_growth(compiled_dyn, A0: np.ndarray, shape) -> np.ndarray:
    """sum_k h_k G_k(K_k * A0) over rules sensing the learnable channel."""
    FA = _rfft2(A0)
    total = np.zeros_like(A0)
    for c in compiled_dyn:
        U = _irfft2(FA * c.spectrum, shape)
        total += c.rule.h * growth(U, c.rule.mu, c.rule.sigma).astype(A0.dtype)
    return total


def static_growth(compiled_static, compiled_obs, channels, shape):
    """Growth contributions from static channels: (maskable, obstacle) parts."""
    dtype = channels.dtype
    maskable = np.zeros(shape, dtype=dtype)
    obstacle = np.zeros(shape, dtype=dtype)
    for c in compiled_static:
        U = _irfft2(_rfft2(channels[c.rule.c_src]) * c.spectrum, shape)
        maskable += c.rule.h * growth(U, c.rule.mu, c.rule.sigma).astype(dtype)
    for c in compiled_obs:
        U = _irfft2(_rfft2(channels[c.rule.c_src]) * c.spectrum, shape)
        obstacle += c.rule.h * obstacle_growth(U).astype(dtype)
    return maskable, obstacle


def _micro_update(A0, growth_masked, growth_obstacle, inv_T, mask, noise):
    """One clipped update; ``mask``/``noise`` may be None (identity)."""
    g = growth_masked if mask is None else mask * growth_masked
    total = g + growth_obstacle
    if noise is not None:
        total = total + noise
    return np.clip(A0 + inv_T * total, 0.0, 1.0)


def _draw_noise(spec: PerturbationSpec, rng, shape, dtype):
    if spec.update_noise_rate <= 0.0 or spec.update_noise_std <= 0.0:
        return None
    noise = rng.normal(0.0, spec.update_noise_std, size=shape)
    if spec.update_noise_rate < 1.0:
        noise *= rng.random(shape) < spec.update_noise_rate
    return noise.astype(dtype)


def advance_learnable(A0, static_masked, static_obstacle, compiled,
                      dyn_rules, spec: PerturbationSpec, rng,
                      step_index: int) -> np.ndarray:
    """Advance the learnable channel one step, honoring perturbations."""
    shape = A0.shape[-2:]
    inv_T = compiled.inv_T
    active = spec.active_at(step_index)
    rate = spec.update_mask_rate if active else 1.0
    noise = _draw_noise(spec, rng, A0.shape, A0.dtype) if active else None

    if rate == 1.0:
        g = dynamic_growth(dyn_rules, A0, shape) + static_masked
        return _micro_update(A0, g, static_obstacle, inv_T, None, noise)
    if rate < 1.0:
        mask = (rng.random(A0.shape) < rate).astype(A0.dtype)
        g = dynamic_growth(dyn_rules, A0, shape) + static_masked
        return _micro_update(A0, g, static_obstacle, inv_T, mask, noise)
    # 1 < rate < 2: full pass, then a partial second pass sensing the new state
    g = dynamic_growth(dyn_rules, A0, shape) + static_masked
    A1 = _micro_update(A0, g, static_obstacle, inv_T, None, noise)
    mask2 = (rng.random(A0.shape) < (rate - 1.0)).astype(A0.dtype)
    noise2 = _draw_noise(spec, rng, A0.shape, A0.dtype)
    g2 = dynamic_growth(dyn_rules, A1, shape) + static_masked
    return _micro_update(A1, g2, static_obstacle, inv_T, mask2, noise2)


def step(state: GridState, rules: RuleSet,
         perturb: PerturbationSpec = IDENTITY,
         rng: np.random.Generator | None = None,
         compiled: CompiledRules | None = None,
         motion: ObstacleConfig | None = None) -> GridState:
    """Advance a grid state by one step.

    Only the learnable channel is written by the CA rules; the obstacle
    channel is shifted when ``motion`` specifies a nonzero speed.  Raises
    :class:`NumericalBlowupError` on non-finite state or parameters.
    """
    if not np.isfinite(state.channels).all():
        raise NumericalBlowupError("non-finite values in state", step=state.step)
    if compiled is None:
        compiled = compile_rules(rules, state.shape, state.channels.dtype)
    for c in compiled.compiled:
        if not np.isfinite(c.patch).all():
            raise NumericalBlowupError("non-finite kernel", step=state.step)
    if rng is None:
        rng = np.random.default_rng(0)

    dyn, stat, obs = split_rules(compiled)
    channels = state.channels
    masked_static, obstacle_static = static_growth(stat, obs, channels, state.shape)
    A1 = advance_learnable(channels[0], masked_static, obstacle_static,
                           compiled, dyn, perturb, rng, state.step)
    out = channels.copy()
    out[0] = A1
    if motion is not None and motion.moving:
        delta = motion.total_shift(state.step + 1) - motion.total_shift(state.step)
        if delta:
            out[1] = np.roll(out[1], -delta, axis=0)
    if not np.isfinite(A1).all():
        raise NumericalBlowupError("non-finite values after update", step=state.step)
    return GridState(out, step=state.step + 1)


# ---------------------------------------------------------------------------
# Rollouts


@dataclass
class Trajectory:
    """Per-step summaries of one rollout.

    ``masses[i]`` and ``coms[i]`` describe the state after step i+1; ``com0``
    is the center of mass of the initial state.  ``coms`` holds NaN at steps
    where the learnable channel had zero mass.
    """

    masses: np.ndarray
    coms: np.ndarray
    com0: tuple[float, float]
    final: np.ndarray
    obstacle_mask: np.ndarray | None = None
    states: list[np.ndarray] | None = None
    steps: int = 0


def _mass_and_com(A: np.ndarray):
    total = float(A.sum())
    if total <= 0.0:
        return total, (np.nan, np.nan)
    xs = np.arange(A.shape[0], dtype=np.float64)
    ys = np.arange(A.shape[1], dtype=np.float64)
    return total, (float((A.sum(axis=1) @ xs) / total),
                   float((A.sum(axis=0) @ ys) / total))


def place_init(init: InitPattern, shape, n_channels=2, dtype=np.float32,
               obstacle_mask: np.ndarray | None = None,
               spec: PerturbationSpec = IDENTITY,
               rng: np.random.Generator | None = None) -> GridState:
    """Zero grid with the init pattern stamped at its placement offset."""
    channels = np.zeros((n_channels, *shape), dtype=dtype)
    x0, y0 = init.placement
    values = init.values
    if spec.init_noise_rate > 0.0 and spec.init_noise_std > 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        values = apply_init_noise(values, spec, rng)
    h, w = values.shape
    channels[0, x0:x0 + h, y0:y0 + w] = values
    if obstacle_mask is not None:
        channels[1] = obstacle_mask.astype(dtype)
    return GridState(channels)


def prepare_obstacle_mask(obstacles, shape, init: InitPattern | None,
                          clear_init: bool = True,
                          clearance: float = 10.0) -> np.ndarray | None:
    """Rasterize an obstacle config (or pass a mask through), optionally
    clearing cells near the init square."""
    if obstacles is None:
        return None
    if isinstance(obstacles, np.ndarray):
        mask = obstacles.astype(bool)
    else:
        mask = obstacles.rasterize(shape)
    if clear_init and init is not None:
        pattern = np.zeros(shape, dtype=bool)
        x0, y0 = init.placement
        h, w = init.values.shape
        pattern[x0:x0 + h, y0:y0 + w] = init.values > 0.0
        mask = clear_near_pattern(mask, pattern, clearance)
    return mask


def rollout(init: InitPattern, rules: RuleSet, obstacles=None,
            steps: int = 50, perturb: PerturbationSpec = IDENTITY,
            rng: np.random.Generator | None = None, record: str = "stats",
            shape: tuple[int, int] = (256, 256), clear_init: bool = True,
            dtype=np.float32, compiled: CompiledRules | None = None,
            attractor_track=None) -> Trajectory:
    """Run ``steps`` update steps from a freshly placed init pattern.

    ``record`` selects the trajectory policy: "stats" (mass and center of
    mass per step), "full" (additionally every state of the learnable
    channel) or "final" (summaries of the last state only).

    ``attractor_track`` optionally scripts channel 2 as a moving disk:
    a ``(center, velocity, radius)`` triple in cell coordinates.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    mask = prepare_obstacle_mask(obstacles, shape, init, clear_init)
    motion = obstacles if isinstance(obstacles, ObstacleConfig) else None

    n_channels = max(rules.channel_count(), 3 if attractor_track else 2)
    state = place_init(init, shape, n_channels, dtype, mask, perturb, rng)
    att_center = att_vel = att_radius = None
    if attractor_track is not None:
        att_center, att_vel, att_radius = attractor_track
        state.channels[2] = _disk_mask(att_center, att_radius, shape).astype(dtype)

    if compiled is None:
        compiled = compile_rules(rules, shape, dtype)
    dyn, stat, obs = split_rules(compiled)
    masked_static, obstacle_static = static_growth(stat, obs, state.channels, shape)

    masses = np.zeros(steps)
    coms = np.full((steps, 2), np.nan)
    states = [] if record == "full" else None
    _, com0 = _mass_and_com(state.channels[0])

    A = state.channels[0]
    for t in range(steps):
        A = advance_learnable(A, masked_static, obstacle_static, compiled,
                              dyn, perturb, rng, t)
        m, com = _mass_and_com(A)
        if not np.isfinite(m):
            raise NumericalBlowupError("non-finite mass during rollout", step=t)
        masses[t] = m
        coms[t] = com
        if states is not None:
            states.append(A.copy())

        if motion is not None and motion.moving:
            delta = motion.total_shift(t + 1) - motion.total_shift(t)
            if delta:
                state.channels[1] = np.roll(state.channels[1], -delta, axis=0)
                obstacle_static = np.roll(obstacle_static, -delta, axis=0)
        if att_center is not None and (att_vel[0] or att_vel[1]):
            att_center = (att_center[0] + att_vel[0], att_center[1] + att_vel[1])
            state.channels[2] = _disk_mask(att_center, att_radius, shape).astype(dtype)
            m_static, _ = static_growth(stat, [], state.channels, shape)
            masked_static = m_static

    state.channels[0] = A
    state.step = steps
    return Trajectory(masses=masses, coms=coms, com0=com0, final=A.copy(),
                      obstacle_mask=state.channels[1].copy() if n_channels > 1 else None,
                      states=states, steps=steps)


def _disk_mask(center, radius, shape):
    xs = np.arange(shape[0], dtype=np.float64)[:, None]
    ys = np.arange(shape[1], dtype=np.float64)[None, :]
    return (xs - center[0]) ** 2 + (ys - center[1]) ** 2 < radius ** 2


# ---------------------------------------------------------------------------
# Batched rollouts (independent obstacle draws / seeds, shared rules)


@dataclass
class BatchTrajectory:
    masses: np.ndarray        # (B, steps)
    coms: np.ndarray          # (B, steps, 2), NaN where massless
    com0: tuple[float, float]
    finals: np.ndarray        # (B, H, W)
    blowup: np.ndarray        # (B,) bool
    steps: int = 0


def _batch_mass_com(A: np.ndarray):
    B, H, W = A.shape
    total = A.sum(axis=(1, 2), dtype=np.float64)
    xs = np.arange(H, dtype=np.float64)
    ys = np.arange(W, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        cx = (A.sum(axis=2, dtype=np.float64) @ xs) / total
        cy = (A.sum(axis=1, dtype=np.float64) @ ys) / total
    dead = total <= 0.0
    cx[dead] = np.nan
    cy[dead] = np.nan
    return total, np.stack([cx, cy], axis=-1)


def vacuum_stable(rules: RuleSet) -> bool:
    """True when an all-zero learnable channel cannot grow spontaneously."""
    total = 0.0
    for rule in rules.rules:
        if rule.kind == "gaussian" and rule.c_src == CHANNEL_LEARNABLE:
            total += rule.h * float(growth(0.0, rule.mu, rule.sigma))
    return total <= 0.0


def rollout_batch(init: InitPattern, rules: RuleSet, obstacle_masks,
                  steps: int = 50, perturb: PerturbationSpec = IDENTITY,
                  seeds=None, shape: tuple[int, int] = (256, 256),
                  clear_init: bool = True, dtype=np.float32,
                  compiled: CompiledRules | None = None,
                  motion: ObstacleConfig | None = None,
                  prune_dead: bool = True, check_every: int = 10,
                  record_trace: bool = True) -> BatchTrajectory:
    """Vectorized rollouts sharing one rule set.

    ``obstacle_masks`` is None, a single mask, or a (B, H, W) stack of
    pre-cleared masks; ``seeds`` provides one RNG stream per batch item for
    perturbation draws.  Items whose state turns non-finite are zeroed and
    flagged in ``blowup`` rather than raising, so evaluation sweeps always
    complete.
    """
    if compiled is None:
        compiled = compile_rules(rules, shape, dtype)
    dyn, stat, obs = split_rules(compiled)
    if stat:
        raise NotImplementedError("batched rollouts support channels 0 and 1 only")

    if obstacle_masks is None:
        B = len(seeds) if seeds is not None else 1
        masks = None
    elif isinstance(obstacle_masks, np.ndarray) and obstacle_masks.ndim == 2:
        B = len(seeds) if seeds is not None else 1
        masks = np.broadcast_to(obstacle_masks, (B, *shape))
    else:
        masks = np.asarray(obstacle_masks)
        B = masks.shape[0]

    rngs = None
    if seeds is not None:
        rngs = [np.random.default_rng(s) for s in seeds]
        if len(rngs) != B:
            raise ValueError("seeds length must match batch size")
    elif not perturb.is_identity():
        rngs = [np.random.default_rng(i) for i in range(B)]

    if clear_init and masks is not None:
        pattern = np.zeros(shape, dtype=bool)
        px, py = init.placement
        ph, pw = init.values.shape
        pattern[px:px + ph, py:py + pw] = init.values > 0.0
        masks = np.stack([clear_near_pattern(m, pattern) for m in masks])

    x0, y0 = init.placement
    h, w = init.values.shape
    A = np.zeros((B, *shape), dtype=dtype)
    patt = init.values
    if spec_has_init_noise(perturb):
        for i in range(B):
            r = rngs[i] if rngs else np.random.default_rng(i)
            A[i, x0:x0 + h, y0:y0 + w] = apply_init_noise(patt, perturb, r)
    else:
        A[:, x0:x0 + h, y0:y0 + w] = patt

    # Obstacle growth field per item, rolled alongside any motion.
    obstacle_static = np.zeros((B, *shape), dtype=dtype)
    if masks is not None and obs:
        FM = _rfft2(masks.astype(dtype))
        for c in obs:
            U = _irfft2(FM * c.spectrum, shape)
            obstacle_static += c.rule.h * obstacle_growth(U).astype(dtype)

    spectra = np.stack([c.spectrum for c in dyn])      # (n, HF, WF)
    hs = np.array([c.rule.h for c in dyn], dtype=dtype)
    mus = np.array([c.rule.mu for c in dyn], dtype=dtype)
    sig = np.array([c.rule.sigma for c in dyn], dtype=dtype)
    inv_T = np.array(compiled.inv_T, dtype=dtype)

    steps_n = steps
    masses = np.zeros((B, steps_n))
    coms = np.full((B, steps_n, 2), np.nan)
    blowup = np.zeros(B, dtype=bool)
    finals = np.zeros((B, *shape), dtype=dtype)
    alive = np.arange(B)
    can_prune = prune_dead and vacuum_stable(rules) and perturb.is_identity()

    n_dyn = len(dyn)
    h_v = hs.ravel()
    mu_v = mus.ravel()
    sig_v = sig.ravel()

    def dyn_growth(Ab):
        nb = Ab.shape[0]
        FA = _rfft2(Ab)[:, None]
        U = _irfft2((FA * spectra[None]).reshape(nb * n_dyn, *spectra.shape[-2:]),
                    shape).reshape(nb, n_dyn, *shape)
        out = np.zeros((nb, *shape), dtype=dtype)
        # In-place per-rule accumulation; the 4-D broadcast version allocates
        # several (B, n, H, W) temporaries and is several times slower.
        for k in range(n_dyn):
            d = U[:, k] - mu_v[k]
            np.square(d, out=d)
            d /= -2.0 * sig_v[k] * sig_v[k]
            np.exp(d, out=d)
            d *= 2.0 * h_v[k]
            out += d
            out -= h_v[k]
        return out

    for t in range(steps_n):
        active = perturb.active_at(t)
        rate = perturb.update_mask_rate if active else 1.0
        g = dyn_growth(A)
        noise = _batch_noise(perturb, rngs, alive, A.shape, dtype) if active else None
        if rate == 1.0:
            total = g + obstacle_static
            if noise is not None:
                total += noise
            A = np.clip(A + inv_T * total, 0.0, 1.0)
        elif rate < 1.0:
            m = _batch_mask(rate, rngs, alive, A.shape, dtype)
            total = m * g + obstacle_static
            if noise is not None:
                total += noise
            A = np.clip(A + inv_T * total, 0.0, 1.0)
        else:
            total = g + obstacle_static
            if noise is not None:
                total += noise
            A = np.clip(A + inv_T * total, 0.0, 1.0)
            g2 = dyn_growth(A)
            m2 = _batch_mask(rate - 1.0, rngs, alive, A.shape, dtype)
            noise2 = _batch_noise(perturb, rngs, alive, A.shape, dtype)
            total2 = m2 * g2 + obstacle_static
            if noise2 is not None:
                total2 += noise2
            A = np.clip(A + inv_T * total2, 0.0, 1.0)

        last = t == steps_n - 1
        checkpoint = (t + 1) % check_every == 0
        if record_trace or last or checkpoint:
            m_tot, com = _batch_mass_com(A)
            bad = ~np.isfinite(m_tot)
            if bad.any():
                A[bad] = 0.0
                m_tot[bad] = 0.0
                com[bad] = np.nan
                blowup[alive[bad]] = True
            if record_trace or last:
                masses[alive, t] = m_tot
                coms[alive, t] = com

        if motion is not None and motion.moving:
            delta = motion.total_shift(t + 1) - motion.total_shift(t)
            if delta:
                obstacle_static = np.roll(obstacle_static, -delta, axis=1)

        if can_prune and checkpoint and not last:
            dead = m_tot <= 0.0
            if dead.any():
                finals[alive[dead]] = 0.0
                keep = ~dead
                A = A[keep]
                obstacle_static = obstacle_static[keep]
                if rngs:
                    rngs = [r for r, k in zip(rngs, keep) if k]
                alive = alive[keep]
                if len(alive) == 0:
                    break

    finals[alive] = A
    _, com0 = _mass_and_com_pattern(init, shape)
    return BatchTrajectory(masses=masses, coms=coms, com0=com0, finals=finals,
                           blowup=blowup, steps=steps_n)


def spec_has_init_noise(spec: PerturbationSpec) -> bool:
    return spec.init_noise_rate > 0.0 and spec.init_noise_std > 0.0


def _batch_mask(rate, rngs, alive, shape, dtype):
    out = np.empty(shape, dtype=dtype)
    for i, r in enumerate(rngs):
        out[i] = (r.random(shape[1:]) < rate).astype(dtype)
    return out


def _batch_noise(spec, rngs, alive, shape, dtype):
    if spec.update_noise_rate <= 0.0 or spec.update_noise_std <= 0.0:
        return None
    out = np.empty(shape, dtype=dtype)
    for i, r in enumerate(rngs):
        noise = r.normal(0.0, spec.update_noise_std, size=shape[1:])
        if spec.update_noise_rate < 1.0:
            noise *= r.random(shape[1:]) < spec.update_noise_rate
        out[i] = noise
    return out


def _mass_and_com_pattern(init: InitPattern, shape):
    A = np.zeros(shape, dtype=np.float64)
    x0, y0 = init.placement
    h, w = init.values.shape
    A[x0:x0 + h, y0:y0 + w] = init.values
    return _mass_and_com(A)
