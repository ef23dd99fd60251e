"""Reverse-mode differentiation of the goal loss through an unrolled rollout.

This is a special-purpose tape for the exact step composition used here
(circular convolution, pointwise growth, weighted sum, clipped add) with a
mean-squared-error head against a goal-centered target disk.  It produces
gradients with respect to every free rule scalar (r, b, w, a, mu, sigma, h
per learnable rule; R and T stay fixed) and every init-pattern cell.

Design notes:
  * clip uses the exact subgradient: 1 strictly inside (0, 1), 0 elsewhere;
  * the kernel normalization (unit sum) is differentiated with the quotient
    rule -- dropping that term is a classic silent bug, pinned by a test;
  * the kernel support mask (d <= r*R) is held fixed when differentiating
    the relative radius r, so r gradients ignore support-boundary jumps;
  * the tape stores every perturbation draw, which makes recomputation
    under checkpointing bit-exact; a checkpoint state that fails to
    reproduce raises :class:`NondeterministicTapeError`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .engine import NumericalBlowupError, prepare_obstacle_mask
from .geometry import make_target
from .growth import obstacle_growth
from .kernels import compile_rules, distance_patch
from .obstacles import ObstacleConfig
from .params import (FREE_FIELD_SLICES, SCALARS_PER_RULE, InitPattern,
                     RuleSet)
from .perturb import IDENTITY, PerturbationSpec


class NondeterministicTapeError(RuntimeError):
    """Checkpoint recomputation diverged from the recorded forward pass."""


@dataclass
class LossSpec:
    """Goal-conditioned loss: cell-mean squared error at the final step."""

    goal: tuple[float, float]
    steps: int = 50

    def target_for(self, shape, dtype=np.float64) -> np.ndarray:
        return make_target(self.goal, shape, dtype)


@dataclass
class GradientBundle:
    """Partials aligned with the free-scalar packing plus the init cells."""

    d_rules: np.ndarray  # (n_learnable, SCALARS_PER_RULE)
    d_init: np.ndarray

    def pack(self) -> np.ndarray:
        return np.concatenate([self.d_rules.ravel(), self.d_init.ravel()])

    def field(self, rule_idx: int, name: str) -> np.ndarray:
        return self.d_rules[rule_idx, FREE_FIELD_SLICES[name]]


class _Setup:
    """Static pieces shared by the forward tape and the backward sweep."""

    def __init__(self, rules: RuleSet, init: InitPattern, obstacles,
                 shape, dtype, clear_init):
        if isinstance(obstacles, ObstacleConfig) and obstacles.moving:
            raise NotImplementedError("gradients assume static obstacles")
        self.rules = rules
        self.shape = tuple(shape)
        self.dtype = np.dtype(dtype)
        self.compiled = compile_rules(rules, shape, dtype)
        self.learnable = [c for c in self.compiled.compiled
                          if c.rule.is_learnable()]
        if any(c.rule.kind == "gaussian" and not c.rule.is_learnable()
               for c in self.compiled.compiled):
            raise NotImplementedError("gradients support rules wired 0->0 "
                                      "plus the obstacle rule only")
        self.obstacle_rules = [c for c in self.compiled.compiled
                               if c.rule.kind == "obstacle"]
        self.inv_T = self.dtype.type(1.0 / rules.T)
        self.spectra = np.stack([c.spectrum for c in self.learnable])
        n = len(self.learnable)
        self.h = np.array([c.rule.h for c in self.learnable],
                          dtype=dtype).reshape(n, 1, 1)
        self.mu = np.array([c.rule.mu for c in self.learnable],
                           dtype=dtype).reshape(n, 1, 1)
        self.sigma = np.array([c.rule.sigma for c in self.learnable],
                              dtype=dtype).reshape(n, 1, 1)

        mask = prepare_obstacle_mask(obstacles, self.shape, init, clear_init)
        self.obstacle_field = np.zeros(self.shape, dtype=dtype)
        if mask is not None and self.obstacle_rules:
            FM = sfft.rfft2(mask.astype(dtype))
            for c in self.obstacle_rules:
                U = sfft.irfft2(FM * c.spectrum, s=self.shape)
                self.obstacle_field += c.rule.h * obstacle_growth(U).astype(dtype)

        self.init = init
        A0 = np.zeros(self.shape, dtype=dtype)
        x0, y0 = init.placement
        h, w = init.values.shape
        A0[x0:x0 + h, y0:y0 + w] = init.values
        self.A0 = A0
        self.window = (slice(x0, x0 + h), slice(y0, y0 + w))

    def sense(self, A):
        """Per-rule sensed fields U_k, stacked (n, H, W)."""
        FA = sfft.rfft2(A)
        return sfft.irfft2(FA[None] * self.spectra, s=self.shape, axes=(-2, -1))

    def micro(self, A, mask, noise, U=None):
        """One clipped update; returns (A_next, U, z)."""
        if U is None:
            U = self.sense(A)
        G1 = 2.0 * np.exp(-((U - self.mu) ** 2) / (2.0 * self.sigma ** 2))
        g = (self.h * (G1 - 1.0)).sum(axis=0, dtype=self.dtype)
        tot = g if mask is None else mask * g
        tot = tot + self.obstacle_field
        if noise is not None:
            tot = tot + noise
        z = A + self.inv_T * tot
        return np.clip(z, 0.0, 1.0), U, z


def _plan_micros(spec: PerturbationSpec, steps: int, rng, shape, dtype):
    """Draw every perturbation used by the rollout, in engine order."""
    micros = []
    for t in range(steps):
        active = spec.active_at(t)
        rate = spec.update_mask_rate if active else 1.0
        noise = None
        if active and spec.update_noise_rate > 0.0 and spec.update_noise_std > 0.0:
            noise = rng.normal(0.0, spec.update_noise_std, size=shape)
            if spec.update_noise_rate < 1.0:
                noise *= rng.random(shape) < spec.update_noise_rate
            noise = noise.astype(dtype)
        if rate == 1.0:
            micros.append((None, noise))
        elif rate < 1.0:
            mask = (rng.random(shape) < rate).astype(dtype)
            micros.append((mask, noise))
        else:
            micros.append((None, noise))
            mask2 = (rng.random(shape) < (rate - 1.0)).astype(dtype)
            noise2 = None
            if spec.update_noise_rate > 0.0 and spec.update_noise_std > 0.0:
                noise2 = rng.normal(0.0, spec.update_noise_std, size=shape)
                if spec.update_noise_rate < 1.0:
                    noise2 *= rng.random(shape) < spec.update_noise_rate
                noise2 = noise2.astype(dtype)
            micros.append((mask2, noise2))
    return micros


def forward_loss(rules: RuleSet, init: InitPattern, obstacles,
                 loss_spec: LossSpec, rng=None, shape=(256, 256),
                 dtype=np.float32, perturb: PerturbationSpec = IDENTITY,
                 clear_init: bool = True) -> float:
    """Cell-mean squared error between the final learnable state and the
    goal target disk."""
    loss, _ = _run(rules, init, obstacles, loss_spec, rng, shape, dtype,
                   perturb, clear_init, want_grad=False)
    return loss


def clip_signature(rules: RuleSet, init: InitPattern, obstacles,
                   loss_spec: LossSpec, rng=None, shape=(256, 256),
                   dtype=np.float64, clear_init: bool = True) -> bytes:
    """Hash of the per-cell clip states over the whole rollout.

    Two parameter points with equal signatures saw identical clip activity,
    so a central finite difference between them does not cross any clip
    kink and is comparable to the exact subgradient.
    """
    import hashlib

    if rng is None:
        rng = np.random.default_rng(0)
    setup = _Setup(rules, init, obstacles, shape, dtype, clear_init)
    digest = hashlib.blake2b(digest_size=16)
    A = setup.A0
    for _ in range(loss_spec.steps):
        A, _, z = setup.micro(A, None, None)
        digest.update(np.packbits(z <= 0.0).tobytes())
        digest.update(np.packbits(z >= 1.0).tobytes())
    return digest.digest()


def backward(rules: RuleSet, init: InitPattern, obstacles,
             loss_spec: LossSpec, rng=None, shape=(256, 256),
             dtype=np.float32, perturb: PerturbationSpec = IDENTITY,
             clear_init: bool = True, checkpoint_every: int | None = None
             ) -> tuple[float, GradientBundle]:
    """Loss plus gradients for all free rule scalars and init cells."""
    return _run(rules, init, obstacles, loss_spec, rng, shape, dtype,
                perturb, clear_init, want_grad=True,
                checkpoint_every=checkpoint_every)


def _run(rules, init, obstacles, loss_spec, rng, shape, dtype, perturb,
         clear_init, want_grad, checkpoint_every=None):
    if perturb.init_noise_rate > 0.0 and perturb.init_noise_std > 0.0:
        raise NotImplementedError("init noise is not differentiated")
    if rng is None:
        rng = np.random.default_rng(0)
    setup = _Setup(rules, init, obstacles, shape, dtype, clear_init)
    micros = _plan_micros(perturb, loss_spec.steps, rng, setup.shape, setup.dtype)
    n_micros = len(micros)
    store_all = want_grad and checkpoint_every is None

    A_stored: list[np.ndarray | None] = [None] * n_micros
    U_stored: list[np.ndarray | None] = [None] * n_micros
    A = setup.A0
    z_last = None
    for i, (mask, noise) in enumerate(micros):
        keep = store_all or (want_grad and checkpoint_every
                             and i % checkpoint_every == 0)
        if keep or i == 0:
            A_stored[i] = A
        A, U, z_last = setup.micro(A, mask, noise)
        if store_all:
            U_stored[i] = U
        if not np.isfinite(A).all():
            raise NumericalBlowupError("non-finite state in tape forward", step=i)

    target = loss_spec.target_for(setup.shape, setup.dtype)
    diff = A - target
    n_cells = A.size
    loss = float((diff.astype(np.float64) ** 2).sum() / n_cells)
    if not want_grad:
        return loss, None

    if not np.any((z_last > 0.0) & (z_last < 1.0)):
        # Final update fully clipped (e.g. the pattern died and stayed
        # dead): the loss gradient cannot reach any earlier state, so every
        # partial is exactly zero and the sweep can be skipped.
        n_rules = len(setup.learnable)
        bundle = GradientBundle(
            d_rules=np.zeros((n_rules, SCALARS_PER_RULE)),
            d_init=np.zeros_like(init.values, dtype=np.float64),
        )
        return loss, bundle

    gA = (2.0 / n_cells) * diff.astype(setup.dtype)
    bundle = _sweep(setup, micros, A_stored, U_stored, gA, checkpoint_every)
    return loss, bundle


def _segment_recompute(setup, micros, A_stored, lo, hi):
    """Recompute pre-micro states (and sensed fields) for micros [lo, hi)."""
    states = [None] * (hi - lo)
    sensed = [None] * (hi - lo)
    A = A_stored[lo]
    if A is None:
        raise NondeterministicTapeError(f"missing checkpoint at micro {lo}")
    for i in range(lo, hi):
        states[i - lo] = A
        A, U, _ = setup.micro(A, *micros[i])
        sensed[i - lo] = U
    # Verify against the next stored checkpoint when one exists.
    if hi < len(A_stored) and A_stored[hi] is not None:
        if not np.array_equal(A, A_stored[hi]):
            raise NondeterministicTapeError(
                f"recomputed state at micro {hi} differs from the tape")
    return states, sensed


def _sweep(setup, micros, A_stored, U_stored, gA, checkpoint_every):
    n = len(setup.learnable)
    n_micros = len(micros)
    dKhat = np.zeros_like(setup.spectra)
    dh = np.zeros(n)
    dmu = np.zeros(n)
    dsigma = np.zeros(n)

    if checkpoint_every:
        bounds = list(range(0, n_micros, checkpoint_every))
    else:
        bounds = [0]
    segments = [(b, min(b + (checkpoint_every or n_micros), n_micros))
                for b in bounds]

    for lo, hi in reversed(segments):
        if checkpoint_every:
            states, sensed = _segment_recompute(setup, micros, A_stored, lo, hi)
        else:
            states = A_stored[lo:hi]
            sensed = U_stored[lo:hi]
        for i in range(hi - 1, lo - 1, -1):
            A_in = states[i - lo]
            mask, noise = micros[i]
            _, U, z = setup.micro(A_in, mask, noise, U=sensed[i - lo])
            G1 = 2.0 * np.exp(-((U - setup.mu) ** 2) / (2.0 * setup.sigma ** 2))

            clip_mask = (z > 0.0) & (z < 1.0)
            gz = gA * clip_mask
            base = gz * setup.inv_T
            bm = base if mask is None else base * mask

            G = G1 - 1.0
            dh += (bm[None] * G).sum(axis=(1, 2), dtype=np.float64)
            dU = bm[None] * setup.h * G1 * (-(U - setup.mu) / setup.sigma ** 2)
            dmu += -dU.sum(axis=(1, 2), dtype=np.float64)
            dsigma += (bm[None] * setup.h * G1
                       * (U - setup.mu) ** 2 / setup.sigma ** 3
                       ).sum(axis=(1, 2), dtype=np.float64)

            FdU = sfft.rfft2(dU, axes=(-2, -1))
            gA = gz + sfft.irfft2((FdU * np.conj(setup.spectra)).sum(axis=0),
                                  s=setup.shape)
            FA_in = sfft.rfft2(A_in)
            dKhat += FdU * np.conj(FA_in)[None]

    d_init = gA[setup.window].astype(np.float64).copy()
    d_rules = _kernel_param_grads(setup, dKhat)
    d_rules[:, FREE_FIELD_SLICES["mu"]] = dmu[:, None]
    d_rules[:, FREE_FIELD_SLICES["sigma"]] = dsigma[:, None]
    d_rules[:, FREE_FIELD_SLICES["h"]] = dh[:, None]
    return GradientBundle(d_rules=d_rules, d_init=d_init)


def _kernel_param_grads(setup, dKhat):
    """Chain spectral kernel gradients through embedding, normalization and
    the bump-profile parameters (r, b, w, a)."""
    n = len(setup.learnable)
    out = np.zeros((n, SCALARS_PER_RULE))
    for k, c in enumerate(setup.learnable):
        rule = c.rule
        R = setup.rules.rule_radius(rule)
        side = 2 * R + 1
        dKfull = sfft.irfft2(dKhat[k], s=setup.shape)
        dK_patch = np.roll(dKfull, (R, R), axis=(0, 1))[:side, :side]
        K = c.patch
        S = c.raw_sum
        dP = (dK_patch - (dK_patch * K).sum()) / S

        dist = distance_patch(R)
        rr_clip = max(rule.r * R, 1e-9)
        x = dist / rr_clip
        support = dist <= rule.r * R
        dPs = dP * support
        dr = 0.0
        for i in range(len(rule.b)):
            E = np.exp(-((x - rule.a[i]) ** 2) / (2.0 * rule.w[i] ** 2))
            dE = dPs * E
            out[k, FREE_FIELD_SLICES["b"].start + i] = dE.sum()
            out[k, FREE_FIELD_SLICES["a"].start + i] = (
                rule.b[i] * (dE * (x - rule.a[i])).sum() / rule.w[i] ** 2)
            out[k, FREE_FIELD_SLICES["w"].start + i] = (
                rule.b[i] * (dE * (x - rule.a[i]) ** 2).sum() / rule.w[i] ** 3)
            if rule.r > 0:
                dr += (rule.b[i] * (dE * (x - rule.a[i]) * x).sum()
                       / (rule.r * rule.w[i] ** 2))
        out[k, FREE_FIELD_SLICES["r"].start] = dr
    return out
