"""A first tour of the CA substrate.

Builds a rule set, inspects its kernels and growth functions, runs a short
rollout with obstacles, and writes PPM frames plus a trajectory overlay to
demos/out/substrate/.
"""

import pathlib

import matplotlib.pyplot as plt
import numpy as np

import lenialab as L
from lenialab.render import render_frames, trajectory_overlay, write_ppm

out = pathlib.Path(__file__).parent / "out" / "substrate"
out.mkdir(parents=True, exist_ok=True)

rng = np.random.default_rng(7)
rules = L.sample_ruleset(rng, n_rules=10)
init = L.sample_init(rng)
print(f"R={rules.R} T={rules.T}, {len(rules.rules)} rules "
      f"({rules.free_parameter_count()} free scalars)")

# Kernels are radial sums of three Gaussian bumps, normalized to unit sum.
fig, axes = plt.subplots(2, 5, figsize=(14, 6))
for ax, rule in zip(axes.ravel(), rules.learnable_rules()):
    ax.imshow(L.build_kernel(rule, rules.R), cmap="magma")
    ax.set_title(f"r={rule.r:.2f} h={rule.h:.2f}", fontsize=8)
    ax.axis("off")
fig.savefig(out / "kernels.png", dpi=110, bbox_inches="tight")

# The growth function maps sensed values to mass change in (-1, 1].
u = np.linspace(0, 1, 400)
fig, ax = plt.subplots(figsize=(6, 3))
for rule in rules.learnable_rules()[:4]:
    ax.plot(u, L.growth(u, rule.mu, rule.sigma),
            label=f"mu={rule.mu:.2f} sigma={rule.sigma:.3f}")
ax.plot(u, L.obstacle_growth(u), "k--", label="obstacle rule")
ax.legend(fontsize=7)
ax.set_xlabel("sensed value")
ax.set_ylabel("growth")
fig.savefig(out / "growth.png", dpi=110, bbox_inches="tight")

# A rollout: place the init square, rasterize obstacles in the right half,
# iterate the clipped update.
obstacles = L.training_obstacles(rng, (256, 256), n=8, radius=10)
traj = L.rollout(init, rules, obstacles, steps=50, record="full",
                 rng=np.random.default_rng(0))
print(f"mass: start {traj.masses[0]:.0f} -> final {traj.masses[-1]:.0f}")

states = [np.stack([s, traj.obstacle_mask]) for s in traj.states[::5]]
render_frames(states, out, prefix="step")
write_ppm(out / "overlay.ppm",
          trajectory_overlay(traj.states[::5], traj.obstacle_mask))
print(f"frames written to {out}")
