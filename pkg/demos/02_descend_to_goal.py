"""Differentiate through the rollout and pull a pattern toward a target.

Starting from weakened random rules (the history-bootstrap distribution),
runs projected Adam on the goal loss and plots the loss curve.  Most random
starts die — that is exactly why the discovery loop restarts its bootstrap
until the first warm-up targets optimize well.
"""

import pathlib

import matplotlib.pyplot as plt
import numpy as np

import lenialab as L
from lenialab.autodiff import LossSpec, backward
from lenialab.geometry import normalize_position
from lenialab.optim import Adam

out = pathlib.Path(__file__).parent / "out"
out.mkdir(parents=True, exist_ok=True)

shape = (128, 128)
rng = np.random.default_rng(3)
rules = L.sample_ruleset(rng, n_rules=10, h_max=1 / 3, r_range=(8, 20))
init = L.sample_init(rng, shape=(20, 20), placement=(18, 52))

# Aim just ahead of the init square.
goal = normalize_position((34, 64), shape)
spec = LossSpec(goal=tuple(goal), steps=50)
opt = Adam(lr_rules=1e-3, lr_init=1e-2)

losses = []
for step in range(80):
    loss, grad = backward(rules, init, None, spec, shape=shape)
    losses.append(loss)
    rules, init = opt.step(rules, init, grad)
    if step % 10 == 0:
        print(f"step {step:3d}  loss {loss:.5f}")

traj = L.rollout(init, rules, None, steps=50, shape=shape,
                 rng=np.random.default_rng(0))
final_mass = traj.final.sum()
print(f"final mass {final_mass:.1f}",
      "(died: the classic local optimum)" if final_mass == 0 else "")

fig, ax = plt.subplots(figsize=(5, 3))
ax.plot(losses)
ax.set_xlabel("gradient step")
ax.set_ylabel("goal loss (cell mean)")
ax.axhline(spec.target_for(shape).astype(float).__pow__(2).mean(),
           color="k", ls="--", lw=0.8, label="dead-grid loss")
ax.legend()
fig.savefig(out / "descent_loss.png", dpi=110, bbox_inches="tight")
print(f"wrote {out / 'descent_loss.png'}")
