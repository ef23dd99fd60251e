"""Stochastic perturbations applied during rollouts.

Defaults are the identity: full update mask, no noise, scale 1.  Update
perturbations (mask and noise) act only on steps inside the active window;
init noise acts once on the initialization square; the scale factor is
consumed by :func:`lenialab.geometry.rescale` before the rollout starts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PerturbationSpec:
    update_mask_rate: float = 1.0     # p<1: Bernoulli skip; 1<p<2: second pass
    update_noise_rate: float = 0.0    # per-cell probability of additive noise
    update_noise_std: float = 0.0
    init_noise_rate: float = 0.0
    init_noise_std: float = 0.0
    scale: float = 1.0
    window: tuple[int, int | None] = (0, None)  # [start, end) in step indices

    def __post_init__(self):
        if self.update_mask_rate < 0:
            raise ValueError("update_mask_rate must be >= 0")
        if not 0.0 <= self.update_noise_rate <= 1.0:
            raise ValueError("update_noise_rate must be in [0, 1]")
        if not 0.0 <= self.init_noise_rate <= 1.0:
            raise ValueError("init_noise_rate must be in [0, 1]")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def is_identity(self) -> bool:
        return (
            self.update_mask_rate == 1.0
            and (self.update_noise_rate == 0.0 or self.update_noise_std == 0.0)
            and (self.init_noise_rate == 0.0 or self.init_noise_std == 0.0)
            and self.scale == 1.0
        )

    def active_at(self, step: int) -> bool:
        start, end = self.window
        return step >= start and (end is None or step < end)

    def update_active(self, step: int) -> bool:
        if not self.active_at(step):
            return False
        return (self.update_mask_rate != 1.0
                or (self.update_noise_rate > 0.0 and self.update_noise_std > 0.0))


IDENTITY = PerturbationSpec()


def apply_init_noise(values: np.ndarray, spec: PerturbationSpec,
                     rng: np.random.Generator) -> np.ndarray:
    """Centered Gaussian noise on a fraction of init cells, clipped to [0,1]."""
    if spec.init_noise_rate <= 0.0 or spec.init_noise_std <= 0.0:
        return values
    noise = rng.normal(0.0, spec.init_noise_std, size=values.shape)
    if spec.init_noise_rate < 1.0:
        noise *= rng.random(values.shape) < spec.init_noise_rate
    return np.clip(values + noise, 0.0, 1.0)
