"""Adam updates over the free rule scalars and init cells, with projection.

The projection after every step (clamping scalars into their legal ranges
and init cells into [0, 1]) is what keeps optimized parameter sets valid
CA instances; raw unprojected descent wanders out of range quickly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import GradientBundle
from .params import InitPattern, RuleSet, free_bounds, pack_free, unpack_free


@dataclass
class Adam:
    lr_rules: float = 1e-3
    lr_init: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)

    def step(self, rules: RuleSet, init: InitPattern, grad: GradientBundle
             ) -> tuple[RuleSet, InitPattern]:
        """One projected Adam update; returns new (rules, init) copies."""
        theta_r = pack_free(rules)
        theta_i = init.values.ravel().copy()
        g = np.concatenate([grad.d_rules.ravel(), grad.d_init.ravel()])
        theta = np.concatenate([theta_r, theta_i])
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        update = m_hat / (np.sqrt(v_hat) + self.eps)

        n_r = len(theta_r)
        theta[:n_r] -= self.lr_rules * update[:n_r]
        theta[n_r:] -= self.lr_init * update[n_r:]

        lo, hi = free_bounds(rules)
        new_rules = unpack_free(rules, np.clip(theta[:n_r], lo, hi))
        new_rules.R, new_rules.T = rules.R, rules.T
        new_init = InitPattern(
            np.clip(theta[n_r:], 0.0, 1.0).reshape(init.values.shape),
            init.placement,
        )
        return new_rules, new_init
