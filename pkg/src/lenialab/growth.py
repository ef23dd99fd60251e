"""Pointwise growth functions mapping sensed values to mass updates."""

from __future__ import annotations

import numpy as np

OBSTACLE_EPS = 1e-8
OBSTACLE_STRENGTH = 10.0


def growth(u, mu, sigma):
    """Shifted Gaussian growth, 2*exp(-(u-mu)^2 / (2 sigma^2)) - 1.

    Range (-1, 1], with growth(mu) = 1 exactly.
    """
    d = np.asarray(u, dtype=np.result_type(u, np.float32)) - mu
    return 2.0 * np.exp(-(d * d) / (2.0 * sigma * sigma)) - 1.0


def obstacle_growth(u):
    """Severe negative growth where obstacle sensing is present.

    -clip(u - 1e-8, 0, 1) * 10: zero where nothing is sensed, -10 at full
    obstacle occupancy, so obstacle cells swamp any positive growth.
    """
    return -np.clip(np.asarray(u) - OBSTACLE_EPS, 0.0, 1.0) * OBSTACLE_STRENGTH


def growth_and_dgrowth(u, mu, sigma):
    """Growth plus its derivative with respect to the sensed value."""
    d = u - mu
    g1 = 2.0 * np.exp(-(d * d) / (2.0 * sigma * sigma))  # = G + 1
    return g1 - 1.0, -g1 * d / (sigma * sigma)
