"""Grid geometry: centers of mass, goal targets, disk scores, rescaling.

Positions use cell coordinates (x = axis 0, y = axis 1).  Normalized
coordinates map cell p on an axis of size S to (p - S/2) / S, so the grid
spans [-0.5, 0.5) with the origin at the grid center and the obstacle half
of the training grid at x > 0.
"""

from __future__ import annotations

import numpy as np

from .params import InitPattern, RuleSet

TARGET_OUTER_RADIUS = 10.0
TARGET_INNER_RADIUS = 5.0
TARGET_PEAK = 0.9
TARGET_RING_LEVEL = 0.15

# Reference grid side for the shape score: dividing the summed squared disk
# mismatch by 256 puts the explosion bound (25, i.e. SSE 6400) and the
# warm-up selection threshold on a grid-size-independent scale.
SCORE_NORM = 256.0


class EmptyPatternError(ValueError):
    """Center of mass requested for a zero-mass channel."""


class ScaleTooSmallError(ValueError):
    """Rescale factor would shrink the kernel radius below 2 cells."""


def center_of_mass(channel: np.ndarray) -> tuple[float, float]:
    """Mass-weighted mean cell coordinate, without torus unwrapping."""
    total = float(channel.sum())
    if total <= 0.0:
        raise EmptyPatternError("zero total mass")
    xs = np.arange(channel.shape[0], dtype=np.float64)
    ys = np.arange(channel.shape[1], dtype=np.float64)
    cx = float((channel.sum(axis=1) @ xs) / total)
    cy = float((channel.sum(axis=0) @ ys) / total)
    return cx, cy


def normalize_position(pos, shape: tuple[int, int]) -> np.ndarray:
    p = np.asarray(pos, dtype=np.float64)
    return (p - np.array(shape) / 2.0) / np.array(shape)


def denormalize_position(goal, shape: tuple[int, int]) -> np.ndarray:
    g = np.asarray(goal, dtype=np.float64)
    return g * np.array(shape) + np.array(shape) / 2.0


def target_disk(center: tuple[float, float], shape: tuple[int, int],
                dtype=np.float64) -> np.ndarray:
    """Two nested disks at ``center`` (cell coords):

        0.9 * (0.15 * [d < 10] + 0.85 * [d < 5])

    i.e. 0.9 inside radius 5, 0.135 in the 5..10 ring, 0 outside.
    """
    H, W = shape
    xs = np.arange(H, dtype=np.float64)[:, None] - center[0]
    ys = np.arange(W, dtype=np.float64)[None, :] - center[1]
    d2 = xs * xs + ys * ys
    out = TARGET_RING_LEVEL * (d2 < TARGET_OUTER_RADIUS ** 2)
    out = out + (1.0 - TARGET_RING_LEVEL) * (d2 < TARGET_INNER_RADIUS ** 2)
    return (TARGET_PEAK * out).astype(dtype)


def make_target(goal, shape: tuple[int, int], dtype=np.float64) -> np.ndarray:
    """Target array for a normalized goal position."""
    return target_disk(tuple(denormalize_position(goal, shape)), shape, dtype)


def disk_sse(channel: np.ndarray, center: tuple[float, float] | None = None
             ) -> float:
    """Summed squared mismatch against the target disk re-centered at
    ``center`` (the channel's own center of mass when omitted).  For a
    zero-mass channel the disk sits at the grid center, which makes the
    dead-state value position independent."""
    if center is None:
        if channel.sum() <= 0.0:
            center = (channel.shape[0] / 2.0, channel.shape[1] / 2.0)
        else:
            center = center_of_mass(channel)
    disk = target_disk(center, channel.shape)
    diff = channel.astype(np.float64) - disk
    return float((diff * diff).sum())


def collapse_score(channel: np.ndarray,
                   center: tuple[float, float] | None = None) -> float:
    """Collapse proxy c: cell-mean squared mismatch against the self-centered
    disk.  Small for compact patterns and for dead grids, large only for
    exploding mass, so the c <= 0.11 reuse filter screens explosions."""
    return disk_sse(channel, center) / channel.size


def disk_score(channel: np.ndarray, center: tuple[float, float] | None = None
               ) -> float:
    """Shape score: disk mismatch normalized by the reference side
    (SSE / SCORE_NORM), grid-size independent.  A dead grid scores ~0.236;
    the mutation screen's explosion bound 25 corresponds to SSE 6400."""
    return disk_sse(channel, center) / SCORE_NORM


def goal_score(channel: np.ndarray, goal, shape=None) -> float:
    """Shape score against the disk at a goal position (SSE / SCORE_NORM)."""
    if shape is None:
        shape = channel.shape
    center = tuple(denormalize_position(goal, shape))
    return disk_score(channel, center=center)


def resize_bilinear(values: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resize with half-pixel centers (constant input stays constant)."""
    H, W = values.shape
    oh, ow = out_shape
    xs = (np.arange(oh) + 0.5) * (H / oh) - 0.5
    ys = (np.arange(ow) + 0.5) * (W / ow) - 0.5
    x0 = np.clip(np.floor(xs).astype(int), 0, H - 1)
    y0 = np.clip(np.floor(ys).astype(int), 0, W - 1)
    x1 = np.minimum(x0 + 1, H - 1)
    y1 = np.minimum(y0 + 1, W - 1)
    fx = np.clip(xs - x0, 0.0, 1.0)[:, None]
    fy = np.clip(ys - y0, 0.0, 1.0)[None, :]
    v00 = values[np.ix_(x0, y0)]
    v01 = values[np.ix_(x0, y1)]
    v10 = values[np.ix_(x1, y0)]
    v11 = values[np.ix_(x1, y1)]
    top = v00 * (1 - fy) + v01 * fy
    bot = v10 * (1 - fy) + v11 * fy
    return top * (1 - fx) + bot * fx


def rescale(rules: RuleSet, init: InitPattern, factor: float
            ) -> tuple[RuleSet, InitPattern]:
    """Scale the physics: R <- round(factor * R), init resized bilinearly.

    The resized pattern stays anchored on the original square's center.
    Raises :class:`ScaleTooSmallError` when the scaled radius drops below 2.
    """
    if factor <= 0:
        raise ValueError("scale factor must be positive")
    new_R = int(round(factor * rules.R))
    if new_R < 2:
        raise ScaleTooSmallError(f"scaled radius {new_R} < 2")
    out_rules = rules.copy()
    out_rules.R = new_R
    if factor == 1.0:
        return out_rules, init.copy()
    new_shape = (max(1, int(round(init.values.shape[0] * factor))),
                 max(1, int(round(init.values.shape[1] * factor))))
    resized = np.clip(resize_bilinear(init.values, new_shape), 0.0, 1.0)
    cx, cy = init.centroid()
    placement = (int(round(cx - new_shape[0] / 2.0)),
                 int(round(cy - new_shape[1] / 2.0)))
    return out_rules, InitPattern(resized, placement)
