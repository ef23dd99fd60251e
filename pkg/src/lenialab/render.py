"""Frame rendering: fixed colormap, PPM frames, trajectory overlays.

The colormap is part of the output contract (golden-image tested):
black background, learnable channel in amber, obstacles in blue,
attractor in cyan, composited additively and clipped.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

# (r, g, b) weight per channel index.
CHANNEL_COLORS = (
    (255, 202, 56),   # learnable: amber
    (64, 110, 255),   # obstacles: blue
    (64, 224, 224),   # attractor: cyan
)


def colormap(channels: np.ndarray) -> np.ndarray:
    """C x H x W values in [0, 1] -> H x W x 3 uint8."""
    H, W = channels.shape[-2:]
    out = np.zeros((H, W, 3), dtype=np.float64)
    for c in range(min(channels.shape[0], len(CHANNEL_COLORS))):
        color = CHANNEL_COLORS[c]
        for i in range(3):
            out[:, :, i] += channels[c] * color[i]
    return np.clip(out, 0, 255).astype(np.uint8)


def write_ppm(path: str | Path, rgb: np.ndarray) -> None:
    """Binary PPM (P6)."""
    H, W = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{W} {H}\n255\n".encode())
        fh.write(rgb.astype(np.uint8).tobytes())


def render_frames(states, out_dir: str | Path, prefix: str = "frame") -> list[Path]:
    """Write one numbered PPM per state (GridState or C x H x W array)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, state in enumerate(states):
        channels = getattr(state, "channels", state)
        path = out / f"{prefix}_{i:06d}.ppm"
        write_ppm(path, colormap(np.asarray(channels)))
        paths.append(path)
    return paths


def trajectory_overlay(frames: list[np.ndarray],
                       obstacle_mask: np.ndarray | None = None,
                       min_alpha: float = 0.15) -> np.ndarray:
    """Superpose learnable-channel frames with increasing opacity toward
    later steps, so the trajectory reads as a fading trail."""
    if not frames:
        raise ValueError("no frames to overlay")
    H, W = frames[0].shape
    acc = np.zeros((H, W), dtype=np.float64)
    T = len(frames)
    for t, frame in enumerate(frames):
        alpha = min_alpha + (1.0 - min_alpha) * (t / max(T - 1, 1))
        acc = np.maximum(acc, alpha * frame)
    channels = [acc]
    if obstacle_mask is not None:
        channels.append(obstacle_mask.astype(np.float64))
    return colormap(np.stack(channels))
