"""Obstacle disks: rasterization, random placement, scripted motion."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class ObstacleConfig:
    """Disk list plus a rational horizontal shift speed (cells/step).

    Speed ``speed_num/speed_den`` moves the whole obstacle channel toward
    negative x: for 1/q the mask shifts one cell every q steps, for integer
    p it shifts p cells every step.
    """

    disks: list[tuple[float, float, float]] = field(default_factory=list)
    speed_num: int = 0
    speed_den: int = 1

    def __post_init__(self):
        if self.speed_den <= 0:
            raise ValueError("speed_den must be positive")

    @property
    def moving(self) -> bool:
        return self.speed_num != 0

    def total_shift(self, step: int) -> int:
        """Accumulated shift after ``step`` completed steps (integer cells)."""
        return (step * self.speed_num) // self.speed_den

    def rasterize(self, shape: tuple[int, int]) -> np.ndarray:
        """Binary mask; a cell belongs to a disk when its center is strictly
        inside the disk radius (ties excluded)."""
        H, W = shape
        mask = np.zeros(shape, dtype=bool)
        if not self.disks:
            return mask
        xs = np.arange(H, dtype=np.float64)[:, None]
        ys = np.arange(W, dtype=np.float64)[None, :]
        for cx, cy, radius in self.disks:
            mask |= (xs - cx) ** 2 + (ys - cy) ** 2 < radius ** 2
        return mask

    def to_json(self) -> dict:
        return {
            "disks": [{"x": float(x), "y": float(y), "radius": float(r)}
                      for x, y, r in self.disks],
            "speed_num": int(self.speed_num),
            "speed_den": int(self.speed_den),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ObstacleConfig":
        return cls(
            disks=[(d["x"], d["y"], d["radius"]) for d in doc.get("disks", [])],
            speed_num=int(doc.get("speed_num", 0)),
            speed_den=int(doc.get("speed_den", 1)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "ObstacleConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


def training_obstacles(rng: np.random.Generator, shape: tuple[int, int],
                       n: int = 8, radius: float = 10.0) -> ObstacleConfig:
    """Training placement: disk centers uniform over the x > 0 half."""
    H, W = shape
    xs = rng.uniform(H / 2.0, H, size=n)
    ys = rng.uniform(0.0, W, size=n)
    return ObstacleConfig(disks=[(x, y, radius) for x, y in zip(xs, ys)])


def uniform_obstacles(rng: np.random.Generator, shape: tuple[int, int],
                      n: int = 24, radius: float = 10.0,
                      speed: tuple[int, int] = (0, 1)) -> ObstacleConfig:
    """Evaluation placement: disk centers uniform over the whole grid."""
    H, W = shape
    xs = rng.uniform(0.0, H, size=n)
    ys = rng.uniform(0.0, W, size=n)
    return ObstacleConfig(
        disks=[(x, y, radius) for x, y in zip(xs, ys)],
        speed_num=speed[0], speed_den=speed[1],
    )


def clear_near_pattern(mask: np.ndarray, pattern_mask: np.ndarray,
                       clearance: float = 10.0) -> np.ndarray:
    """Remove obstacle cells inside the pattern and within ``clearance``
    Euclidean distance of it, leaving room for the initialization to develop."""
    from scipy.ndimage import distance_transform_edt

    if not pattern_mask.any():
        return mask
    dist = distance_transform_edt(~pattern_mask)
    out = mask.copy()
    out[dist <= clearance] = False
    return out
