"""Grid state container and raw snapshot IO."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class GridState:
    """C x H x W lattice of cell values in [0, 1] plus a step counter.

    Channel 0 is the learnable channel, channel 1 holds obstacles, channel 2
    (optional) an attractor element.
    """

    channels: np.ndarray
    step: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.channels.shape[-2:])

    @property
    def learnable(self) -> np.ndarray:
        return self.channels[0]

    def copy(self) -> "GridState":
        return GridState(self.channels.copy(), self.step)


def empty_state(shape: tuple[int, int], n_channels: int = 2,
                dtype=np.float32) -> GridState:
    return GridState(np.zeros((n_channels, *shape), dtype=dtype))


def save_snapshot(path: str | Path, state: GridState) -> None:
    """Raw little-endian float32 [C,H,W] plus a JSON sidecar."""
    path = Path(path)
    state.channels.astype("<f4").tofile(path)
    sidecar = {
        "shape": list(state.channels.shape),
        "dtype": "f32le",
        "step": int(state.step),
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, sort_keys=True))


def load_snapshot(path: str | Path) -> GridState:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    if sidecar.get("dtype") != "f32le":
        raise ValueError(f"unsupported snapshot dtype {sidecar.get('dtype')!r}")
    data = np.fromfile(path, dtype="<f4").reshape(sidecar["shape"])
    return GridState(data, step=int(sidecar.get("step", 0)))
