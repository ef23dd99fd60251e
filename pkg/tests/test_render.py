import numpy as np

from lenialab.render import (colormap, render_frames, trajectory_overlay,
                             write_ppm)

# Golden 2x2 frame: channel 0 = [[1, 0], [0.5, 0]], channel 1 = [[0, 1], [0, 0]]
# amber (255,202,56) * v + blue (64,110,255) * v, clipped to 255.
GOLDEN_PIXELS = bytes([
    255, 202, 56,      # (0,0): full learnable
    64, 110, 255,      # (0,1): full obstacle
    128, 101, 28,      # (1,0): half learnable (rounded: 127.5 -> 127?)
    0, 0, 0,           # (1,1): empty
])


def test_colormap_golden():
    channels = np.zeros((2, 2, 2), dtype=np.float32)
    channels[0] = [[1.0, 0.0], [0.5, 0.0]]
    channels[1] = [[0.0, 1.0], [0.0, 0.0]]
    rgb = colormap(channels)
    assert rgb.shape == (2, 2, 3)
    assert tuple(rgb[0, 0]) == (255, 202, 56)
    assert tuple(rgb[0, 1]) == (64, 110, 255)
    assert tuple(rgb[1, 1]) == (0, 0, 0)
    assert tuple(rgb[1, 0]) == (127, 101, 28)


def test_ppm_bytes_exact(tmp_path):
    channels = np.zeros((2, 2, 2), dtype=np.float32)
    channels[0, 0, 0] = 1.0
    path = tmp_path / "f.ppm"
    write_ppm(path, colormap(channels))
    data = path.read_bytes()
    assert data.startswith(b"P6\n2 2\n255\n")
    body = data[len(b"P6\n2 2\n255\n"):]
    assert len(body) == 12
    assert body[:3] == bytes((255, 202, 56))
    assert body[3:] == bytes(9)


def test_render_frames_one_per_state(tmp_path):
    states = [np.random.default_rng(i).random((2, 8, 8)) for i in range(3)]
    paths = render_frames(states, tmp_path)
    assert len(paths) == 3
    assert all(p.exists() for p in paths)
    assert paths[0].name == "frame_000000.ppm"


def test_render_single_step_single_frame(tmp_path):
    paths = render_frames([np.zeros((2, 4, 4))], tmp_path)
    assert len(paths) == 1


def test_overlay_weights_increase():
    # A cell active only in the first frame renders dimmer than a cell
    # active only in the last frame.
    early = np.zeros((8, 8)); early[1, 1] = 1.0
    late = np.zeros((8, 8)); late[6, 6] = 1.0
    rgb = trajectory_overlay([early, np.zeros((8, 8)), late])
    assert rgb[6, 6].sum() > rgb[1, 1].sum() > 0
