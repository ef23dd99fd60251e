import json
from pathlib import Path

import numpy as np
import pytest

from lenialab.cli import main

FIXTURE = Path(__file__).parent / "fixtures" / "static_blob_64.params.json"


def test_random_search_writes_run_dir(tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({
        "grid_shape": [64, 64], "init_shape": [10, 10],
        "init_offset": [10, 26], "r_range": [4, 8], "n_obstacles": 2,
        "obstacle_radius": 4.0, "eval_rollouts": 2, "rollout_steps": 10,
    }))
    out = tmp_path / "run"
    rc = main(["random-search", "--budget", "4", "--seed", "1",
               "--out", str(out), "--config", str(config)])
    assert rc == 0
    meta = json.loads((out / "run.json").read_text())
    assert meta["kind"] == "random"
    assert meta["records"] == 4
    assert meta["ledger"]["total"] == 4
    lines = (out / "history.jsonl").read_text().splitlines()
    assert len(lines) == 4


def test_discover_tiny_run(tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({
        "grid_shape": [64, 64], "init_shape": [10, 10],
        "init_offset": [10, 26], "r_range": [4, 8], "n_obstacles": 2,
        "obstacle_radius": 4.0, "eval_rollouts": 2, "rollout_steps": 10,
        "n_outer": 3, "history_init": 4, "grad_steps_long": 4,
        "grad_steps_short": 2, "init_sel_steps": 1, "max_restarts": 1,
        "init_sel_threshold": 1e9, "warmup_start": [-0.24, 0.0],
        "warmup_dx": 0.04, "mutation_cap": 3,
    }))
    out = tmp_path / "run"
    rc = main(["discover", "--seed", "2", "--out", str(out),
               "--config", str(config)])
    assert rc == 0
    meta = json.loads((out / "run.json").read_text())
    assert meta["records"] == 4 + 3
    ledger = meta["ledger"]
    total = (ledger["history_init"] + ledger["mutation_retries"]
             + ledger["gradient_steps"] + ledger["evaluation"]
             + ledger["restart_discarded"])
    assert ledger["total"] == total


def test_evaluate_fixture(tmp_path):
    out = tmp_path / "report.json"
    csv = tmp_path / "report.csv"
    rc = main(["evaluate", "--params", str(FIXTURE), "--out", str(out),
               "--csv", str(csv), "--desk"])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert len(doc["reports"]) == 1
    report = doc["reports"][0]
    assert report["prefilter"] is True
    assert report["agent"] is True
    assert report["moving"] is False  # the blob never travels
    assert csv.exists()


def test_render_writes_frames(tmp_path):
    rc = main(["render", "--params", str(FIXTURE), "--steps", "3",
               "--out", str(tmp_path), "--grid", "64"])
    assert rc == 0
    frames = list((tmp_path / "static_blob_64").glob("frame_*.ppm"))
    assert len(frames) == 3
    assert (tmp_path / "static_blob_64" / "overlay.ppm").exists()


def test_attractor_search_budget(tmp_path):
    out = tmp_path / "rules.json"
    rc = main(["attractor-search", "--agent", str(FIXTURE), "--budget", "3",
               "--seed", "0", "--out", str(out), "--desk"])
    assert rc == 0
    assert isinstance(json.loads(out.read_text()), list)


def test_cli_help_lists_commands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    text = capsys.readouterr().out
    for command in ("discover", "random-search", "evaluate", "generalize",
                    "render", "serve", "attractor-search"):
        assert command in text
