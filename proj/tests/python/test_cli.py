import json
import os
import subprocess

import pytest

CLI = os.environ.get("GHOSTCDE_CLI")
pytestmark = pytest.mark.skipif(not CLI, reason="GHOSTCDE_CLI not set")


def run(out, *args, check=True):
    cmd = [CLI, "--out", str(out), "--log-level", "error", "--yac-trees", "30", "--ghost-trees", "30",
           "--samples", "5", "--grid-extent-x", "4", "--grid-extent-y", "3", *args]
    p = subprocess.run(cmd, capture_output=True, text=True)
    if check:
        assert p.returncode == 0, p.stderr
    return p


def test_missing_prerequisite_is_reported(tmp_path):
    p = run(tmp_path, "eval-season", check=False)
    assert p.returncode == 3
    err = json.loads(p.stderr.strip().splitlines()[-1])
    assert err["command"] == "eval-season"
    assert err["produced_by"] == "features"

    run(tmp_path, "synth", "--n-plays", "20", "--weeks", "2")
    run(tmp_path, "features")
    p = run(tmp_path, "eval-season", check=False)
    assert p.returncode == 3
    assert json.loads(p.stderr.strip().splitlines()[-1])["produced_by"] == "train-yac"


def test_end_to_end_small_run(tmp_path):
    run(tmp_path, "synth", "--n-plays", "40", "--weeks", "3")
    run(tmp_path, "features")
    run(tmp_path, "train-yac")
    run(tmp_path, "train-ghost")
    run(tmp_path, "eval-season")
    for name in ("evaluations.csv", "leaderboard.csv", "player_scatter.csv", "epv.csv",
                 "run_config_eval-season.toml"):
        assert (tmp_path / name).exists(), name
    with open(tmp_path / "evaluations.csv") as f:
        header, first = f.readline().strip().split(","), f.readline().strip().split(",")
    game, play = first[header.index("game_id")], first[header.index("play_id")]
    run(tmp_path, "eval-play", "--game", game, "--play", play)
    for stem in ("ghost_grid", "ghost_samples", "ghost_summary"):
        assert (tmp_path / f"{stem}_{game}_{play}.csv").exists()
    run(tmp_path, "cv", "--model", "yac")
    assert (tmp_path / "cv_summary_yac.csv").exists()
    run(tmp_path, "report")
