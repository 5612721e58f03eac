import json

import numpy as np
import pytest

from mixrip.cli import main


def test_missing_seed_exit_2(capsys):
    assert main(["inequalities"]) == 2
    assert "seed" in capsys.readouterr().err


def test_empty_k_range_exit_2(tmp_path):
    assert main(["variance", "--kmax", "0", "--seed", "1", "--out", str(tmp_path)]) == 2


def test_unknown_flag_and_command_exit_2():
    assert main(["inequalities", "--bogus", "1"]) == 2
    assert main(["nope"]) == 2
    assert main([]) == 2


def test_unknown_config_key_exit_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "unknown": 3}))
    assert main(["legacy", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_config_merged_under_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "m": 16, "d": 3}))
    assert main(["sample-freqs", "--config", str(cfg), "--m", "8", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "sample-freqs-1.json").read_text())
    assert meta["m"] == 8 and meta["d"] == 3
    data = np.loadtxt(tmp_path / "sample-freqs-1.csv", delimiter=",", skiprows=1)
    assert data.shape == (8, 4)


def test_inequalities_command_writes_artifacts(tmp_path):
    assert main(["inequalities", "--seed", "7", "--samples", "20000", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "inequalities-7.csv").exists()
    meta = json.loads((tmp_path / "inequalities-7.json").read_text())
    assert meta["passed"] and meta["config"]["seed"] == 7


def test_csv_is_byte_identical_across_runs(tmp_path):
    for sub in ("a", "b"):
        assert main(["tails", "--seed", "3", "--replicates", "500", "--out", str(tmp_path / sub)]) == 0
    assert (tmp_path / "a" / "tails-3.csv").read_bytes() == (tmp_path / "b" / "tails-3.csv").read_bytes()


def test_failed_assertion_exit_1(tmp_path):
    # with a single draw the classical variance is far from its limit
    assert main(["variance", "--seed", "1", "--kmax", "2", "--replicates", "20", "--m", "5",
                 "--out", str(tmp_path)]) == 1


def test_rip_command(tmp_path):
    argv = ["rip", "--base", "dirac", "--d", "2", "--k", "2", "--m", "4096", "--s", "1", "--eps", "8",
            "--seed", "1", "--budget", "128", "--refine", "4", "--max-iter", "30", "--out", str(tmp_path)]
    assert main(argv) == 0
    body = json.loads((tmp_path / "rip-1.json").read_text())
    rep = body["report"]
    assert rep["c"] < 0.2 and rep["bound_delta_sk"] < 1
    assert body["config"]["seed"] == 1


def test_sketch_command(tmp_path):
    pts = tmp_path / "pts.csv"
    np.savetxt(pts, np.random.default_rng(0).normal(size=(50, 2)), delimiter=",")
    assert main(["sketch", "--input", str(pts), "--m", "32", "--seed", "4", "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "sketch-4.csv").read_text().splitlines()) == 33
    mix = tmp_path / "mix.json"
    mix.write_text(json.dumps([{"center": [0.0, 0.0], "weight": 1.0}]))
    assert main(["sketch", "--input", str(mix), "--m", "16", "--seed", "5", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "sketch-5.json").read_text())
    assert meta["sketch_norm_sq"] == pytest.approx(1.0)
    assert main(["sketch", "--seed", "5", "--out", str(tmp_path)]) == 2
