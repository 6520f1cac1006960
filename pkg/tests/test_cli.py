import json

import numpy as np
import pytest

from stepsafe.cli import main
from stepsafe.dataset import read_dataset
from stepsafe.serial import read_json, write_predictions


def run(*args):
    return main([str(a) for a in args])


def test_terrain_smoke(tmp_path):
    out = tmp_path / "t"
    assert run("terrain", "--kind", "stairs_up", "--rise", "0.15",
               "--tread", "0.30", "--out", out) == 0
    spec = read_json(out / "spec.json")
    assert spec["kind"] == "stairs_up"
    assert spec["step_height"] == 0.15
    assert (out / "preview.pgm").read_text().startswith("P2")
    assert (out / "run_manifest.json").exists()


def test_terrain_range_error_exit_code(tmp_path, capsys):
    rc = run("terrain", "--rise", "0.5", "--out", tmp_path / "bad")
    assert rc == 2
    assert "validation" in capsys.readouterr().err


def test_terrain_curriculum_deterministic(tmp_path):
    run("terrain", "--level", "4", "--seed", "7", "--out", tmp_path / "a")
    run("terrain", "--level", "4", "--seed", "7", "--out", tmp_path / "b")
    assert ((tmp_path / "a" / "spec.json").read_bytes()
            == (tmp_path / "b" / "spec.json").read_bytes())


def test_simulate_counts_and_determinism(tmp_path):
    args = ("simulate", "--kind", "flat", "--scenario", "line",
            "--duration", "1.0", "--seed", "3", "--n-azimuth", "24",
            "--n-elevation", "8")
    assert run(*args, "--out", tmp_path / "a") == 0
    man = read_json(tmp_path / "a" / "run_manifest.json")
    assert man["resolved"]["fusions"] == 10
    assert man["resolved"]["extractions"] == 50
    timing = read_json(tmp_path / "a" / "timing.json")
    assert timing["extractions"] == 50

    assert run(*args, "--out", tmp_path / "b") == 0
    for name in ("grids.bin", "grids.json", "map.bin", "map.json",
                 "run_manifest.json"):
        assert ((tmp_path / "a" / name).read_bytes()
                == (tmp_path / "b" / name).read_bytes()), name


def test_simulate_dwell_writes_zone_report(tmp_path):
    assert run("simulate", "--kind", "flat", "--scenario", "dwell",
               "--duration", "4.0", "--t-decay", "1.0", "--seed", "1",
               "--n-azimuth", "32", "--n-elevation", "12",
               "--out", tmp_path / "d") == 0
    rep = read_json(tmp_path / "d" / "zone_report.json")
    assert rep["zone_cells_valid_at_start"] > 0
    assert rep["zone_retention"] == 1.0


def test_penalty_sweep_flat_all_zero(tmp_path):
    out = tmp_path / "p"
    assert run("penalty", "--kind", "flat", "--x0", "-0.2", "--x1", "0.2",
               "--y0", "-0.1", "--y1", "0.1", "--out", out) == 0
    rows = (out / "sweep.csv").read_text().strip().splitlines()
    assert rows[0] == "x,y,r_colli,r_edge,r_safe"
    vals = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    assert np.all(vals[:, 2:] == 0.0)
    assert (out / "heatmap.pgm").exists()


def test_dataset_eval_round_trip(tmp_path):
    ds = tmp_path / "ds"
    assert run("dataset", "--samples", "4", "--seed", "2", "--out", ds,
               "--n-azimuth", "24", "--n-elevation", "8",
               "--samples-per-run", "2") == 0
    samples, man = read_dataset(ds)
    assert len(samples) == 4

    # predictions equal to ground truth score zero error
    preds = np.stack([s.gt_heights for s in samples])
    write_predictions(tmp_path / "pred", preds)
    out = tmp_path / "scores"
    assert run("eval", "--pred", tmp_path / "pred", "--dataset", ds,
               "--out", out) == 0
    summary = read_json(out / "summary.json")
    assert summary["g_mse"] == 0.0
    assert summary["e_mae"] in (0.0, None)
    lines = (out / "metrics.jsonl").read_text().strip().splitlines()
    assert len(lines) == 4
    assert json.loads(lines[0])["g_mse"] == 0.0


def test_eval_shape_mismatch_exit_code(tmp_path, capsys):
    ds = tmp_path / "ds"
    run("dataset", "--samples", "2", "--seed", "2", "--out", ds,
        "--n-azimuth", "24", "--n-elevation", "8", "--samples-per-run", "2")
    write_predictions(tmp_path / "bad", np.zeros((2, 10, 10), dtype=np.float32))
    rc = run("eval", "--pred", tmp_path / "bad", "--dataset", ds,
             "--out", tmp_path / "o")
    assert rc == 4
    assert "format error" in capsys.readouterr().err


def test_dataset_rerun_byte_identical(tmp_path):
    for name in ("a", "b"):
        run("dataset", "--samples", "3", "--seed", "5", "--out", tmp_path / name,
            "--n-azimuth", "24", "--n-elevation", "8", "--samples-per-run", "3")
    assert ((tmp_path / "a" / "tensors.bin").read_bytes()
            == (tmp_path / "b" / "tensors.bin").read_bytes())
    assert ((tmp_path / "a" / "manifest.json").read_bytes()
            == (tmp_path / "b" / "manifest.json").read_bytes())


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("STEPSAFE_OUT", str(tmp_path))
    assert run("terrain", "--kind", "flat", "--out", "rooted") == 0
    assert (tmp_path / "rooted" / "spec.json").exists()
