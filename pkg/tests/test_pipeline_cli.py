import json
import os
import subprocess
import sys

import numpy as np
import pytest

from bolt.cli import main
from bolt.fixtures import write_identity_outfit, write_two_layer_outfit
from bolt.io import load_garment_bundle, load_manifest, load_weights, save_manifest
from bolt.pipeline import format_report, run_pipeline

FAST = {"sdf": {"resolution": 32}}


@pytest.fixture
def identity(tmp_path):
    return write_identity_outfit(tmp_path / "in")


def test_identity_run_writes_bundle(identity, tmp_path):
    r = run_pipeline(identity, tmp_path / "out", FAST, frames=1, seed=7)
    assert r.ok and r.outputs == ["garments/00_tube/garment.obj"]
    out = tmp_path / "out"
    a = load_garment_bundle(identity.parent / "garments" / "tube")
    b = load_garment_bundle(out / "garments" / "00_tube")
    assert np.abs(a.mesh3d.positions - b.mesh3d.positions).max() < 0.05
    w = load_weights(out / "garments" / "00_tube" / "weights.json")
    assert w.n_vertices == b.n_vertices
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "ok" and rep["seed"] == 7 and rep["config"]["sim"]["frames"] == 1
    assert set(rep["timings"]) >= {"load", "transfer", "pattern", "drape", "rig", "total"}
    assert "00_tube" in format_report(rep)


def test_empty_outfit_is_valid(identity, tmp_path):
    m = load_manifest(identity)
    m.garments.clear()
    save_manifest(m, identity)
    r = run_pipeline(identity, tmp_path / "out", FAST)
    assert r.ok and r.outputs == [] and r.transfer_jobs == []
    assert (tmp_path / "out" / "report.json").exists()


def test_one_transfer_job_per_source(tmp_path):
    path = write_two_layer_outfit(tmp_path / "in")
    m = load_manifest(path)
    m.garments[1].source = "target"
    save_manifest(m, path)
    r = run_pipeline(path, tmp_path / "out", FAST, frames=0)
    assert r.ok
    assert sorted(j["source"] for j in r.transfer_jobs) == ["source", "target"]
    assert r.drape_order == ["00_inner", "01_outer"]


def test_failed_stage_layout(identity, tmp_path):
    r = run_pipeline(identity, tmp_path / "out", {**FAST, "rig": {"max_ray": 0.01}}, frames=0)
    assert not r.ok and r.failed_stage == "rig" and r.failed_garment == "00_tube"
    assert "RigTransferError" in r.error
    out = tmp_path / "out"
    assert (out / "report.json").exists()
    assert (out / "failed" / "garments" / "00_tube" / "garment.obj").exists()
    assert not (out / "garments").exists()


def test_failed_load_reports_stage(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps({"bodies": {"a": "missing"}, "target": "a",
                                                 "garments": []}))
    r = run_pipeline(tmp_path / "m.json", tmp_path / "out")
    assert r.failed_stage == "load"


def test_rerun_replaces_previous_output(identity, tmp_path):
    run_pipeline(identity, tmp_path / "out", FAST, frames=0)
    (tmp_path / "out" / "stale.txt").write_text("x")
    run_pipeline(identity, tmp_path / "out", FAST, frames=0)
    assert not (tmp_path / "out" / "stale.txt").exists()
    assert not any(p.name.startswith(".out") for p in tmp_path.iterdir())


def test_cli_commands(identity, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(FAST))
    out = tmp_path / "out"
    assert main(["run", str(identity), "--out", str(out), "--config", str(cfg), "--frames", "0",
                 "--threads", "2", "--seed", "0xffffffffffffffff"]) == 0
    assert json.loads((out / "report.json").read_text())["seed"] == 2 ** 64 - 1
    assert main(["validate", str(out / "garments" / "00_tube")]) == 0
    assert main(["report", str(out)]) == 0
    assert "status: ok" in capsys.readouterr().out
    assert main(["validate", str(tmp_path)]) == 1
    assert main(["report", str(tmp_path)]) == 2
    cfg.write_text("{")
    assert main(["run", str(identity), "--out", str(out), "--config", str(cfg)]) == 2
    cfg.write_text(json.dumps({"sim": {"frame": 1}}))
    assert main(["run", str(identity), "--out", str(out), "--config", str(cfg)]) == 1
    with pytest.raises(SystemExit):
        main(["run", str(identity), "--out", str(out), "--seed", "-1"])


def test_cli_log_level_from_environment(identity, tmp_path):
    env = {**os.environ, "BOLT_LOG": "INFO"}
    cmd = [sys.executable, "-m", "bolt.cli", "run", str(identity), "--out", str(tmp_path / "o"),
           "--frames", "0"]
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(FAST))
    proc = subprocess.run(cmd + ["--config", str(cfg)], env=env, capture_output=True, text=True)
    assert proc.returncode == 0 and "INFO bolt." in proc.stderr
    env["BOLT_LOG"] = "ERROR"
    proc = subprocess.run(cmd + ["--config", str(cfg)], env=env, capture_output=True, text=True)
    assert proc.returncode == 0 and "INFO" not in proc.stderr


def test_debug_outputs(identity, tmp_path):
    from bolt.sdf import load_sdf

    r = run_pipeline(identity, tmp_path / "out", FAST, frames=2, emit_debug_sdf=True,
                     emit_frames=True)
    assert r.ok
    out = tmp_path / "out"
    assert sorted(p.name for p in (out / "frames" / "00_tube").iterdir()) == \
        ["frame_000.obj", "frame_001.obj"]
    s = load_sdf(out / "debug" / "sdf_before_00_tube.bin")
    assert s.values.shape == load_sdf(out / "debug" / "sdf_final.bin").values.shape
