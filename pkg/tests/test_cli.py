import json
import os

import pytest

import gliacomm as g
from gliacomm.cli import main
from gliacomm.params import StimulusSpec


@pytest.fixture
def config_path(tmp_path):
    cfg = g.ScenarioConfig(
        lattice_dims=(3, 3, 3), transmitter_cell=(0, 1, 1),
        receiver_cell=(2, 1, 1), sim_time_max=3.0, delta_quantum=0.05,
        stimulus=StimulusSpec(amplitude=10.0, start=0.5, duration=2.0),
        engine=g.EngineParams(record_events=False),
    )
    path = tmp_path / "cfg.yaml"
    g.save_config(cfg, path)
    return str(path)


def test_validate_good_config(config_path, tmp_path):
    before = set(os.listdir(tmp_path))
    assert main(["--quiet", "validate", "--config", config_path]) == 0
    assert set(os.listdir(tmp_path)) == before  # no files written


def test_missing_config_exits_1(capsys):
    rc = main(["--quiet", "validate", "--config", "/no/such/file.yaml"])
    assert rc == 1
    assert "/no/such/file.yaml" in capsys.readouterr().err


def test_invalid_config_exits_1(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("delta_quantum: -1\n")
    assert main(["--quiet", "validate", "--config", str(bad)]) == 1


def test_run_writes_outputs_and_manifest(config_path, tmp_path):
    out = tmp_path / "out"
    assert main(["--quiet", "run", "--config", config_path,
                 "--out", str(out)]) == 0
    assert (out / "snapshots.csv").exists()
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert set(manifest) == {"config_sha256", "seed", "version"}
    assert manifest["seed"] == 0
    # seed override is recorded
    assert main(["--quiet", "run", "--config", config_path,
                 "--out", str(out), "--seed", "42"]) == 0
    assert json.loads((out / "run_manifest.json").read_text())["seed"] == 42


def test_topo_exports_graph(config_path, tmp_path):
    out = tmp_path / "topo"
    assert main(["--quiet", "topo", "--config", config_path,
                 "--out", str(out)]) == 0
    edges = (out / "edges.csv").read_text().splitlines()
    assert edges and all(len(line.split()) == 2 for line in edges)
    stats = json.loads((out / "stats.json").read_text())
    assert "mean_degree" in stats


def test_matrix_byte_identical_reruns(config_path, tmp_path):
    outs = []
    for name in ("m1", "m2"):
        out = tmp_path / name
        assert main(["--quiet", "matrix", "--config", config_path,
                     "--out", str(out), "--replicas", "2"]) == 0
        outs.append((out / "metrics.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = outs[0].decode().splitlines()
    assert len(rows) == 3  # header + 2 seeds


def test_scan_writes_csv(tmp_path):
    cfg = g.ScenarioConfig(sim_time_max=0.0)
    path = tmp_path / "cfg.yaml"
    g.save_config(cfg, path)
    out = tmp_path / "scan"
    rc = main(["--quiet", "scan", "--config", str(path), "--out", str(out),
               "--drive-min", "0.0", "--drive-max", "1.0",
               "--drive-steps", "3"])
    assert rc == 0
    lines = (out / "scan.csv").read_text().splitlines()
    assert lines[0] == "drive,ca_min,ca_max,oscillating"
    assert len(lines) == 4
