import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from bcpnn.cli import git_blob_hash, main
from bcpnn.config import DEFAULTS, ExperimentConfig, SweepSpec
from bcpnn.dataio import write_idx
from bcpnn.errors import ConfigError
from bcpnn.experiment import cell_config, run_cell


@pytest.fixture
def data(tmp_path):
    rng = np.random.default_rng(0)
    imgs = rng.integers(0, 256, (60, 28, 28), dtype=np.uint8)
    labels = (np.arange(60) % 10).astype(np.uint8)
    write_idx(imgs, labels, tmp_path / "img.gz", tmp_path / "lab.gz")
    return tmp_path / "img.gz", tmp_path / "lab.gz"


def _tiny(data, tmp_path, **extra):
    values = {
        "data.train_images": str(data[0]),
        "data.train_labels": str(data[1]),
        "data.n_train": 20,
        "data.n_test": 20,
        "hidden.n_hypercolumns": 2,
        "hidden.n_minicolumns": 3,
        "network.refresh_every": 10,
        "protocol.t_pat_ms": 20.0,
        "protocol.t_gap_ms": 10.0,
        "protocol.n_epochs": 1,
        "protocol.n_patterns": 10,
        "rewire.interval_steps": 100,
        "classifier.n_epochs": 3,
        "classifier.n_runs": 1,
        "sweep.tau_z_grid": [5.0, 20.0],
        "sweep.f_max_grid": [50.0],
        "output.dir": str(tmp_path / "out"),
    }
    values.update(extra)
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(values))
    return path


# -- config -------------------------------------------------------------------


def test_defaults_are_the_reference_parameters():
    cfg = ExperimentConfig.from_dict(env={})
    sim = cfg.sim_params()
    assert (sim.tau_z_ms, sim.tau_p_ms, sim.f_max_hz, sim.dt_ms) == (20.0, 5000.0, 50.0, 1.0)
    assert cfg["network.p_conn"] == 0.10
    _, hid = cfg.geometry()
    assert (hid.n_hypercolumns, hid.n_minicolumns) == (100, 100)
    proto = cfg.protocol()
    assert (proto.t_pat_ms, proto.t_gap_ms, proto.n_epochs) == (200.0, 100.0, 10)


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict({"sim.tau_z_ms": 50, "seed": 3, "sweep.f_max_grid": [50, 500]}, env={})
    cfg.save(tmp_path / "c.yaml")
    back = ExperimentConfig.load(tmp_path / "c.yaml", env={})
    assert back == cfg
    assert back.dumps() == cfg.dumps()
    assert set(yaml.safe_load(cfg.dumps())) == set(DEFAULTS)


def test_unknown_key_and_bad_types_rejected():
    with pytest.raises(ConfigError, match="sim.tau_zz"):
        ExperimentConfig.from_dict({"sim.tau_zz": 1.0})
    with pytest.raises(ConfigError, match="protocol.n_epochs"):
        ExperimentConfig.from_dict({"protocol.n_epochs": "ten"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"sim.f_max_hz": 2000.0})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"run.mode": "analog"})


def test_env_overrides_output_dir_only():
    cfg = ExperimentConfig.from_dict({"output.dir": "a"}, env={"BCPNN_OUT_DIR": "b"})
    assert cfg["output.dir"] == "b"
    assert ExperimentConfig.from_dict({"output.dir": "a"}, env={})["output.dir"] == "a"


def test_missing_data_path_names_the_key():
    cfg = ExperimentConfig.from_dict(env={})
    with pytest.raises(ConfigError, match="data.train_images"):
        cfg.data_paths("train")


def test_sweep_spec_validation():
    base = ExperimentConfig.from_dict(env={})
    with pytest.raises(ConfigError):
        SweepSpec((1.0, -5.0), (50.0,), base)
    with pytest.raises(ConfigError):
        SweepSpec((10.0,), (1500.0,), base)
    spec = SweepSpec.from_config(base)
    assert len(spec.cells()) == 10


def test_cell_seed_depends_only_on_master_seed_and_cell():
    base = ExperimentConfig.from_dict(env={})
    a = cell_config(base, 50.0, 50.0)
    b = cell_config(base.with_(sweep__tau_z_grid=[50.0, 999.0]), 50.0, 50.0)
    assert a["seed"] == b["seed"]
    assert a["seed"] != cell_config(base, 50.0, 500.0)["seed"]
    assert a["seed"] != cell_config(base.with_(seed=1), 50.0, 50.0)["seed"]


def test_git_blob_hash_known_value():
    # git hash-object of an empty file
    assert git_blob_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"


# -- command line ---------------------------------------------------------------


def test_train_writes_outputs_and_is_deterministic(data, tmp_path, monkeypatch):
    monkeypatch.delenv("BCPNN_OUT_DIR", raising=False)
    cfg = _tiny(data, tmp_path)
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "checkpoint.zip").read_bytes() == (b / "checkpoint.zip").read_bytes()
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["files"]["checkpoint.zip"] == git_blob_hash((a / "checkpoint.zip").read_bytes())
    assert manifest["config"]["hidden.n_hypercolumns"] == 2
    header = (a / "training_log.csv").read_text().splitlines()[0]
    assert header == "epoch,mean_rate_hz,n_swaps,wall_time_s"


def test_seed_flag_changes_checkpoint(data, tmp_path, monkeypatch):
    monkeypatch.delenv("BCPNN_OUT_DIR", raising=False)
    cfg = _tiny(data, tmp_path)
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "1"]) == 0
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "2"]) == 0
    assert (tmp_path / "a" / "checkpoint.zip").read_bytes() != (tmp_path / "b" / "checkpoint.zip").read_bytes()


def test_eval_and_export(data, tmp_path, monkeypatch):
    monkeypatch.delenv("BCPNN_OUT_DIR", raising=False)
    cfg = _tiny(data, tmp_path, **{"classifier.n_runs": 3})
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out), "--mode", "rate"]) == 0
    ck = str(out / "checkpoint.zip")
    assert main(["eval", "--config", str(cfg), "--out", str(out), "--mode", "rate", "--checkpoint", ck]) == 0
    report = json.loads((out / "eval_report.json").read_text())
    assert len(report["accuracies"]) == 3
    assert "±" in report["summary"]
    for what, name in (("rf", "receptive_fields/index.csv"), ("rates", "rates.csv"), ("supports", "supports.csv")):
        assert main(["export", what, "--config", str(cfg), "--out", str(out), "--checkpoint", ck]) == 0
        assert (out / name).exists()
    rows = list(csv.reader(open(out / "receptive_fields" / "index.csv")))
    assert len(rows) == 1 + 2
    rates = list(csv.reader(open(out / "rates.csv")))
    assert rates[0] == ["time_ms", "unit", "rate_hz"]
    # 6 s replay of one hypercolumn (3 units) at 1 ms
    assert len(rates) - 1 >= 6000 * 3


def test_eval_geometry_mismatch_is_runtime_error(data, tmp_path, monkeypatch):
    monkeypatch.delenv("BCPNN_OUT_DIR", raising=False)
    cfg = _tiny(data, tmp_path)
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    other = _tiny(data, tmp_path, **{"hidden.n_minicolumns": 4})
    assert main(["eval", "--config", str(other), "--checkpoint", str(out / "checkpoint.zip")]) == 2


def test_exit_codes(data, tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("BCPNN_OUT_DIR", raising=False)
    assert main(["train", "--config", str(tmp_path / "nope.yaml")]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("sim.tau_z_ms: fast\n")
    assert main(["train", "--config", str(bad)]) == 1
    assert "sim.tau_z_ms" in capsys.readouterr().err
    assert main(["train", "--out", str(tmp_path / "x")]) == 1
    assert "data.train_images" in capsys.readouterr().err
    assert main(["frobnicate"]) == 1
    assert main(["eval", "--config", str(_tiny(data, tmp_path)), "--checkpoint", str(tmp_path / "missing.zip")]) == 2


def test_sweep_cells_match_standalone_runs(data, tmp_path, monkeypatch):
    monkeypatch.delenv("BCPNN_OUT_DIR", raising=False)
    cfg_path = _tiny(data, tmp_path)
    assert main(["sweep", "--config", str(cfg_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "out" / "sweep.csv")))
    assert list(rows[0])[:4] == ["tau_z_ms", "f_max_hz", "accuracy_mean", "accuracy_std"]
    assert len(rows) == 2 and all(r["error"] == "" for r in rows)
    base = ExperimentConfig.load(cfg_path, env={})
    for r in rows:
        res = run_cell(base, float(r["tau_z_ms"]), float(r["f_max_hz"]))
        assert f"{res.mean:.6f}" == r["accuracy_mean"]
        assert int(r["seed"]) == cell_config(base, float(r["tau_z_ms"]), float(r["f_max_hz"]))["seed"]


def test_sweep_records_failing_cell_and_continues(data, tmp_path, monkeypatch):
    monkeypatch.delenv("BCPNN_OUT_DIR", raising=False)
    # 60 images cannot supply 20 + 50 stratified samples: every cell fails but the csv is written
    cfg_path = _tiny(data, tmp_path, **{"data.n_test": 50})
    assert main(["sweep", "--config", str(cfg_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "out" / "sweep.csv")))
    assert len(rows) == 2
    assert all(r["error"].startswith("ContractViolation") for r in rows)


def test_bundled_config_files_load():
    root = Path(__file__).resolve().parents[1] / "configs"
    assert ExperimentConfig.load(root / "default.yaml", env={}) == ExperimentConfig.from_dict(env={})
    reduced = ExperimentConfig.load(root / "reduced_mnist.yaml", env={})
    assert (reduced["data.n_train"], reduced["data.n_test"]) == (1000, 1000)
    assert reduced["sim.tau_p_ms"] == 5000.0 and reduced["network.p_conn"] == 0.10
