import json
import os

import pandas as pd
import pytest

from main import main

TRAIN = ["--task", "blobs:120", "--width", "2", "--epochs", "2", "--lr", "0.1"]


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.setenv("PBGNET_RUN_DB_URL", f"sqlite:///{tmp_path / 'runs.db'}")
    monkeypatch.setenv("PBGNET_OUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("PBGNET_DATA_DIR", str(tmp_path / "data"))
    return tmp_path


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def _train(capsys, extra=()):
    code, response = _run(capsys, ["train", *TRAIN, *extra])
    assert code == 0, response
    return response["result"]


def test_train_prints_record(workspace, capsys):
    record = _train(capsys)
    assert record["config"]["task"] == "blobs:120"
    assert record["config"]["method"] == "pbgnet"
    assert os.path.exists(record["checkpoint_path"])
    assert record["record_path"].startswith(str(workspace / "runs"))
    assert 0.0 < record["bound"]["seeger_bound"] <= 1.0


def test_usage_errors_exit_with_one(workspace, capsys):
    assert main(["train", "--width", "2"]) == 1
    assert main(["fit", "--task", "blobs"]) == 1
    assert main([]) == 1
    code, response = _run(capsys, ["train", "--task", "blobs", "--method", "mlp", "--sample-size", "10"])
    assert code == 1
    assert response["error_type"] == "ConfigError"
    code, _ = _run(capsys, ["train", "--task", "imagenet"])
    assert code == 1
    code, _ = _run(capsys, ["train", *TRAIN, "--exact", "--sample-size", "10"])
    assert code == 1


def test_missing_data_exits_with_two(workspace, capsys):
    code, response = _run(capsys, ["train", "--task", "mnist17"])
    assert code == 2
    assert response["success"] is False
    assert response["error_type"] == "DataFormatError"


def test_invalid_exact_cap_is_a_usage_error(workspace, monkeypatch, capsys):
    monkeypatch.setenv("PBGNET_EXACT_CAP", "many")
    assert main(["train", *TRAIN]) == 1


def test_certify_surface_and_verify(workspace, capsys):
    record = _train(capsys)

    output = workspace / "bound.json"
    code, response = _run(capsys, ["certify", "--checkpoint", record["checkpoint_path"], "--output", str(output)])
    assert code == 0
    assert response["result"]["seeger_bound"] == record["bound"]["seeger_bound"]
    assert json.loads(output.read_text())["kl"] == record["bound"]["kl"]

    csv_path = workspace / "surface.csv"
    code, response = _run(capsys, ["surface", "--checkpoint", record["checkpoint_path"], "--output", str(csv_path),
                                   "--resolution", "4", "--extent", "-1,1,-2,2"])
    assert code == 0
    assert response["result"]["rows"] == 16
    frame = pd.read_csv(csv_path)
    assert frame["x2"].min() == -2.0
    assert {"psi_++", "vote_--"} <= set(frame.columns)

    code, response = _run(capsys, ["verify", "--record", record["record_path"]])
    assert code == 0
    assert response["result"]["ok"] is True
    code, response = _run(capsys, ["verify", "--run-id", record["run_id"]])
    assert code == 0


def test_sampled_certificate_is_stable_across_seeds(workspace, capsys):
    record = _train(capsys, ["--sample-size", "10", "--inference-sample-size", "10000"])
    losses = []
    for seed in ("1", "2"):
        code, response = _run(capsys, ["certify", "--checkpoint", record["checkpoint_path"], "--seed", seed])
        assert code == 0, response
        assert response["result"]["sample_size"] == 10000
        losses.append(response["result"]["q"])
    assert abs(losses[0] - losses[1]) < 1e-3


def test_surface_rejects_bad_extent(workspace, capsys):
    record = _train(capsys)
    code, _ = _run(capsys, ["surface", "--checkpoint", record["checkpoint_path"], "--output",
                            str(workspace / "s.csv"), "--extent", "0,1,2"])
    assert code == 1


def test_verify_flags_tampered_record(workspace, capsys):
    record = _train(capsys)
    with open(record["record_path"]) as handle:
        stored = json.load(handle)
    stored["metrics"]["test_loss"] += 0.01
    with open(record["record_path"], "w") as handle:
        json.dump(stored, handle)
    code, response = _run(capsys, ["verify", "--record", record["record_path"]])
    assert code == 3
    assert list(response["result"]["diffs"]) == ["test_loss"]


def test_verify_needs_a_run(workspace, capsys):
    code, _ = _run(capsys, ["verify"])
    assert code == 1


def test_grid_selects_by_bound(workspace, capsys):
    code, response = _run(capsys, ["grid", "--task", "blobs:120", "--layers-grid", "1", "--widths", "2,3",
                                   "--lrs", "0.1", "--epochs", "2", "--exact", "--grid-id",
                                   "6f1c2b1e-8d0a-4b7e-9a53-2f4de1c0a9b7"])
    assert code == 0
    report = response["result"]
    assert report["n_cells"] == 2
    assert report["multiplicity"] == 9
    assert report["rule"] == "bound"
    assert report["failed"] == []
    assert os.path.exists(workspace / "runs" / f"grid_{report['grid_id']}.json")
