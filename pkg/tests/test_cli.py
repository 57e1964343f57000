import csv
import json

import numpy as np
import pytest

from twinlink import io
from twinlink.cli import main

TINY = """
[scene]
sim_duration = 30.0
sample_period = 0.5

[[scene.lanes]]
start = [3, 33]
end = [57, 33]
speed = 8.0
count = 1
dims = [12.0, 2.5, 3.5]
loss_db = 1.0
id = "bus"

[[scene.lanes]]
start = [3, 35.8]
end = [57, 35.8]
speed = 8.5
count = 2
id = "car"

[neural]
head = [16]
max_epochs = 2
patience = 1

[protocol]
snr_sweep = [10.0]
stage_times = [12.0, 22.0]
window = 4.0
gammas = [0.1]
threshold_note = 0
"""


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "tiny.toml").write_text(TINY.replace("threshold_note = 0\n", ""))
    assert main(["gen-grid", "--config", str(d / "tiny.toml"), "--out", str(d / "grid.jsonl")]) == 0
    assert main(["gen-veh", "--config", str(d / "tiny.toml"), "--out", str(d / "veh.jsonl")]) == 0
    return d


def test_generators(work):
    grid = io.read_dataset(work / "grid.jsonl")
    veh = io.read_dataset(work / "veh.jsonl")
    assert len(grid) == 598
    assert max(s.timestamp for s in veh) <= 30.0


def test_unknown_config_key_is_an_error(work, capsys):
    (work / "bad.toml").write_text(TINY)
    assert main(["gen-grid", "--config", str(work / "bad.toml"), "--out", str(work / "x.jsonl")]) == 2
    assert "threshold_note" in capsys.readouterr().err


def test_speedup(capsys):
    assert main(["speedup", "--old", "32,128", "--new", "16,32"]) == 0
    assert "speedup 8" in capsys.readouterr().out


def test_adcpm_dump(work):
    sub = work / "sub.jsonl"
    io.write_dataset(sub, io.read_dataset(work / "grid.jsonl")[:3])
    out = work / "maps.jsonl"
    assert main(["adcpm", "--in", str(sub), "--pool", "2,4", "--snr", "10", "--out", str(out)]) == 0
    ids, maps, pooled = io.read_adcpm_jsonl(out)
    assert len(ids) == 3 and maps[0].shape == (16, 32) and pooled[0] == (2, 4)


def test_features_csv(work):
    out = work / "f.csv"
    assert main(["features", "--in", str(work / "veh.jsonl"), "--perturb", "on", "--out", str(out)]) == 0
    with open(out, newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == len(io.read_dataset(work / "veh.jsonl"))


def test_prune(work, capsys):
    out = work / "pruned.jsonl"
    assert main(["prune", "--in", str(work / "veh.jsonl"), "--t-now", "30", "--gamma", "0.4",
                 "--out", str(out)]) == 0
    kept = io.read_dataset(out)
    assert kept and all(np.exp(-0.4 * (30 - s.timestamp)) > 0.005 for s in kept)


def test_train_finetune_eval(work, capsys):
    cfg = str(work / "tiny.toml")
    ck = work / "g.ckpt"
    assert main(["train", "--in", str(work / "grid.jsonl"), "--config", cfg, "--dataset-id", "G",
                 "--out", str(ck)]) == 0
    assert (work / "g.ckpt.pipeline.json").exists()
    ft = work / "s1.ckpt"
    assert main(["finetune", "--from", str(ck), "--in", str(work / "veh.jsonl"), "--config", cfg,
                 "--gamma", "0.1", "--t-now", "30", "--dataset-id", "S1", "--out", str(ft)]) == 0
    assert "['G', 'S1']" in capsys.readouterr().out
    assert main(["eval", "--ckpt", str(ft), "--in", str(work / "grid.jsonl"), "--config", cfg]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert 0 <= rep["accuracy"] <= 1 and rep["n_test"] == 598


def test_gradcheck_exit_codes(capsys):
    assert main(["gradcheck"]) == 0
    assert main(["gradcheck", "--corrupt"]) == 1
    assert "MISMATCH" in capsys.readouterr().out


def test_roc(tmp_path, capsys):
    scores = tmp_path / "s.csv"
    scores.write_text("score,label\n0.9,1\n0.1,0\n0.4,1\n0.6,0\n")
    out = tmp_path / "roc.csv"
    assert main(["roc", "--scores", str(scores), "--out", str(out)]) == 0
    assert "auc 0.750000" in capsys.readouterr().out
    assert out.read_text().splitlines()[1] == "0.0,0.0,inf"


def test_run_static_and_drift(work):
    cfg = str(work / "tiny.toml")
    assert main(["run-static", "--config", cfg, "--out", str(work / "static")]) == 0
    with open(work / "static" / "snr_table.csv", newline="") as f:
        assert len(list(csv.DictReader(f))) == 2
    assert main(["run-drift", "--config", cfg, "--out", str(work / "drift")]) == 0
    with open(work / "drift" / "table3.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert [(r["gamma"], r["k"]) for r in rows] == [("0.1", "1"), ("0.1", "2")]
    assert json.loads((work / "drift" / "metrics.json").read_text())["drift"]["gammas"] == [0.1]


def test_missing_input_is_rc2(tmp_path):
    assert main(["prune", "--in", str(tmp_path / "nope.jsonl"), "--t-now", "1", "--gamma", "1",
                 "--out", str(tmp_path / "o.jsonl")]) == 2


def test_prune_sets_aside_future_samples(work, capsys):
    out = work / "early.jsonl"
    assert main(["prune", "--in", str(work / "veh.jsonl"), "--t-now", "10", "--gamma", "0.1",
                 "--out", str(out)]) == 0
    assert "stamped after t=10" in capsys.readouterr().out
    assert all(s.timestamp <= 10 for s in io.read_dataset(out))
