import json
import subprocess
import sys

import pytest

from gibbsflow import cli, datagen, harness


def write_config(tmp_path, **fields):
    cfg = {"preset": "mlp1", "seeds": [0], "eval_every": 2,
           "dataset": {"per_rotation_count": 4}, "train": {"epochs": 3}}
    cfg.update(fields)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_gen_data(tmp_path, capsys):
    assert cli.main(["gen-data", "--out", str(tmp_path), "--per-rotation", "2"]) == 0
    printed = capsys.readouterr().out.split()
    assert len(printed) == 3
    d = datagen.load_idx(tmp_path / "synthetic-images.idx3-f64",
                         tmp_path / "synthetic-labels.idx1-ubyte", num_classes=2)
    assert d.inputs.shape == (8, 1024)


def test_flow_writes_trace_and_charts(tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["flow", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0
    trace = harness.FlowTrace.read(out / "flow.csv")
    assert sorted({r.epoch for r in trace.rows}) == [0, 2, 3]
    assert (out / "gibbs-I_X.svg").exists() and (out / "training.svg").exists()
    assert "H(X) = 2.39 bits" in (out / "gibbs-I_X.svg").read_text()
    assert str(out / "flow.csv") in capsys.readouterr().out


def test_flags_override_config(tmp_path):
    out = tmp_path / "run"
    cli.main(["flow", "--config", str(write_config(tmp_path)), "--out", str(out),
              "--seeds", "1,2", "--preset", "mlp3", "--epochs", "1"])
    resolved = harness.ExperimentConfig.from_json((out / "resolved-config.json").read_text())
    assert resolved.seeds == (1, 2)
    assert resolved.sizes == (1024, 1, 6, 2)
    assert resolved.train.epochs == 1


def test_compare_needs_two_estimators(tmp_path, capsys):
    code = cli.main(["compare", "--config", str(write_config(tmp_path)), "--out", str(tmp_path)])
    assert code == 2
    assert "two estimators" in capsys.readouterr().err


def test_compare(tmp_path):
    out = tmp_path / "cmp"
    assert cli.main(["compare", "--config", str(write_config(tmp_path)), "--out", str(out),
                     "--estimators", "gibbs,binning"]) == 0
    assert harness.FlowTrace.read(out / "flow.csv").estimators == ["binning", "gibbs"]
    assert (out / "binning-I_X.svg").exists()


def test_train_saves_weights(tmp_path, capsys):
    out = tmp_path / "w"
    assert cli.main(["train", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0
    assert (out / "weights-seed0.mlpw").exists()
    assert "test_error" in capsys.readouterr().out


def test_plot(tmp_path):
    out = tmp_path / "run"
    cli.main(["flow", "--config", str(write_config(tmp_path)), "--out", str(out)])
    charts_dir = tmp_path / "charts"
    assert cli.main(["plot", str(out / "flow.csv"), "--out", str(charts_dir), "--cap", "2.0"]) == 0
    assert "H(X) = 2.00 bits" in (charts_dir / "gibbs-I_X.svg").read_text()


def test_generalization_single_setting(tmp_path, capsys):
    assert cli.main(["generalization", "--config", str(write_config(tmp_path)),
                     "--out", str(tmp_path / "g"), "--values", "4"]) == 0
    assert "undefined" in capsys.readouterr().out


def test_iid(tmp_path, capsys):
    cfg = write_config(tmp_path, preset="mlp2")
    assert cli.main(["iid", "--config", str(cfg), "--out", str(tmp_path / "i"),
                     "--checkpoints", "1"]) == 0
    out = capsys.readouterr().out
    assert "layer 0: r_same" in out and "layer 3: r_same" in out


def test_missing_config(tmp_path, capsys):
    assert cli.main(["flow", "--config", str(tmp_path / "nope.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_seed_list():
    with pytest.raises(SystemExit):
        cli.main(["flow", "--seeds", "a,b"])


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gibbsflow.cli", "--help"],
                          capture_output=True, text=True, check=True)
    for sub in ("gen-data", "train", "flow", "compare", "iid", "generalization", "plot"):
        assert sub in proc.stdout
