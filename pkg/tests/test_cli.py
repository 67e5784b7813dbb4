import json

import pytest

from drsim.cli import main
from drsim.forecast import checkpoint
from drsim.trace import load_series, synth_trace, save_series

from conftest import CONFIGS


def test_ingest(tmp_path, capsys):
    trace = tmp_path / "usage.csv"
    trace.write_text("0,300000000,j,0,m,0.5\n300000000,600000000,j,1,m,1.5\n100,50,j,2,m,1\n")
    out = tmp_path / "series.json"
    assert main(["ingest", "--trace", str(trace), "--out", str(out)]) == 0
    s = load_series(out)
    assert s.values == (0.5, 1.5)
    assert "1 skipped" in capsys.readouterr().err
    assert main(["ingest", "--trace", str(trace), "--strict"]) == 2


def test_ingest_csv_stdout(tmp_path, capsys):
    trace = tmp_path / "usage.csv"
    trace.write_text("0,300000000,j,0,m,0.5\n")
    assert main(["ingest", "--trace", str(trace)]) == 0
    assert capsys.readouterr().out.splitlines() == ["slot_index,value", "0,0.5"]


def test_train_eval_roundtrip(tmp_path, capsys):
    series = tmp_path / "s.csv"
    save_series(synth_trace(200, 1), series)
    model = tmp_path / "m.bin"
    argv = ["train", "--series", str(series), "--epochs", "2", "--hidden", "4",
            "--seed", "5", "--out", str(model)]
    assert main(argv) == 0
    first = model.read_bytes()
    assert main(argv) == 0
    assert model.read_bytes() == first
    capsys.readouterr()
    assert main(["eval", "--model", str(model), "--series", str(series)]) == 0
    out = capsys.readouterr().out
    assert "MAE=" in out and "MAPE=" in out and "R2=" in out
    assert checkpoint.load(model).hidden_sizes == (4,)


def test_eval_bad_model(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"garbage")
    series = tmp_path / "s.csv"
    save_series(synth_trace(50, 1), series)
    assert main(["eval", "--model", str(bad), "--series", str(series)]) == 4


def test_simulate_formats(tmp_path):
    outs = {}
    for fmt in ("text", "json", "csv"):
        path = tmp_path / f"r.{fmt}"
        assert main(["simulate", "--config", str(CONFIGS / "five_clusters.yaml"), "--format", fmt,
                     "--out", str(path)]) == 0
        outs[fmt] = path.read_bytes()
    doc = json.loads(outs["json"])
    assert [round(u * 100) for u in doc["rows"][-1]["utilizations"]] == [60, 60, 55, 60, 70]
    assert b"O" in outs["text"]


def test_simulate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        main(["simulate", "--config", str(CONFIGS / "five_clusters.yaml"), "--policy", "random",
              "--seed", "17", "--format", "json", "--out", str(p)])
    assert a.read_bytes() == b.read_bytes()


def test_simulate_exit_codes(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("clusters: []\n")
    assert main(["simulate", "--config", str(bad)]) == 2
    assert main(["simulate", "--config", str(CONFIGS / "five_clusters.yaml"), "--strict-more",
                 "--out", str(tmp_path / "x")]) == 3
    assert main(["simulate", "--config", str(CONFIGS / "five_clusters.yaml"), "--policy", "forecast",
                 "--model", str(tmp_path / "missing.bin")]) == 4
    assert main(["simulate", "--config", str(CONFIGS / "five_clusters.yaml"), "--policy", "forecast"]) == 2


def test_simulate_with_checkpoint(tmp_path, desk_model):
    model = tmp_path / "m.bin"
    checkpoint.save(desk_model, model)
    out = tmp_path / "r.json"
    assert main(["simulate", "--config", str(CONFIGS / "five_clusters.yaml"), "--policy", "forecast",
                 "--model", str(model), "--format", "json", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["flags"] == []


def test_compare(tmp_path, capsys):
    assert main(["compare", "--config", str(CONFIGS / "five_clusters.yaml"), "--policies", "current,random",
                 "--trials", "5", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"current", "random"}
    assert main(["compare", "--config", str(CONFIGS / "five_clusters.yaml"), "--trials", "2"]) == 2


def test_synth(tmp_path):
    out = tmp_path / "s.json"
    assert main(["synth", "--length", "10", "--seed", "2", "--out", str(out)]) == 0
    assert load_series(out) == synth_trace(10, 2)
