import csv
import json
import time
from pathlib import Path

import pytest

from tdif.cli import main

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--topics", "2", "--days", "6", "--docs-per-day", "60", "--out", str(out),
                 "--seed", "3"]) == 0
    return out


def _pipeline(d: Path, out: Path, extra=()):
    s, t, q = str(d / "stream.jsonl"), str(d / "topics.json"), str(d / "qrels.tsv")
    assert main(["train", "--stream", s, "--topics", t, "--qrels", q, "--K", "10", "--iters", "50",
                 "--out", str(out / "w.json"), *extra]) == 0
    assert main(["run", "--stream", s, "--topics", t, "--weights", str(out / "w.json"), "--K", "10", "--m", "5",
                 "--out", str(out / "run.tsv"), *extra]) == 0
    assert main(["eval", "--run", str(out / "run.tsv"), "--qrels", q, "--topics", t, "--stream", s,
                 "--out", str(out / "eval.csv")]) == 0
    return [(out / n).read_bytes() for n in ("w.json", "run.tsv", "eval.csv")]


def test_pipeline_is_fast_and_byte_identical(dataset, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    t0 = time.perf_counter()
    first = _pipeline(dataset, a)
    assert time.perf_counter() - t0 < 60
    assert _pipeline(dataset, b) == first
    rows = list(csv.DictReader(open(a / "eval.csv")))
    assert {r["metric"] for r in rows} == {"alpha-ndcg", "d-ndcg"}
    assert all(0.0 <= float(r["value"]) <= 1.0 for r in rows)
    run = (a / "run.tsv").read_text().splitlines()
    assert run[0].split("\t") == ["topic_id", "window_index", "rank", "doc_id", "epoch_ms", "utility"]


def test_golden_run(tmp_path):
    w = tmp_path / "w.json"
    w.write_text((DATA / "golden_weights.json").read_text())
    assert main(["run", "--stream", str(DATA / "golden_stream.jsonl"), "--topics", str(DATA / "golden_topics.json"),
                 "--weights", str(w), "--K", "4", "--m", "2", "--window-length", "24",
                 "--out", str(tmp_path / "run.tsv")]) == 0
    assert (tmp_path / "run.tsv").read_text() == (DATA / "golden_run.tsv").read_text()


def test_synth_respects_seed_sources(tmp_path, monkeypatch):
    def synth(name, *extra):
        out = tmp_path / name
        assert main(["synth", "--topics", "1", "--days", "2", "--docs-per-day", "20", "--out", str(out), *extra]) == 0
        return (out / "stream.jsonl").read_bytes()

    monkeypatch.setenv("TDIF_SEED", "7")
    from_env = synth("env")
    assert synth("flag", "--seed", "7") == from_env
    assert synth("override", "--seed", "8") != from_env
    cfg = tmp_path / "c.cfg"
    cfg.write_text("seed = 7\n")
    monkeypatch.delenv("TDIF_SEED")
    assert synth("cfg", "--config", str(cfg)) == from_env


def test_config_overrides_flags(dataset, tmp_path):
    w = tmp_path / "w.json"
    w.write_text(json.dumps({"schema_version": 1, "omega_r": [1.0] * 8, "omega_d": [0.0] * 3}))
    cfg = tmp_path / "c.cfg"
    cfg.write_text("K = 3\nstrategy = toprel\nk1 = 1.5\n")
    out = tmp_path / "run.tsv"
    assert main(["run", "--stream", str(dataset / "stream.jsonl"), "--topics", str(dataset / "topics.json"),
                 "--weights", str(w), "--K", "9", "--config", str(cfg), "--out", str(out)]) == 0
    ranks = [int(line.split("\t")[2]) for line in out.read_text().splitlines()[1:]]
    assert max(ranks) == 3


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["run", "--stream", "x"],
    ["run", "--stream", "x", "--topics", "y", "--out", "z", "--strategy", "best"],
    ["bench", "--out", "x", "--strategies", "dp,fastest"],
    ["eval", "--run", "r", "--qrels", "q", "--topics", "t", "--out", "o", "--alpha", "0"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "usage error" in capsys.readouterr().err


def test_unknown_config_key_is_a_usage_error(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["synth", "--out", str(tmp_path / "o"), "--config", str(cfg)]) == 1


def test_data_errors_exit_2(dataset, tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a"\n')
    good = str(DATA / "golden_weights.json")
    w = tmp_path / "w.json"
    w.write_text(json.dumps({"schema_version": 1, "omega_r": [1.0] * 5, "omega_d": [0.0] * 3}))
    t = str(dataset / "topics.json")
    assert main(["run", "--stream", str(bad), "--topics", t, "--weights", good, "--out", str(tmp_path / "r")]) == 2
    assert "line 1" in capsys.readouterr().err
    # weights with the wrong number of features
    assert main(["run", "--stream", str(dataset / "stream.jsonl"), "--topics", t, "--weights", str(w),
                 "--out", str(tmp_path / "r")]) == 2
    assert main(["eval", "--run", str(tmp_path / "missing.tsv"), "--qrels", str(dataset / "qrels.tsv"),
                 "--topics", t, "--out", str(tmp_path / "e.csv")]) == 2


def test_bench_writes_a_table(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--docs-per-window", "100", "--windows", "3", "--K", "5", "--m", "2",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert {r["strategy"] for r in rows} == {"dp", "allbatch", "toprel"}
    means = {r["strategy"]: r for r in rows if r["window_index"] == "mean"}
    assert float(means["dp"]["utility_evals"]) < float(means["allbatch"]["utility_evals"])
