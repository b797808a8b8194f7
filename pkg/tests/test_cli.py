import json

import pytest

from bisync.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from bisync.config import ConfigError, resolve
from bisync.formats import read_jsonl, read_parallel, read_triplets


def test_resolve_precedence():
    run = resolve({"seed": 3, "model": {"epochs": 5, "lr": 0.01}}, {"model": {"epochs": 7, "lr": None}})
    assert run.seed == 3
    assert run.section("model").epochs == 7 and run.section("model").lr == 0.01
    assert run.section("model").seed == 3 and run.section("synth").seed == 3
    assert resolve({}, {"seed": 5, "levt": {"seed": None}}).section("levt").seed == 5
    assert resolve({"levt": {"seed": 9}}, {"seed": 5}).section("levt").seed == 9
    assert resolve().section("tm").theta == 0.6


@pytest.mark.parametrize(
    "data",
    [{"bogus": 1}, {"model": {"nope": 1}}, {"seed": "x"}, {"tm": {"theta": 2.0}}, {"tokenizer": "moses"}, {"eval": []}],
)
def test_resolve_rejects_bad_files(data):
    with pytest.raises(ConfigError):
        resolve(data)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("BISYNC_THREADS", raising=False)
    return tmp_path


def test_full_pipeline(workdir, capsys):
    assert run(capsys, "toygen", "--out", "toy/train", "--n", 120)[0] == EXIT_OK
    assert run(capsys, "toygen", "--out", "toy/test", "--n", 10, "--corpus-seed", 7)[0] == EXIT_OK
    assert len(read_parallel("toy/train.src", "toy/train.tgt")) == 120

    code, out, _ = run(capsys, "synth", "--in", "toy/train", "--out", "trip.tsv")
    assert code == EXIT_OK and json.loads(out)["triplets"] == 240
    assert run(capsys, "synth", "--in", "toy/test", "--out", "test.tsv", "--method", "ins")[0] == EXIT_OK
    # same seed, same bytes
    assert run(capsys, "--threads", 2, "synth", "--in", "toy/train", "--out", "trip2.tsv")[0] == EXIT_OK
    assert (workdir / "trip.tsv").read_bytes() == (workdir / "trip2.tsv").read_bytes()

    assert run(capsys, "tm", "build", "--in", "toy/train", "--out", "tm.json")[0] == EXIT_OK
    assert run(capsys, "tm", "query", "--index", "tm.json", "--in", "toy/test.src", "--out", "q.jsonl", "--theta", 0.2)[0] == 0
    recs = read_jsonl("q.jsonl")
    assert len(recs) == 10 and all(m["score"] > 0.2 for r in recs for m in r["matches"])

    small = ["--epochs", 1, "--embed-dim", 16, "--layers", 1]
    assert run(capsys, "train", "--arch", "ar", "--in", "trip.tsv", "--out", "ar.npz", *small)[0] == EXIT_OK
    assert run(capsys, "train", "--arch", "levt", "--in", "trip.tsv", "--out", "levt.npz", *small)[0] == EXIT_OK
    code, out, _ = run(capsys, "train", "--arch", "ar", "--in", "test.tsv", "--out", "ft.npz", "--init", "ar.npz", "--preset", "tm")
    assert code == EXIT_OK

    assert run(capsys, "sync", "--model", "ar.npz", "--in", "test.tsv", "--out", "h.jsonl", "--mode", "forced")[0] == 0
    hyps = read_jsonl("h.jsonl")
    assert len(hyps) == len(read_triplets("test.tsv")) and all(h["tags"] == "100" for h in hyps)
    assert run(capsys, "sync", "--model", "ar.npz", "--in", "test.tsv", "--out", "c.jsonl", "--mode", "classify")[0] == 0
    assert run(capsys, "sync", "--arch", "levt", "--model", "levt.npz", "--in", "test.tsv", "--out", "l.jsonl")[0] == 0

    code, out, _ = run(capsys, "eval", "--hyp", "h.jsonl", "--triplets", "test.tsv")
    assert code == EXIT_OK and out.split("\n")[0].split()[:2] == ["All", "0"]
    assert run(capsys, "eval", "--hyp", "h.jsonl", "--triplets", "test.tsv", "--out", "r.json", "--strata", "opclass")[0] == 0
    report = json.loads((workdir / "r.json").read_text())
    assert report["metric"] == "bleu" and report["strata"] == "opclass"

    code, out, _ = run(capsys, "clean", "--policy", "filter", "--model", "ar.npz", "--in", "toy/test", "--out", "clean/test")
    assert code == EXIT_OK
    kept = read_parallel("clean/test.src", "clean/test.tgt")
    assert len(kept) == json.loads(out)["n_parallel"]
    assert json.loads((workdir / "clean/test.report.json").read_text())["n_total"] == 10


def test_config_file_and_logging(workdir, capsys):
    (workdir / "cfg.json").write_text(json.dumps({"seed": 4, "toy": {"vocab_size": 20}}))
    code, _, err = run(capsys, "--config", "cfg.json", "--log-level", "INFO", "toygen", "--out", "a", "--n", 5)
    assert code == EXIT_OK
    assert '"seed": 4' in err and '"vocab_size": 20' in err
    words = {w for s, _ in read_parallel("a.src", "a.tgt") for w in s}
    assert all(int(w[1:]) < 20 for w in words)


@pytest.mark.parametrize(
    "argv",
    [[], ["bogus"], ["toygen"], ["--threads", "0", "toygen", "--out", "x"], ["tm"], ["train", "--arch", "rnn", "--in", "a", "--out", "b"]],
)
def test_usage_errors(workdir, capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_USAGE
    assert json.loads(err.strip().splitlines()[-1])["error"] == "usage"


def test_threads_from_environment(workdir, capsys, monkeypatch):
    monkeypatch.setenv("BISYNC_THREADS", "two")
    assert run(capsys, "toygen", "--out", "x", "--n", 2)[0] == EXIT_USAGE
    monkeypatch.setenv("BISYNC_THREADS", "2")
    assert run(capsys, "toygen", "--out", "x", "--n", 2)[0] == EXIT_OK


def test_data_errors(workdir, capsys):
    assert run(capsys, "synth", "--in", "missing", "--out", "x.tsv")[0] == EXIT_DATA
    (workdir / "bad.src").write_text("a b\n")
    (workdir / "bad.tgt").write_text("A\nB\n")
    code, _, err = run(capsys, "tm", "build", "--in", "bad", "--out", "tm.json")
    assert code == EXIT_DATA and "lines" in json.loads(err)["message"]
    (workdir / "cfg.json").write_text("{not json")
    assert run(capsys, "--config", "cfg.json", "toygen", "--out", "x")[0] == EXIT_DATA
    (workdir / "t.tsv").write_text("no header\n")
    assert run(capsys, "eval", "--hyp", "t.tsv", "--triplets", "t.tsv")[0] == EXIT_DATA
    (workdir / "m.npz").write_bytes(b"junk")
    assert run(capsys, "sync", "--model", "m.npz", "--in", "t.tsv", "--out", "o")[0] == EXIT_DATA
