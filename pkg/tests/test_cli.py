"""Command-line interface: subcommands, config plumbing, manifests and
error-to-exit-code mapping. Everything runs in process through cli.main."""

import json
import os

import pytest

from depgraph_rec.cli import main
from depgraph_rec.config import RunConfig, load_config_file, make_config
from depgraph_rec.errors import ConfigError

FIXTURE = os.path.join(os.path.dirname(__file__), "..", "fixtures", "cipher.mir")

FAST = ["--api-min-freq", "0", "--const-min-freq", "0", "--embed-dim", "8",
        "--hidden", "12", "--layers", "1", "--batch", "32", "--epochs", "1",
        "--seed", "7"]


# --- config handling ---------------------------------------------------------

def test_config_file_and_flag_precedence(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("hidden = 64  # comment\nlr=0.01\n\n")
    assert load_config_file(cfg_file) == {"hidden": 64, "lr": 0.01}
    cfg = make_config(cfg_file, {"lr": 0.5, "epochs": None})
    assert cfg.hidden == 64       # from file
    assert cfg.lr == 0.5          # flag wins over file
    assert cfg.epochs == RunConfig().epochs  # None means "not given"


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("not a pair\n")
    with pytest.raises(ConfigError):
        load_config_file(bad)
    bad.write_text("unknown_key=3\n")
    with pytest.raises(ConfigError):
        load_config_file(bad)
    bad.write_text("hidden=abc\n")
    with pytest.raises(ConfigError):
        load_config_file(bad)


def test_help_shows_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for expected in ("default: 300", "default: 1024", "default: 0.001",
                     "default: 0.5", "default: 256", "default: hybrid",
                     "default: 10"):
        assert expected in out


def test_version_flag(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    assert capsys.readouterr().out.strip()


# --- exit codes --------------------------------------------------------------

def test_validation_error_exits_1(tmp_path, capsys):
    out = tmp_path / "c.tsv"
    rc = main(["gen-synthetic", "--kind", "low_freq_variant",
               "--alpha", "3.0", "--out", str(out)])
    assert rc == 1
    assert "error:validation:" in capsys.readouterr().err


def test_runtime_error_exits_2(tmp_path, capsys):
    rc = main(["build-graph", "--slices", str(tmp_path / "missing.slices"),
               "--out", str(tmp_path / "g.adg")])
    assert rc == 2
    assert "error:runtime:" in capsys.readouterr().err


# --- manifests ---------------------------------------------------------------

def test_manifest_records_config_and_hashes(tmp_path):
    out = tmp_path / "corpus.tsv"
    assert main(["gen-synthetic", "--kind", "low_freq_variant", "--seed", "3",
                 "--out", str(out)]) == 0
    manifest = json.loads((tmp_path / "corpus.tsv.manifest.json").read_text())
    assert manifest["command"] == "gen-synthetic"
    assert manifest["seed"] == 3
    assert manifest["config"]["seed"] == 3
    assert manifest["tool_version"]
    assert "input_hashes" in manifest


def test_gen_synthetic_deterministic(tmp_path):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    for out in (a, b):
        assert main(["gen-synthetic", "--kind", "similar_api", "--seed", "5",
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


# --- pipeline smoke ----------------------------------------------------------

def test_front_end_pipeline(tmp_path):
    slices = tmp_path / "c.slices"
    graphs = tmp_path / "c.adg"
    allp = tmp_path / "all.tsv"
    sel = tmp_path / "sel.tsv"
    assert main(["slice", "--program", FIXTURE, "--prefixes", "Cipher.",
                 "--out", str(slices),
                 "--corpus-out", str(tmp_path / "sl.tsv")]) == 0
    assert main(["build-graph", "--slices", str(slices), "--out", str(graphs),
                 "--dot-dir", str(tmp_path / "dot")]) == 0
    assert main(["extract-paths", "--graphs", str(graphs),
                 "--out", str(allp)]) == 0
    assert main(["select-paths", "--graphs", str(graphs),
                 "--out", str(sel)]) == 0
    assert slices.read_text().count("slice main") == 3
    assert graphs.read_text().count("graph ") == 3
    assert allp.read_text().strip() and sel.read_text().strip()
    assert list((tmp_path / "dot").glob("*.dot"))


def test_byte_mode_corpus(tmp_path):
    out = tmp_path / "bytes.tsv"
    assert main(["slice", "--program", FIXTURE, "--corpus-mode", "byte",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines and all(l.split("\t")[0] == "bytecode" for l in lines)


def test_learning_pipeline(tmp_path, capsys):
    corpus = tmp_path / "corpus.tsv"
    vocab = tmp_path / "vocab.tsv"
    emb = tmp_path / "emb.vec"
    ckpt = tmp_path / "model.ckpt"
    multi = tmp_path / "multi.ckpt"
    report = tmp_path / "report"
    assert main(["gen-synthetic", "--kind", "similar_api", "--seed", "7",
                 "--out", str(corpus)]) == 0
    assert main(["train-embed", *FAST, "--window", "2", "--negatives", "3",
                 "--corpus", str(corpus), "--vocab", str(vocab),
                 "--out", str(emb)]) == 0
    assert vocab.exists() and emb.exists() and (tmp_path / "emb.vec.loss.png").exists()
    assert main(["train", *FAST, "--loss-mode", "hybrid",
                 "--corpus", str(corpus), "--vocab", str(vocab),
                 "--emb", str(emb), "--out", str(ckpt)]) == 0
    assert ckpt.exists() and (tmp_path / "model.ckpt.loss.png").exists()
    assert main(["train-multi", *FAST, "--corpus", str(corpus),
                 "--vocab", str(vocab), "--init", str(ckpt),
                 "--out", str(multi)]) == 0
    assert main(["eval", *FAST, "--multi", "--name", "smoke",
                 "--model", str(multi), "--corpus", str(corpus),
                 "--vocab", str(vocab), "--out", str(report)]) == 0
    out = capsys.readouterr().out
    assert "smoke" in out and "Acc(A)" in out
    for suffix in (".txt", ".jsonl", ".png", ".jsonl.manifest.json"):
        assert (tmp_path / ("report" + suffix)).exists(), suffix
    capsys.readouterr()
    assert main(["recommend", "--model", str(ckpt), "--vocab", str(vocab),
                 "--tokens", "Wrap.w0() Wrap.w1()", "-k", "3"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 3


def test_oracle_check(capsys):
    assert main(["oracle-check", "--count", "50", "--max-nodes", "8"]) == 0
    assert "0 failures" in capsys.readouterr().out


def test_threads_env_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("DEPGRAPH_REC_THREADS", "1")
    out = tmp_path / "c.slices"
    assert main(["slice", "--program", FIXTURE, "--threads", "8",
                 "--out", str(out)]) == 0
    manifest = json.loads((tmp_path / "c.slices.manifest.json").read_text())
    assert manifest["config"]["threads"] == 1
