from __future__ import annotations

import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

from corpus_fixtures import make_records, write_records
from oracles import reference_lr
from corpusprep.cli import cli
from corpusprep.ingest import read_documents
from corpusprep.prep import load_packed
from corpusprep.tokenizer import TokenizerModel


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def corpus(tmp_path):
    return write_records(make_records(150, seed=9), tmp_path / "corpus.jsonl")


def invoke(runner, *args, **kw):
    return runner.invoke(cli, [str(a) for a in args], catch_exceptions=False, **kw)


def test_stage_commands_chain(runner, tmp_path, corpus):
    clean, dedup, bal, tok = (tmp_path / n for n in ("clean.jsonl", "dedup.jsonl", "bal.jsonl", "tok.json"))
    r = invoke(runner, "stats", corpus)
    assert r.exit_code == 0 and json.loads(r.stdout)["units"]["documents"]["total"] == 153
    assert invoke(runner, "cleanse", corpus, clean, "--report", tmp_path / "rep.json").exit_code == 0
    assert json.loads((tmp_path / "rep.json").read_text())["drops"]["min_length"] > 0
    assert invoke(runner, "dedup", clean, dedup, "--audit", tmp_path / "audit.jsonl").exit_code == 0
    assert len(list(read_documents(dedup))) < len(list(read_documents(clean)))
    r = invoke(runner, "balance", dedup, bal, "--target", "ko=0.5", "--target", "en=0.25", "--target", "code=0.25")
    assert r.exit_code == 0
    assert invoke(runner, "train-tokenizer", bal, tok, "--vocab-size", 500).exit_code == 0
    model = TokenizerModel.load(tok)
    assert model.vocab_size <= 500

    r = invoke(runner, "encode", tok, "안녕 hello 2024")
    ids = json.loads(r.stdout)
    assert model.decode(ids) == "안녕 hello 2024"
    r = invoke(runner, "decode", tok, *ids)
    assert r.stdout == "안녕 hello 2024\n"
    r = invoke(runner, "encode", tok, input="one\ntwo\n")
    lines = r.stdout.splitlines()
    assert len(lines) == 2
    r = invoke(runner, "decode", tok, input="\n".join(lines) + "\n")
    assert r.stdout == "one\ntwo\n"
    r = invoke(runner, "vocab", tok, "--limit", 4)
    assert r.stdout.splitlines()[0] == '0\t"<s>"' and len(r.stdout.splitlines()) == 4

    r = invoke(runner, "benchmark", dedup, "--reference", tok, "--model", f"copy={tok}", "--format", "csv")
    assert "copy,overall" in r.stdout and ",100.0," in r.stdout
    r = invoke(runner, "pack", bal, tok, tmp_path / "p.bin", "--context-length", 64, "--mode", "pad_last")
    assert r.exit_code == 0
    seqs, manifest = load_packed(tmp_path / "p.bin")
    assert manifest["mode"] == "pad_last" and all(len(s.ids) == 64 for s in seqs)


def test_run_and_validate_with_env_config(runner, tmp_path, corpus):
    cfg = tmp_path / "pipeline.toml"
    cfg.write_text('[[inputs]]\npath = "corpus.jsonl"\n[tokenizer]\nvocab_size = 400\n[prep]\ncontext_length = 64\n', encoding="utf-8")
    r = invoke(runner, "validate", env={"CORPUSPREP_CONFIG": str(cfg)})
    assert r.exit_code == 0 and json.loads(r.stdout)["tokenizer"]["vocab_size"] == 400
    r = invoke(runner, "--config", cfg, "--seed", 5, "--output-dir", tmp_path / "o", "run", "--stages", "ingest,cleanse")
    assert r.exit_code == 0
    manifest = json.loads(r.stdout)
    assert manifest["seed"] == 5 and list(manifest["stages"]) == ["ingest", "cleanse"]
    assert (tmp_path / "o" / "manifest.json").exists()


def test_exit_codes(runner, tmp_path, corpus):
    bad = tmp_path / "bad.toml"
    bad.write_text("threads = 0\n", encoding="utf-8")
    r = runner.invoke(cli, ["validate", str(bad)])
    assert r.exit_code == 1 and "threads" in r.stderr and "inputs" in r.stderr
    assert runner.invoke(cli, ["no-such-command"]).exit_code == 1
    assert runner.invoke(cli, ["run"]).exit_code == 1
    r = runner.invoke(cli, ["balance", str(corpus), str(tmp_path / "x"), "--target", "ko=0.9"])
    assert r.exit_code == 1
    good = tmp_path / "good.toml"
    good.write_text('[[inputs]]\npath = "corpus.jsonl"\n', encoding="utf-8")
    r = runner.invoke(cli, ["--config", str(good), "run", "--stages", "dedup"])
    assert r.exit_code == 2 and "missing required artifact" in r.stderr


def test_schedule(runner):
    r = invoke(runner, "schedule", "--total-steps", 100_000, "--every", 55_000)
    assert r.stdout.splitlines() == ["step,lr", "0,0.0", "55000,0.000165", "100000,3e-05"]
    r = invoke(runner, "schedule", "--total-steps", 1000, "--warmup", 100, "--every", 7)
    for line in r.stdout.splitlines()[1:]:
        step, lr = line.split(",")
        assert float(lr) == pytest.approx(reference_lr(int(step), 1000, 100), rel=1e-12, abs=1e-18)
    assert runner.invoke(cli, ["schedule"]).exit_code == 1


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "corpusprep.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "version" in out.stdout
