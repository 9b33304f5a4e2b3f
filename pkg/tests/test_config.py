from __future__ import annotations

import pytest

from corpusprep.config import ConfigError, parse_config, stage_seed, validate_config


def _write(tmp_path, text: str):
    (tmp_path / "corpus.jsonl").write_text('{"text": "hello"}\n', encoding="utf-8")
    path = tmp_path / "pipeline.toml"
    path.write_text(text, encoding="utf-8")
    return path


MINIMAL = """
[[inputs]]
path = "corpus.jsonl"
"""


def test_defaults_fill_in(tmp_path):
    cfg = validate_config(_write(tmp_path, MINIMAL))
    assert cfg.seed == 0 and cfg.threads == 1
    assert cfg.output_dir == tmp_path / "out"
    assert (cfg.dedup.num_perm, cfg.dedup.bands, cfg.dedup.rows, cfg.dedup.threshold) == (128, 16, 8, 0.8)
    assert dict(cfg.mixture.targets) == {"ko": 0.35, "en": 0.28, "code": 0.37}
    assert cfg.tokenizer.vocab_size == 32_000
    assert (cfg.prep.context_length, cfg.prep.warmup_steps, cfg.prep.peak_lr, cfg.prep.final_lr) == (8192, 10_000, 3e-4, 3e-5)
    assert [r.name for r in cfg.rules] == ["min_length", "symbol_ratio", "duplicate_line_ratio"]
    assert cfg.benchmark.orientation == "reference_over_model"


def test_all_problems_reported_at_once(tmp_path):
    text = MINIMAL + """
threads = 0
surprise = 1

[dedup]
bands = 10

[mixture]
targets = { ko = 0.5, en = 0.6 }

[tokenizer]
vocab_size = 100

[prep]
mode = "truncate"
peak_lr = "high"

[[inputs]]
path = "missing.jsonl"
source = "forum"
"""
    with pytest.raises(ConfigError) as info:
        validate_config(_write(tmp_path, text))
    errors = info.value.errors
    joined = "\n".join(errors)
    for needle in (
        "threads", "surprise: unknown key", "b×r ≠ k", "sum to", "tokenizer.vocab_size",
        "prep.mode", "prep.peak_lr", "inputs[1].path: not found", "inputs[1].source",
    ):
        assert needle in joined, needle
    assert len(errors) >= 9
    assert str(info.value).count("\n") == len(errors) - 1


def test_tokens_unit_rejected_in_pipeline(tmp_path):
    with pytest.raises(ConfigError, match="tokens"):
        validate_config(_write(tmp_path, MINIMAL + '\n[mixture]\nunit = "tokens"\n'))


def test_explicit_rules_and_blocklist(tmp_path):
    (tmp_path / "block.txt").write_text("spam\n", encoding="utf-8")
    text = MINIMAL + """
[cleanse]
blocklist = "block.txt"

[[cleanse.rules]]
name = "short"
kind = "min_length"
threshold = 10

[[cleanse.rules]]
name = "bad"
kind = "blocklist"
terms = ["eggs"]
action = "flag"
"""
    cfg = validate_config(_write(tmp_path, text))
    assert [(r.name, r.kind, r.action) for r in cfg.rules] == [("short", "min_length", "drop"), ("bad", "blocklist", "flag")]
    assert cfg.rules[1].terms == ("eggs", "spam")


def test_parse_errors_and_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        validate_config(tmp_path / "nope.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[[inputs]\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="parse error"):
        validate_config(bad)


def test_benchmark_tokenizers(tmp_path):
    text = MINIMAL + """
[[benchmark.tokenizers]]
name = "trained"
command = "x"

[[benchmark.tokenizers]]
name = "other"
"""
    with pytest.raises(ConfigError) as info:
        validate_config(_write(tmp_path, text))
    joined = "\n".join(info.value.errors)
    assert "duplicate name" in joined and "exactly one of model or command" in joined


def test_digest_is_path_independent(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    ca = validate_config(_write(a, MINIMAL))
    cb = validate_config(_write(b, MINIMAL))
    assert ca.digest() == cb.digest()
    assert validate_config(_write(a, "seed = 1\n" + MINIMAL)).digest() != ca.digest()


def test_stage_seed():
    assert stage_seed(0, "dedup") == stage_seed(0, "dedup")
    assert stage_seed(0, "dedup") != stage_seed(0, "balance")
    assert stage_seed(1, "dedup") == (stage_seed(0, "dedup") + 1) % 2**32
    assert 0 <= stage_seed(2**40, "x") < 2**32


def test_output_dir_override(tmp_path):
    cfg = parse_config({"inputs": [{"path": "corpus.jsonl"}]}, _write(tmp_path, MINIMAL).parent, tmp_path / "elsewhere")
    assert cfg.output_dir == tmp_path / "elsewhere"
