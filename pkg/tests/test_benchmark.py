from __future__ import annotations

import json
import sys
from dataclasses import dataclass

import pytest

from corpusprep.benchmark import (
    BenchmarkError,
    ModelCounter,
    SubprocessCounter,
    benchmark,
    build_report,
    count_tokens,
    efficiency,
    emit_report,
    to_csv,
    to_markdown,
)
from corpusprep.ingest import Document

DOCS = [
    Document("k", "한국어 문장입니다", "ko"),
    Document("e", "an english sentence", "en"),
    Document("c", "x = f(1)", "code"),
    Document("o", "другой", "other"),
]


@dataclass
class Scaled:
    """Counter that emits ``factor`` tokens per whitespace word."""

    name: str
    factor: int = 1
    vocab_size: int | None = 100

    def count(self, text: str) -> int:
        return self.factor * len(text.split())


def test_efficiency_orientations():
    assert efficiency(10, 10) == 100.0
    assert efficiency(20, 10) == 50.0
    assert efficiency(20, 10, "model_over_reference") == 200.0
    with pytest.raises(BenchmarkError):
        efficiency(0, 10)
    with pytest.raises(ValueError):
        efficiency(1, 1, "sideways")


def test_counts_per_slice():
    totals = count_tokens(Scaled("w"), DOCS)
    assert totals == {"korean": 2, "english": 3, "code": 3, "overall": 9}


def test_report_self_and_doubled():
    report = benchmark([Scaled("ref"), Scaled("double", 2)], DOCS)
    assert {r.slice: r.efficiency_pct for r in report.rows if r.tokenizer == "ref"} == {
        "korean": 100.0, "english": 100.0, "code": 100.0, "overall": 100.0,
    }
    assert report.get("double", "overall").efficiency_pct == 50.0
    flipped = benchmark([Scaled("ref"), Scaled("double", 2)], DOCS, orientation="model_over_reference")
    assert flipped.get("double", "korean").efficiency_pct == 200.0


def test_overall_comes_from_totals_not_slice_average():
    counts = {
        "ref": {"korean": 10, "english": 90, "code": 0, "overall": 100},
        "m": {"korean": 20, "english": 90, "code": 0, "overall": 110},
    }
    report = build_report(counts, "ref")
    assert report.get("m", "overall").efficiency_pct == round(100 * 100 / 110, 1)
    assert "code" not in report.slices()


def test_failure_names_document():
    class Broken:
        name, vocab_size = "broken", None

        def count(self, text):
            raise RuntimeError("boom")

    with pytest.raises(BenchmarkError, match="'k'"):
        count_tokens(Broken(), DOCS)


def test_model_counter(small_model):
    report = benchmark([ModelCounter(small_model, "ours")], DOCS)
    assert report.get("ours", "overall").token_count_model == sum(small_model.count(d.text) for d in DOCS)
    assert report.vocab_sizes["ours"] == small_model.vocab_size


ADAPTER = """
import json, sys
for line in sys.stdin:
    text = json.loads(line)["text"]
    print(json.dumps({"token_count": len(text.split()) * 2}), flush=True)
"""


def test_subprocess_counter(tmp_path):
    script = tmp_path / "adapter.py"
    script.write_text(ADAPTER, encoding="utf-8")
    with SubprocessCounter([sys.executable, str(script)], "external") as ext:
        report = benchmark([Scaled("ref"), ext], DOCS)
    assert report.get("external", "overall").efficiency_pct == 50.0


def test_subprocess_counter_bad_output(tmp_path):
    script = tmp_path / "bad.py"
    script.write_text("import sys\nfor _ in sys.stdin: print('nope', flush=True)\n", encoding="utf-8")
    with SubprocessCounter([sys.executable, str(script)], "bad") as ext:
        with pytest.raises(BenchmarkError, match="bad"):
            ext.count("x")


def test_serializations(tmp_path):
    report = benchmark([Scaled("ref", vocab_size=32000), Scaled("double", 2, None)], DOCS)
    md = to_markdown(report)
    assert "| Vocab. size | 32,000 | - |" in md
    assert "| Efficiency | 100.0% | 50.0% |" in md
    assert "| Efficiency (korean) | 100.0% | 50.0% |" in md
    lines = to_csv(report).splitlines()
    assert lines[0] == "tokenizer,slice,token_count_model,token_count_reference,efficiency_pct,orientation"
    assert "double,overall,18,9,50.0,reference_over_model" in lines
    emit_report(report, tmp_path / "r.json", "json")
    data = json.loads((tmp_path / "r.json").read_text(encoding="utf-8"))
    assert data["reference"] == "ref" and len(data["rows"]) == 8
    with pytest.raises(ValueError):
        emit_report(report, tmp_path / "r.x", "xml")


def test_unknown_reference():
    with pytest.raises(ValueError):
        benchmark([Scaled("a")], DOCS, reference="b")
