from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from corpusprep.cleanse import (
    CleanseReport,
    FilterRule,
    RuleError,
    apply_filters,
    cleanse,
    default_rules,
    duplicate_line_ratio,
    load_blocklist,
    normalize_whitespace,
    structure_dialect,
    symbol_ratio,
)
from corpusprep.ingest import Document

LONG = "This sentence is comfortably longer than the minimum length threshold."


def doc(text: str, **kw) -> Document:
    return Document(kw.pop("id", "d"), text, **kw)


def test_normalize_whitespace_examples():
    assert normalize_whitespace("a\n\n\n\nb") == "a\n\nb"
    assert normalize_whitespace("a   \nb \t \n") == "a\nb \t\n"
    assert normalize_whitespace("x \n \n \n \ny") == "x\n\ny"


@given(st.text(alphabet=st.sampled_from(list("ab \n\t\r　")), max_size=60))
def test_normalize_whitespace_is_idempotent(text):
    once = normalize_whitespace(text)
    assert normalize_whitespace(once) == once


def test_symbol_ratio_counts_unicode_punctuation_and_symbols():
    assert symbol_ratio("") == 0.0
    assert symbol_ratio("ab!!") == 0.5
    assert symbol_ratio("「」") == 1.0
    assert symbol_ratio("가나") == 0.0


def test_duplicate_line_ratio():
    assert duplicate_line_ratio("a\nb\na\na\n\n") == pytest.approx(0.5)
    assert duplicate_line_ratio("") == 0.0


def test_rule_validation():
    with pytest.raises(RuleError):
        FilterRule("x", "nonsense")
    with pytest.raises(RuleError):
        FilterRule("x", "symbol_ratio", 1.5)
    with pytest.raises(RuleError):
        FilterRule("x", "min_length", 10, action="delete")
    with pytest.raises(RuleError):
        FilterRule("x", "custom_predicate")


def test_default_rules_drop_short_and_symbol_heavy():
    rules = default_rules()
    assert apply_filters(doc("short"), rules).rule == "min_length"
    assert apply_filters(doc("#$%^&*()!@" * 5), rules).rule == "symbol_ratio"
    assert apply_filters(doc("\n".join(["same line here"] * 5)), rules).rule == "duplicate_line_ratio"
    assert apply_filters(doc(LONG), rules).keep


def test_first_drop_wins_and_flags_accumulate():
    rules = [
        FilterRule("long_flag", "min_length", 1000, action="flag"),
        FilterRule("bad_word", "blocklist", terms=("Spam",)),
        FilterRule("short", "min_length", 1000),
    ]
    d = apply_filters(doc("buy SPAM now " + LONG), rules)
    assert (d.keep, d.rule, d.flags) == (False, "bad_word", ("long_flag",))


def test_custom_predicate_and_blocklist_file(tmp_path):
    path = tmp_path / "block.txt"
    path.write_text("# comment\nfoo\n\n Bar \n", encoding="utf-8")
    assert load_blocklist(path) == ("foo", "Bar")
    rule = FilterRule("no_x", "custom_predicate", predicate=lambda d: "x" in d.text)
    assert apply_filters(doc("xyz"), [rule]).rule == "no_x"


def test_cleanse_converts_structure_normalizes_and_reports():
    docs = [
        doc("== Head ==\n* item one that is long enough\n\n\n\n" + LONG, id="w", source="wiki"),
        doc("tiny", id="t"),
        doc("<p>" + LONG + "</p>", id="h", meta={"format": "html"}),
        doc(LONG + "   \n\n\n\nend", id="p"),
    ]
    report = CleanseReport()
    out = list(cleanse(docs, default_rules(), report))
    assert [d.id for d in out] == ["w", "h", "p"]
    assert out[0].text.startswith("## Head\n- item one")
    assert "\n\n\n" not in out[0].text
    assert out[1].text == LONG
    assert out[2].text == LONG + "\n\nend"
    r = report.to_dict()
    assert (r["input_docs"], r["output_docs"], r["drops"]) == (4, 3, {"min_length": 1})


def test_structure_dialect_selection():
    assert structure_dialect(doc("x", source="wiki")) == "wikitext"
    assert structure_dialect(doc("x", meta={"format": "HTML"})) == "html_table"
    assert structure_dialect(doc("x")) == "plain"


def test_no_compatibility_normalization():
    text = "전각 숫자 １２３ and ligature ﬁ and jamo ㄱ stay as they are."
    (out,) = cleanse([doc(text)], default_rules())
    assert out.text == text


def test_report_merge():
    a, b = CleanseReport(input_docs=2, output_docs=1), CleanseReport(input_docs=3, output_docs=3)
    a.drops["x"] += 1
    merged = a.merge(b)
    assert (merged.input_docs, merged.output_docs, merged.drops["x"]) == (5, 4, 1)
