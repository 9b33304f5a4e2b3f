"""Document filtering and whitespace normalization.

No Unicode compatibility normalization (NFKC/NFKD) happens here or anywhere
else in the package: fullwidth digits, compatibility jamo and similar
codepoints pass through untouched.
"""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator

from .ingest import Document
from .structure import convert_structure

RULE_KINDS = ("min_length", "max_length", "symbol_ratio", "blocklist", "duplicate_line_ratio", "custom_predicate")
ACTIONS = ("drop", "flag")

DEFAULT_MIN_LENGTH = 32
DEFAULT_SYMBOL_RATIO = 0.5
DEFAULT_DUPLICATE_LINE_RATIO = 0.3


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class FilterRule:
    name: str
    kind: str
    threshold: float = 0.0
    action: str = "drop"
    terms: tuple[str, ...] = ()
    predicate: Callable[[Document], bool] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        problems = self.problems()
        if problems:
            raise RuleError("; ".join(problems))
        if self.kind == "blocklist":
            object.__setattr__(self, "terms", tuple(t.casefold() for t in self.terms if t.strip()))

    def problems(self) -> list[str]:
        out = []
        if self.kind not in RULE_KINDS:
            out.append(f"rule {self.name!r}: unknown kind {self.kind!r}")
        if self.action not in ACTIONS:
            out.append(f"rule {self.name!r}: unknown action {self.action!r}")
        if self.kind in ("symbol_ratio", "duplicate_line_ratio") and not 0.0 <= self.threshold <= 1.0:
            out.append(f"rule {self.name!r}: ratio threshold {self.threshold} outside [0, 1]")
        if self.kind in ("min_length", "max_length") and self.threshold < 0:
            out.append(f"rule {self.name!r}: length threshold must be >= 0")
        if self.kind == "custom_predicate" and self.predicate is None:
            out.append(f"rule {self.name!r}: custom_predicate needs a predicate")
        return out

    def matches(self, doc: Document) -> bool:
        text = doc.text
        if self.kind == "min_length":
            return len(text) < self.threshold
        if self.kind == "max_length":
            return len(text) > self.threshold
        if self.kind == "symbol_ratio":
            return bool(text) and symbol_ratio(text) > self.threshold
        if self.kind == "blocklist":
            folded = text.casefold()
            return any(term in folded for term in self.terms)
        if self.kind == "duplicate_line_ratio":
            return duplicate_line_ratio(text) > self.threshold
        assert self.predicate is not None
        return bool(self.predicate(doc))


def load_blocklist(path: str | Path) -> tuple[str, ...]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return tuple(ln.strip() for ln in lines if ln.strip() and not ln.startswith("#"))


def default_rules(blocklist: Iterable[str] = ()) -> list[FilterRule]:
    rules = [
        FilterRule("min_length", "min_length", DEFAULT_MIN_LENGTH),
        FilterRule("symbol_ratio", "symbol_ratio", DEFAULT_SYMBOL_RATIO),
        FilterRule("duplicate_line_ratio", "duplicate_line_ratio", DEFAULT_DUPLICATE_LINE_RATIO),
    ]
    terms = tuple(blocklist)
    if terms:
        rules.append(FilterRule("blocklist", "blocklist", terms=terms))
    return rules


def symbol_ratio(text: str) -> float:
    """Share of characters in Unicode punctuation (P*) or symbol (S*) categories."""
    if not text:
        return 0.0
    n = sum(unicodedata.category(c)[0] in "PS" for c in text)
    return n / len(text)


def duplicate_line_ratio(text: str) -> float:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        return 0.0
    return (len(lines) - len(set(lines))) / len(lines)


@dataclass(frozen=True)
class Decision:
    keep: bool
    rule: str | None = None
    flags: tuple[str, ...] = ()


def apply_filters(doc: Document, rules: Iterable[FilterRule]) -> Decision:
    """First matching drop rule wins; flag rules seen before it are recorded."""
    flags: list[str] = []
    for rule in rules:
        if rule.matches(doc):
            if rule.action == "drop":
                return Decision(False, rule.name, tuple(flags))
            flags.append(rule.name)
    return Decision(True, None, tuple(flags))


_TRAILING_SPACES = re.compile(r" +$", re.MULTILINE)
_BLANK_RUN = re.compile(r"\n{3,}")


def normalize_whitespace(text: str) -> str:
    text = _TRAILING_SPACES.sub("", text)
    return _BLANK_RUN.sub("\n\n", text)


@dataclass
class CleanseReport:
    drops: Counter[str] = field(default_factory=Counter)
    flags: Counter[str] = field(default_factory=Counter)
    structure_flags: Counter[str] = field(default_factory=Counter)
    input_docs: int = 0
    output_docs: int = 0
    input_bytes: int = 0
    output_bytes: int = 0

    def merge(self, other: CleanseReport) -> CleanseReport:
        return CleanseReport(
            self.drops + other.drops,
            self.flags + other.flags,
            self.structure_flags + other.structure_flags,
            self.input_docs + other.input_docs,
            self.output_docs + other.output_docs,
            self.input_bytes + other.input_bytes,
            self.output_bytes + other.output_bytes,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_docs": self.input_docs,
            "output_docs": self.output_docs,
            "dropped_docs": self.input_docs - self.output_docs,
            "input_bytes": self.input_bytes,
            "output_bytes": self.output_bytes,
            "drops": dict(sorted(self.drops.items())),
            "flags": dict(sorted(self.flags.items())),
            "structure_flags": dict(sorted(self.structure_flags.items())),
        }


_FORMAT_ALIASES = {"wikitext": "wikitext", "wiki": "wikitext", "html": "html_table", "html_table": "html_table", "plain": "plain"}


def structure_dialect(doc: Document) -> str:
    """Dialect from ``meta.format`` if recognized, else wikitext for wiki sources."""
    fmt = _FORMAT_ALIASES.get(str(doc.meta.get("format", "")).lower())
    if fmt:
        return fmt
    return "wikitext" if doc.source == "wiki" else "plain"


def cleanse_document(doc: Document, rules: list[FilterRule], report: CleanseReport) -> Document | None:
    report.input_docs += 1
    report.input_bytes += doc.num_bytes
    text, sflags = convert_structure(doc.text, structure_dialect(doc))
    report.structure_flags.update(sflags)
    cleaned = Document(doc.id, normalize_whitespace(text), doc.lang, doc.source, dict(doc.meta))
    decision = apply_filters(cleaned, rules)
    report.flags.update(decision.flags)
    if not decision.keep:
        assert decision.rule is not None
        report.drops[decision.rule] += 1
        return None
    if decision.flags:
        cleaned.meta["flags"] = list(decision.flags)
    report.output_docs += 1
    report.output_bytes += cleaned.num_bytes
    return cleaned


def cleanse(docs: Iterable[Document], rules: list[FilterRule], report: CleanseReport | None = None) -> Iterator[Document]:
    """Normalize structure and whitespace, then filter. Survivors keep input order."""
    report = report if report is not None else CleanseReport()
    for doc in docs:
        out = cleanse_document(doc, rules, report)
        if out is not None:
            yield out
