"""Relative tokenizer efficiency across language slices.

Efficiency compares the total token counts two tokenizers produce on the same
text. The default orientation is ``reference / model × 100``: a tokenizer that
needs fewer tokens than the reference scores above 100%. The ``literal``
orientation reports ``model / reference × 100`` instead.
"""

from __future__ import annotations

import csv
import io
import json
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Protocol, Sequence

from .ingest import Document
from .tokenizer import TokenizerModel

SLICES = ("korean", "english", "code", "overall")
LANG_TO_SLICE = {"ko": "korean", "en": "english", "code": "code"}
ORIENTATIONS = ("reference_over_model", "model_over_reference")


class BenchmarkError(RuntimeError):
    pass


class TokenCounter(Protocol):
    name: str
    vocab_size: int | None

    def count(self, text: str) -> int: ...


@dataclass
class ModelCounter:
    """Counts tokens with a :class:`TokenizerModel` (no special tokens)."""

    model: TokenizerModel
    name: str = "model"

    @property
    def vocab_size(self) -> int:
        return self.model.vocab_size

    def count(self, text: str) -> int:
        return self.model.count(text)


class SubprocessCounter:
    """Counts tokens through an external program.

    The program reads one JSON object ``{"text": ...}`` per line on stdin and
    answers each with one line ``{"token_count": n}`` on stdout.
    """

    def __init__(self, command: str | Sequence[str], name: str, vocab_size: int | None = None) -> None:
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.name = name
        self.vocab_size = vocab_size
        self._proc: subprocess.Popen[str] | None = None

    def _process(self) -> subprocess.Popen[str]:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        return self._proc

    def count(self, text: str) -> int:
        proc = self._process()
        assert proc.stdin is not None and proc.stdout is not None
        try:
            proc.stdin.write(json.dumps({"text": text}, ensure_ascii=False) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
            value = json.loads(line)["token_count"]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise BenchmarkError(f"{self.name}: adapter failed ({exc})") from exc
        if not isinstance(value, int) or value < 0:
            raise BenchmarkError(f"{self.name}: adapter returned invalid token_count {value!r}")
        return value

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=10)
            self._proc = None

    def __enter__(self) -> SubprocessCounter:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def count_tokens(counter: TokenCounter, docs: Iterable[Document]) -> dict[str, int]:
    """Exact token totals per slice. Documents tagged ``other`` only enter ``overall``."""
    totals = {s: 0 for s in SLICES}
    for doc in docs:
        try:
            n = counter.count(doc.text)
        except Exception as exc:
            raise BenchmarkError(f"tokenizer {counter.name!r} failed on document {doc.id!r}: {exc}") from exc
        slice_name = LANG_TO_SLICE.get(doc.lang)
        if slice_name:
            totals[slice_name] += n
        totals["overall"] += n
    return totals


def efficiency(model_count: int, reference_count: int, orientation: str = "reference_over_model") -> float:
    """Relative efficiency in percent, unrounded."""
    if orientation == "reference_over_model":
        if model_count <= 0:
            raise BenchmarkError("efficiency undefined: model token count is zero")
        return 100.0 * reference_count / model_count
    if orientation == "model_over_reference":
        if reference_count <= 0:
            raise BenchmarkError("efficiency undefined: reference token count is zero")
        return 100.0 * model_count / reference_count
    raise ValueError(f"unknown orientation {orientation!r}")


@dataclass
class EfficiencyRow:
    tokenizer: str
    slice: str
    token_count_model: int
    token_count_reference: int
    efficiency_pct: float | None


@dataclass
class EfficiencyReport:
    reference: str
    orientation: str = "reference_over_model"
    vocab_sizes: dict[str, int | None] = field(default_factory=dict)
    rows: list[EfficiencyRow] = field(default_factory=list)

    def tokenizers(self) -> list[str]:
        names = [self.reference]
        for row in self.rows:
            if row.tokenizer not in names:
                names.append(row.tokenizer)
        return names

    def slices(self) -> list[str]:
        present = {row.slice for row in self.rows}
        return [s for s in SLICES if s in present]

    def get(self, tokenizer: str, slice_name: str) -> EfficiencyRow:
        for row in self.rows:
            if row.tokenizer == tokenizer and row.slice == slice_name:
                return row
        raise KeyError((tokenizer, slice_name))

    def to_dict(self) -> dict[str, Any]:
        return {
            "reference": self.reference,
            "orientation": self.orientation,
            "vocab_sizes": self.vocab_sizes,
            "rows": [vars(r) for r in self.rows],
        }


def build_report(
    counts: dict[str, dict[str, int]],
    reference: str,
    vocab_sizes: dict[str, int | None] | None = None,
    orientation: str = "reference_over_model",
) -> EfficiencyReport:
    """Assemble a report from per-tokenizer slice counts (see :func:`count_tokens`).

    Slices where both counts are zero are skipped; ``overall`` comes from totals.
    """
    if orientation not in ORIENTATIONS:
        raise ValueError(f"unknown orientation {orientation!r}")
    ref = counts[reference]
    report = EfficiencyReport(reference, orientation, dict(vocab_sizes or {}))
    names = [reference] + [n for n in counts if n != reference]
    for name in names:
        for s in SLICES:
            m, r = counts[name][s], ref[s]
            if m == 0 and r == 0:
                continue
            pct = round(efficiency(m, r, orientation), 1)
            report.rows.append(EfficiencyRow(name, s, m, r, pct))
    return report


def benchmark(
    counters: Sequence[TokenCounter],
    docs: Sequence[Document],
    reference: str | None = None,
    orientation: str = "reference_over_model",
) -> EfficiencyReport:
    if not counters:
        raise ValueError("at least one tokenizer is required")
    reference = reference or counters[0].name
    counts = {c.name: count_tokens(c, docs) for c in counters}
    if reference not in counts:
        raise ValueError(f"reference tokenizer {reference!r} not among {sorted(counts)}")
    return build_report(counts, reference, {c.name: c.vocab_size for c in counters}, orientation)


# ---------------------------------------------------------------------------
# serialization


def _pct(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.1f}%"


def to_markdown(report: EfficiencyReport) -> str:
    names = report.tokenizers()
    lines = [
        f"<!-- efficiency orientation: {report.orientation}; reference: {report.reference} -->",
        "| Tokenizer | " + " | ".join(names) + " |",
        "|---" + "|:---:" * len(names) + "|",
    ]
    sizes = [report.vocab_sizes.get(n) for n in names]
    lines.append("| Vocab. size | " + " | ".join("-" if v is None else f"{v:,}" for v in sizes) + " |")
    for s in report.slices():
        label = "Efficiency" if s == "overall" else f"Efficiency ({s})"
        cells = []
        for n in names:
            try:
                cells.append(_pct(report.get(n, s).efficiency_pct))
            except KeyError:
                cells.append("n/a")
        lines.append(f"| {label} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def to_csv(report: EfficiencyReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tokenizer", "slice", "token_count_model", "token_count_reference", "efficiency_pct", "orientation"])
    for r in report.rows:
        writer.writerow([r.tokenizer, r.slice, r.token_count_model, r.token_count_reference, r.efficiency_pct, report.orientation])
    return buf.getvalue()


def emit_report(report: EfficiencyReport, path: str | Path, fmt: str = "json") -> None:
    if fmt == "json":
        text = json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n"
    elif fmt == "csv":
        text = to_csv(report)
    elif fmt in ("markdown", "md"):
        text = to_markdown(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    Path(path).write_text(text, encoding="utf-8")
