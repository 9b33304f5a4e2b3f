"""Corpus ingestion: canonical documents, language tagging and mixture statistics."""

from __future__ import annotations

import hashlib
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Mapping, Protocol

logger = logging.getLogger(__name__)

LANGS = ("ko", "en", "code", "other")
SOURCES = ("web", "wiki", "news", "book", "patent", "translation", "code")
COUNT_UNITS = ("bytes", "documents", "tokens")

# Fields written to the canonical JSONL interchange format, in order.
CANONICAL_FIELDS = ("id", "text", "lang", "source", "meta")


@dataclass
class Document:
    id: str
    text: str
    lang: str = "other"
    source: str = "web"
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")
        if self.lang not in LANGS:
            raise ValueError(f"unknown lang {self.lang!r}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")

    @property
    def num_bytes(self) -> int:
        return len(self.text.encode("utf-8"))

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "text": self.text, "lang": self.lang, "source": self.source, "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> Document:
        return cls(
            id=str(obj["id"]),
            text=obj["text"],
            lang=obj.get("lang", "other"),
            source=obj.get("source", "web"),
            meta=dict(obj.get("meta") or {}),
        )


# ---------------------------------------------------------------------------
# language detection

_HANGUL_RANGES = ((0xAC00, 0xD7A3), (0x1100, 0x11FF))

_CODE_KEYWORDS = frozenset(
    """
    def return import from class function var let const elif lambda yield async await
    public private protected static void int float double char bool boolean struct enum
    interface impl fn pub mut use namespace template typename include define ifdef endif
    println printf cout std nullptr null None True False self this new delete try catch
    except finally throw throws raise switch case break continue while for if else do
    package extends implements func go chan select defer println!
    SELECT FROM WHERE INSERT INTO UPDATE SET DELETE CREATE TABLE JOIN
    """.split()
)
# Keywords that are unlikely in prose; their presence alone is strong evidence.
_STRONG_KEYWORDS = frozenset(
    "def elif lambda const let var function fn impl pub mut nullptr println printf cout std "
    "namespace typename ifdef endif struct func "
    "SELECT INSERT UPDATE DELETE WHERE JOIN CREATE TABLE".split()
)
_CODE_SYMBOLS = frozenset("{}[]();=<>+-*/&|:#._\"'!%^~\\,$@`")
_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_!]*")
_CODE_LINE_RE = re.compile(r"(^\s*(#include|#define|import |from \S+ import|package |using |//|/\*))|([;{}]\s*$)")


def _is_hangul(cp: int) -> bool:
    return any(lo <= cp <= hi for lo, hi in _HANGUL_RANGES)


def code_score(text: str) -> float:
    """Heuristic evidence in [0, 1] that ``text`` is source code."""
    chars = [c for c in text if not c.isspace()]
    if not chars:
        return 0.0
    symbol_density = sum(c in _CODE_SYMBOLS for c in chars) / len(chars)
    words = _WORD_RE.findall(text)
    keywords = sum(w in _CODE_KEYWORDS for w in words)
    strong = sum(w in _STRONG_KEYWORDS for w in words)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    code_lines = sum(bool(_CODE_LINE_RE.search(ln)) for ln in lines) / max(len(lines), 1)
    snake_or_call = len(re.findall(r"\w+\(|\w+_\w+|\w+\.\w+\(|==|!=|->|=>|:=|\+=", text))

    score = 0.0
    score += min(symbol_density / 0.25, 1.0) * 0.4
    score += min(strong, 2) * 0.2
    score += min(keywords / max(len(words), 1) / 0.15, 1.0) * 0.15
    score += code_lines * 0.25
    score += min(snake_or_call, 3) * 0.07
    return min(score, 1.0)


class LanguageDetector(Protocol):
    def __call__(self, text: str) -> tuple[str, float]: ...


@dataclass(frozen=True)
class ScriptRatioDetector:
    """Deterministic detector based on script ratios and a code heuristic.

    Hangul ratio (over letter codepoints) at or above ``hangul_ratio`` means
    Korean; otherwise the code heuristic is consulted, then Latin letters.
    Confidence is 1.0 when the winning signal reaches ``dominance``.
    """

    hangul_ratio: float = 0.3
    code_threshold: float = 0.5
    latin_ratio: float = 0.5
    dominance: float = 0.9

    def __call__(self, text: str) -> tuple[str, float]:
        letters = [c for c in text if c.isalpha()]
        if not text.strip():
            return "other", 0.0
        if letters:
            hangul = sum(_is_hangul(ord(c)) for c in letters) / len(letters)
            if hangul >= self.hangul_ratio:
                return "ko", self._confidence(hangul)
        cs = code_score(text)
        if cs >= self.code_threshold:
            return "code", self._confidence(cs)
        if not letters:
            return "other", 0.0
        latin = sum(c.isascii() for c in letters) / len(letters)
        if latin >= self.latin_ratio:
            return "en", self._confidence(latin)
        return "other", self._confidence(1.0 - latin)

    def _confidence(self, ratio: float) -> float:
        return 1.0 if ratio >= self.dominance else round(ratio, 6)


_default_detector = ScriptRatioDetector()


def detect_language(text: str, detector: LanguageDetector | None = None) -> tuple[str, float]:
    """Return ``(lang, confidence)`` for ``text``; never raises."""
    return (detector or _default_detector)(text)


# ---------------------------------------------------------------------------
# readers


def content_id(text: str, origin: str, offset: int) -> str:
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
    origin_tag = hashlib.sha256(origin.encode("utf-8")).hexdigest()[:6]
    return f"{digest}-{origin_tag}-{offset}"


class IdRegistry:
    """Guarantees id uniqueness within one ingestion run."""

    def __init__(self) -> None:
        self._seen: Counter[str] = Counter()

    def claim(self, doc_id: str) -> str:
        n = self._seen[doc_id]
        self._seen[doc_id] += 1
        if n == 0:
            return doc_id
        unique = f"{doc_id}#{n}"
        while unique in self._seen:
            n += 1
            unique = f"{doc_id}#{n}"
        self._seen[unique] += 1
        logger.warning("duplicate document id %r renamed to %r", doc_id, unique)
        return unique


class JsonlReader:
    """Iterate a JSONL file as :class:`Document` objects.

    Malformed or non-UTF-8 lines are skipped and counted in ``skipped``; their
    diagnostics accumulate in ``diagnostics``. ``fields`` maps canonical field
    names (id, text, lang, source, meta) to the names used in the file.
    """

    def __init__(
        self,
        path: str | Path,
        fields: Mapping[str, str] | None = None,
        *,
        default_source: str = "web",
        detector: LanguageDetector | None = None,
        registry: IdRegistry | None = None,
        origin: str | None = None,
    ) -> None:
        self.path = Path(path)
        self.origin = origin if origin is not None else str(self.path)
        self.fields = {name: name for name in CANONICAL_FIELDS}
        self.fields.update(fields or {})
        self.default_source = default_source
        self.detector = detector
        self.registry = registry or IdRegistry()
        self.skipped = 0
        self.diagnostics: list[str] = []

    def _skip(self, lineno: int, why: str) -> None:
        self.skipped += 1
        msg = f"{self.path}:{lineno}: {why}"
        self.diagnostics.append(msg)
        logger.warning("skipping line: %s", msg)

    def __iter__(self) -> Iterator[Document]:
        f = self.fields
        with self.path.open("rb") as fh:
            for lineno, raw in enumerate(fh, start=1):
                try:
                    line = raw.decode("utf-8")
                except UnicodeDecodeError as exc:
                    self._skip(lineno, f"invalid UTF-8 ({exc.reason})")
                    continue
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    self._skip(lineno, f"malformed JSON ({exc.msg})")
                    continue
                if not isinstance(obj, dict) or not isinstance(obj.get(f["text"]), str):
                    self._skip(lineno, "missing text field")
                    continue
                try:
                    yield self._to_document(obj, lineno)
                except (ValueError, TypeError) as exc:
                    self._skip(lineno, str(exc))

    def _to_document(self, obj: dict[str, Any], lineno: int) -> Document:
        f = self.fields
        text = obj[f["text"]]
        lang = obj.get(f["lang"]) or detect_language(text, self.detector)[0]
        source = obj.get(f["source"]) or ("code" if lang == "code" else self.default_source)
        meta = dict(obj.get(f["meta"]) or {})
        meta.setdefault("origin", self.origin)
        meta.setdefault("record", lineno - 1)
        doc_id = obj.get(f["id"])
        doc_id = str(doc_id) if doc_id not in (None, "") else content_id(text, self.origin, lineno - 1)
        return Document(self.registry.claim(doc_id), text, lang, source, meta)


def read_jsonl(path: str | Path, fields: Mapping[str, str] | None = None, **kwargs: Any) -> JsonlReader:
    return JsonlReader(path, fields, **kwargs)


def read_text_dir(
    path: str | Path,
    *,
    pattern: str = "*",
    default_source: str = "web",
    detector: LanguageDetector | None = None,
    registry: IdRegistry | None = None,
    origin: str | None = None,
) -> Iterator[Document]:
    """One document per file, in sorted path order. Undecodable files are skipped.

    ``meta.origin`` is the file path relative to ``origin`` (default: ``path``).
    """
    root = Path(path)
    registry = registry or IdRegistry()
    for i, file in enumerate(sorted(p for p in root.rglob(pattern) if p.is_file())):
        try:
            text = file.read_text(encoding="utf-8")
        except UnicodeDecodeError:
            logger.warning("skipping %s: invalid UTF-8", file)
            continue
        lang = detect_language(text, detector)[0]
        source = "code" if lang == "code" else default_source
        rel = file.relative_to(root).as_posix()
        meta = {"origin": f"{origin if origin is not None else root}/{rel}", "record": i}
        yield Document(registry.claim(content_id(text, rel, 0)), text, lang, source, meta)


def read_documents(path: str | Path) -> Iterator[Document]:
    """Read a canonical JSONL file written by :func:`write_documents`."""
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield Document.from_dict(json.loads(line))


def write_documents(docs: Iterable[Document], path: str | Path) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(doc.to_json())
            fh.write("\n")
            n += 1
    return n


# ---------------------------------------------------------------------------
# statistics


@dataclass
class CorpusStats:
    """Per-language and per-source counts. Merging is associative and commutative."""

    docs: Counter[str] = field(default_factory=Counter)
    bytes: Counter[str] = field(default_factory=Counter)
    tokens: Counter[str] = field(default_factory=Counter)
    sources: Counter[str] = field(default_factory=Counter)
    has_tokens: bool = False

    def add(self, doc: Document, num_tokens: int | None = None) -> None:
        self.docs[doc.lang] += 1
        self.bytes[doc.lang] += doc.num_bytes
        self.sources[doc.source] += 1
        if num_tokens is not None:
            self.tokens[doc.lang] += num_tokens
            self.has_tokens = True

    def merge(self, other: CorpusStats) -> CorpusStats:
        return CorpusStats(
            self.docs + other.docs,
            self.bytes + other.bytes,
            self.tokens + other.tokens,
            self.sources + other.sources,
            self.has_tokens or other.has_tokens,
        )

    def counts(self, unit: str) -> dict[str, int]:
        if unit == "documents":
            table = self.docs
        elif unit == "bytes":
            table = self.bytes
        elif unit == "tokens":
            if not self.has_tokens:
                raise ValueError("token counts were not collected; pass a tokenizer")
            table = self.tokens
        else:
            raise ValueError(f"unknown counting unit {unit!r}")
        return {lang: table[lang] for lang in LANGS if table[lang]}

    def total(self, unit: str) -> int:
        return sum(self.counts(unit).values())

    @property
    def empty(self) -> bool:
        return sum(self.docs.values()) == 0

    def proportions(self, unit: str) -> dict[str, float] | None:
        """Per-language shares of the total, or ``None`` for an empty corpus."""
        counts = self.counts(unit)
        total = sum(counts.values())
        if total == 0:
            return None
        return {lang: n / total for lang, n in counts.items()}

    def source_proportions(self) -> dict[str, float] | None:
        total = sum(self.sources.values())
        if total == 0:
            return None
        return {s: self.sources[s] / total for s in SOURCES if self.sources[s]}

    def to_report(self) -> dict[str, Any]:
        units = ["documents", "bytes"] + (["tokens"] if self.has_tokens else [])
        report: dict[str, Any] = {"empty": self.empty, "units": {}}
        for unit in units:
            props = self.proportions(unit)
            report["units"][unit] = {
                "counts": self.counts(unit),
                "total": self.total(unit),
                "proportions": None if props is None else {k: round(v, 6) for k, v in props.items()},
            }
        src = self.source_proportions()
        report["sources"] = {
            "counts": {s: self.sources[s] for s in SOURCES if self.sources[s]},
            "proportions": None if src is None else {k: round(v, 6) for k, v in src.items()},
        }
        return report


def corpus_stats(
    docs: Iterable[Document],
    unit: str = "bytes",
    count_tokens: Callable[[str], int] | None = None,
) -> CorpusStats:
    """Aggregate counts over ``docs``.

    ``unit`` is validated here; ``tokens`` requires ``count_tokens``. Document and
    byte counts are always collected so one pass can report every unit.
    """
    if unit not in COUNT_UNITS:
        raise ValueError(f"unknown counting unit {unit!r}")
    if unit == "tokens" and count_tokens is None:
        raise ValueError("unit='tokens' requires a tokenizer")
    stats = CorpusStats()
    for doc in docs:
        stats.add(doc, count_tokens(doc.text) if count_tokens else None)
    return stats
