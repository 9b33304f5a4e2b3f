"""Pipeline configuration: TOML loading, defaults and whole-file validation."""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .balance import DEFAULT_MAX_REPETITION, REFERENCE_TARGETS, MixtureError, MixtureSpec
from .benchmark import ORIENTATIONS
from .cleanse import (
    DEFAULT_DUPLICATE_LINE_RATIO,
    DEFAULT_MIN_LENGTH,
    DEFAULT_SYMBOL_RATIO,
    FilterRule,
    RuleError,
    load_blocklist,
)
from .dedup import DedupConfigError, DedupParams
from .ingest import SOURCES
from .prep import DEFAULT_CONTEXT_LENGTH, EXPORT_FORMATS, PACK_MODES
from .tokenizer.model import DEFAULT_VOCAB_SIZE, FIRST_LEARNED_ID
from .tokenizer.train import DEFAULT_MIN_FREQUENCY

CONFIG_ENV_VAR = "CORPUSPREP_CONFIG"
INPUT_FORMATS = ("jsonl", "text_dir")
REPORT_FORMATS = ("json", "csv", "markdown")


class ConfigError(ValueError):
    """Carries every violation found, not only the first."""

    def __init__(self, errors: list[str]) -> None:
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class InputSpec:
    path: Path
    format: str = "jsonl"
    source: str = "web"
    fields: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class TokenizerSettings:
    vocab_size: int = DEFAULT_VOCAB_SIZE
    min_frequency: int = DEFAULT_MIN_FREQUENCY


@dataclass(frozen=True)
class BenchmarkTarget:
    name: str
    model: Path | None = None
    command: str | None = None
    vocab_size: int | None = None


@dataclass(frozen=True)
class BenchmarkSettings:
    tokenizers: tuple[BenchmarkTarget, ...] = ()
    orientation: str = "reference_over_model"
    formats: tuple[str, ...] = REPORT_FORMATS
    reference_name: str = "trained"


@dataclass(frozen=True)
class PrepSettings:
    context_length: int = DEFAULT_CONTEXT_LENGTH
    mode: str = "drop_last"
    format: str = "binary-u32-le"
    warmup_steps: int = 10_000
    peak_lr: float = 3e-4
    final_lr: float = 3e-5
    total_steps: int | None = None


@dataclass(frozen=True)
class PipelineConfig:
    inputs: tuple[InputSpec, ...]
    rules: tuple[FilterRule, ...]
    dedup: DedupParams
    mixture: MixtureSpec
    tokenizer: TokenizerSettings
    benchmark: BenchmarkSettings
    prep: PrepSettings
    seed: int = 0
    output_dir: Path = Path("out")
    threads: int = 1
    base_dir: Path = Path(".")

    def rel(self, p: Path) -> str:
        try:
            return os.path.relpath(p, self.base_dir).replace(os.sep, "/")
        except ValueError:
            return str(p)

    def to_dict(self) -> dict[str, Any]:
        """Canonical, path-relative form; hashed into run manifests."""
        return {
            "seed": self.seed,
            "inputs": [
                {"path": self.rel(i.path), "format": i.format, "source": i.source, "fields": dict(sorted(i.fields.items()))}
                for i in self.inputs
            ],
            "cleanse": [
                {"name": r.name, "kind": r.kind, "threshold": r.threshold, "action": r.action, "terms": list(r.terms)}
                for r in self.rules
            ],
            "dedup": {k: getattr(self.dedup, k) for k in ("ngram", "num_perm", "bands", "rows", "threshold", "per_language")},
            "mixture": {
                "targets": dict(sorted(self.mixture.targets.items())),
                "unit": self.mixture.unit,
                "total_budget": self.mixture.total_budget,
                "max_repetition": self.mixture.max_repetition,
            },
            "tokenizer": vars(self.tokenizer).copy(),
            "benchmark": {
                "orientation": self.benchmark.orientation,
                "formats": list(self.benchmark.formats),
                "reference_name": self.benchmark.reference_name,
                "tokenizers": [
                    {
                        "name": t.name,
                        "model": None if t.model is None else self.rel(t.model),
                        "command": t.command,
                        "vocab_size": t.vocab_size,
                    }
                    for t in self.benchmark.tokenizers
                ],
            },
            "prep": vars(self.prep).copy(),
        }

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


def stage_seed(global_seed: int, stage: str) -> int:
    """Per-stage seed: global seed plus the first 4 bytes of sha256(stage), mod 2**32."""
    offset = int.from_bytes(hashlib.sha256(stage.encode("utf-8")).digest()[:4], "big")
    return (global_seed + offset) % (1 << 32)


# ---------------------------------------------------------------------------
# validation


class _Reader:
    """Typed access into a TOML table that records problems instead of raising."""

    def __init__(self, table: dict[str, Any], prefix: str, errors: list[str]) -> None:
        self.table = table
        self.prefix = prefix
        self.errors = errors
        self.used: set[str] = set()

    def _name(self, key: str) -> str:
        return f"{self.prefix}.{key}" if self.prefix else key

    def get(self, key: str, default: Any, types: type | tuple[type, ...]) -> Any:
        self.used.add(key)
        if key not in self.table:
            return default
        value = self.table[key]
        if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
            self.errors.append(f"{self._name(key)}: expected {_type_names(types)}, got bool")
            return default
        if not isinstance(value, types):
            self.errors.append(f"{self._name(key)}: expected {_type_names(types)}, got {type(value).__name__}")
            return default
        return value

    def sub(self, key: str) -> _Reader:
        value = self.get(key, {}, dict)
        return _Reader(value, self._name(key), self.errors)

    def check_unknown(self) -> None:
        for key in sorted(set(self.table) - self.used):
            self.errors.append(f"{self._name(key)}: unknown key")


def _type_names(types: type | tuple[type, ...]) -> str:
    types = types if isinstance(types, tuple) else (types,)
    return " or ".join(t.__name__ for t in types)


def _number(r: _Reader, key: str, default: float) -> float:
    return float(r.get(key, default, (int, float)))


def _parse_rules(r: _Reader, base: Path, errors: list[str]) -> tuple[FilterRule, ...]:
    blocklist_terms = list(r.get("blocklist_terms", [], list))
    blocklist_path = r.get("blocklist", None, str)
    if blocklist_path is not None:
        p = (base / blocklist_path).resolve()
        if not p.is_file():
            errors.append(f"cleanse.blocklist: file not found: {blocklist_path}")
        else:
            blocklist_terms.extend(load_blocklist(p))
    explicit = r.get("rules", None, list)
    rules: list[FilterRule] = []
    if explicit is None:
        min_length = _number(r, "min_length", DEFAULT_MIN_LENGTH)
        max_length = r.get("max_length", None, (int, float))
        symbol = _number(r, "symbol_ratio", DEFAULT_SYMBOL_RATIO)
        dup = _number(r, "duplicate_line_ratio", DEFAULT_DUPLICATE_LINE_RATIO)
        specs = [("min_length", "min_length", min_length)]
        if max_length is not None:
            specs.append(("max_length", "max_length", float(max_length)))
        specs += [("symbol_ratio", "symbol_ratio", symbol), ("duplicate_line_ratio", "duplicate_line_ratio", dup)]
        for name, kind, threshold in specs:
            try:
                rules.append(FilterRule(name, kind, threshold))
            except RuleError as exc:
                errors.append(f"cleanse.{name}: {exc}")
        if blocklist_terms:
            rules.append(FilterRule("blocklist", "blocklist", terms=tuple(blocklist_terms)))
        return tuple(rules)
    for i, spec in enumerate(explicit):
        if not isinstance(spec, dict):
            errors.append(f"cleanse.rules[{i}]: expected a table")
            continue
        rr = _Reader(spec, f"cleanse.rules[{i}]", errors)
        name = rr.get("name", f"rule{i}", str)
        kind = rr.get("kind", "", str)
        threshold = _number(rr, "threshold", 0.0)
        action = rr.get("action", "drop", str)
        terms = list(rr.get("terms", [], list))
        rr.check_unknown()
        if kind == "blocklist":
            terms += blocklist_terms
        if kind == "custom_predicate":
            errors.append(f"cleanse.rules[{i}]: custom_predicate rules can only be supplied from Python")
            continue
        try:
            rules.append(FilterRule(name, kind, threshold, action, tuple(terms)))
        except RuleError as exc:
            errors.append(f"cleanse.rules[{i}]: {exc}")
    return tuple(rules)


def parse_config(data: dict[str, Any], base_dir: Path, output_dir: Path | None = None) -> PipelineConfig:
    errors: list[str] = []
    root = _Reader(data, "", errors)
    base_dir = base_dir.resolve()

    seed = root.get("seed", 0, int)
    threads = root.get("threads", 1, int)
    if threads < 1:
        errors.append("threads: must be >= 1")
    out_raw = root.get("output_dir", "out", str)
    out = output_dir if output_dir is not None else base_dir / out_raw

    # inputs
    inputs: list[InputSpec] = []
    raw_inputs = root.get("inputs", [], list)
    if not raw_inputs:
        errors.append("inputs: at least one input source is required")
    for i, spec in enumerate(raw_inputs):
        if not isinstance(spec, dict):
            errors.append(f"inputs[{i}]: expected a table")
            continue
        r = _Reader(spec, f"inputs[{i}]", errors)
        path_raw = r.get("path", None, str)
        fmt = r.get("format", "jsonl", str)
        source = r.get("source", "web", str)
        fields = r.get("fields", {}, dict)
        r.check_unknown()
        if path_raw is None:
            errors.append(f"inputs[{i}].path: required")
            continue
        path = (base_dir / path_raw).resolve()
        if fmt not in INPUT_FORMATS:
            errors.append(f"inputs[{i}].format: must be one of {INPUT_FORMATS}")
        if source not in SOURCES:
            errors.append(f"inputs[{i}].source: must be one of {SOURCES}")
        if not path.exists():
            errors.append(f"inputs[{i}].path: not found: {path_raw}")
        elif fmt == "jsonl" and not path.is_file():
            errors.append(f"inputs[{i}].path: not a file: {path_raw}")
        elif fmt == "text_dir" and not path.is_dir():
            errors.append(f"inputs[{i}].path: not a directory: {path_raw}")
        inputs.append(InputSpec(path, fmt, source, {str(k): str(v) for k, v in fields.items()}))

    # cleanse
    cr = root.sub("cleanse")
    rules = _parse_rules(cr, base_dir, errors)
    cr.check_unknown()

    # dedup
    dr = root.sub("dedup")
    dedup_kwargs = dict(
        ngram=dr.get("ngram", 5, int),
        num_perm=dr.get("num_perm", 128, int),
        bands=dr.get("bands", 16, int),
        rows=dr.get("rows", 8, int),
        threshold=_number(dr, "threshold", 0.8),
        per_language=dr.get("per_language", True, bool),
    )
    dr.check_unknown()
    dedup = None
    try:
        dedup = DedupParams(**dedup_kwargs)
    except DedupConfigError as exc:
        errors.append(f"dedup: {exc}")

    # mixture
    mr = root.sub("mixture")
    targets_raw = mr.get("targets", dict(REFERENCE_TARGETS), dict)
    targets: dict[str, float] = {}
    for lang, p in targets_raw.items():
        if lang not in ("ko", "en", "code", "other"):
            errors.append(f"mixture.targets.{lang}: unknown language")
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            errors.append(f"mixture.targets.{lang}: expected a number")
            continue
        targets[lang] = float(p)
    budget = mr.get("total_budget", None, (int, float))
    mix_kwargs = dict(
        targets=targets,
        unit=mr.get("unit", "bytes", str),
        total_budget=None if budget is None else float(budget),
        max_repetition=_number(mr, "max_repetition", DEFAULT_MAX_REPETITION),
    )
    mr.check_unknown()
    mixture = None
    try:
        mixture = MixtureSpec(**mix_kwargs)
    except MixtureError as exc:
        errors.append(f"mixture: {exc}")
    if mix_kwargs["unit"] == "tokens":
        errors.append("mixture.unit: 'tokens' is unavailable in the pipeline (balancing precedes tokenizer training)")

    # tokenizer
    tr = root.sub("tokenizer")
    tok = TokenizerSettings(tr.get("vocab_size", DEFAULT_VOCAB_SIZE, int), tr.get("min_frequency", DEFAULT_MIN_FREQUENCY, int))
    tr.check_unknown()
    if tok.vocab_size <= FIRST_LEARNED_ID:
        errors.append(f"tokenizer.vocab_size: must exceed {FIRST_LEARNED_ID} (specials + byte tokens)")
    if tok.min_frequency < 1:
        errors.append("tokenizer.min_frequency: must be >= 1")

    # benchmark
    br = root.sub("benchmark")
    orientation = br.get("orientation", "reference_over_model", str)
    if orientation not in ORIENTATIONS:
        errors.append(f"benchmark.orientation: must be one of {ORIENTATIONS}")
    formats = tuple(br.get("formats", list(REPORT_FORMATS), list))
    for f in formats:
        if f not in REPORT_FORMATS:
            errors.append(f"benchmark.formats: unknown format {f!r}")
    reference_name = br.get("reference_name", "trained", str)
    targets_list = []
    seen_names = {reference_name}
    for i, spec in enumerate(br.get("tokenizers", [], list)):
        if not isinstance(spec, dict):
            errors.append(f"benchmark.tokenizers[{i}]: expected a table")
            continue
        r = _Reader(spec, f"benchmark.tokenizers[{i}]", errors)
        name = r.get("name", None, str)
        model = r.get("model", None, str)
        command = r.get("command", None, str)
        vocab = r.get("vocab_size", None, int)
        r.check_unknown()
        if not name:
            errors.append(f"benchmark.tokenizers[{i}].name: required")
            continue
        if name in seen_names:
            errors.append(f"benchmark.tokenizers[{i}].name: duplicate name {name!r}")
        seen_names.add(name)
        if (model is None) == (command is None):
            errors.append(f"benchmark.tokenizers[{i}]: exactly one of model or command is required")
            continue
        model_path = None
        if model is not None:
            model_path = (base_dir / model).resolve()
            if not model_path.is_file():
                errors.append(f"benchmark.tokenizers[{i}].model: not found: {model}")
        targets_list.append(BenchmarkTarget(name, model_path, command, vocab))
    br.check_unknown()
    bench = BenchmarkSettings(tuple(targets_list), orientation, formats, reference_name)

    # prep
    pr = root.sub("prep")
    total_steps = pr.get("total_steps", None, int)
    prep = PrepSettings(
        context_length=pr.get("context_length", DEFAULT_CONTEXT_LENGTH, int),
        mode=pr.get("mode", "drop_last", str),
        format=pr.get("format", "binary-u32-le", str),
        warmup_steps=pr.get("warmup_steps", 10_000, int),
        peak_lr=_number(pr, "peak_lr", 3e-4),
        final_lr=_number(pr, "final_lr", 3e-5),
        total_steps=total_steps,
    )
    pr.check_unknown()
    if prep.context_length < 2:
        errors.append("prep.context_length: must be >= 2")
    if prep.mode not in PACK_MODES:
        errors.append(f"prep.mode: must be one of {PACK_MODES}")
    if prep.format not in EXPORT_FORMATS:
        errors.append(f"prep.format: must be one of {EXPORT_FORMATS}")
    if not 0 < prep.final_lr <= prep.peak_lr:
        errors.append("prep: need 0 < final_lr <= peak_lr")
    if prep.warmup_steps < 0:
        errors.append("prep.warmup_steps: must be >= 0")
    if total_steps is not None and not prep.warmup_steps < total_steps:
        errors.append("prep.total_steps: must exceed warmup_steps")

    root.check_unknown()
    if errors:
        raise ConfigError(errors)
    return PipelineConfig(
        inputs=tuple(inputs),
        rules=rules,
        dedup=dedup,
        mixture=mixture,
        tokenizer=tok,
        benchmark=bench,
        prep=prep,
        seed=seed,
        output_dir=out.resolve() if not out.is_absolute() else out,
        threads=threads,
        base_dir=base_dir,
    )


def validate_config(path: str | Path, output_dir: str | Path | None = None) -> PipelineConfig:
    """Load and fully validate a pipeline file; raises :class:`ConfigError` listing all problems."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read ({exc.strerror or exc})"]) from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: parse error: {exc}"]) from exc
    out = None if output_dir is None else Path(output_dir).resolve()
    return parse_config(data, path.parent, out)
