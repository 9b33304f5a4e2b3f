"""End-to-end run: ingest → cleanse → dedup → balance → train-tokenizer → benchmark → pack.

Each stage reads its inputs from the previous stages' files under the output
directory, so any stage can be re-run on its own once its inputs exist. The
run manifest records the config digest, per-stage seeds and sha256 checksums
of every stage input and output; it contains no timestamps, so identical
config and seed give a byte-identical manifest.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from .balance import balance
from .benchmark import ModelCounter, SubprocessCounter, TokenCounter, benchmark, emit_report
from .cleanse import CleanseReport, cleanse
from .config import PipelineConfig, stage_seed
from .dedup import deduplicate, write_audit_log
from .ingest import IdRegistry, JsonlReader, corpus_stats, read_documents, read_text_dir, write_documents
from .prep import Packer, ScheduleConfig, export_packed, schedule_csv
from .tokenizer import TokenizerModel, train_bpe

logger = logging.getLogger(__name__)

STAGES = ("ingest", "cleanse", "dedup", "balance", "train-tokenizer", "benchmark", "pack")
MANIFEST_NAME = "manifest.json"

_DIRS = {name: f"{i + 1:02d}_{name.replace('-', '_')}" for i, name in enumerate(STAGES)}


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str) -> None:
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {message}")


class PreconditionError(StageError):
    pass


def stage_dir(cfg: PipelineConfig, stage: str) -> Path:
    return cfg.output_dir / _DIRS[stage]


def artifact(cfg: PipelineConfig, stage: str, name: str) -> Path:
    return stage_dir(cfg, stage) / name


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _require(stage: str, *paths: Path) -> None:
    for p in paths:
        if not p.exists():
            raise PreconditionError(stage, f"missing required artifact {p} (run the producing stage first)")


def _encode_chunk(args: tuple[TokenizerModel, list[str]]) -> list[list[int]]:
    model, texts = args
    return [model.encode(t) for t in texts]


def encode_all(model: TokenizerModel, texts: Sequence[str], threads: int = 1) -> list[list[int]]:
    """Encode in input order, optionally across worker processes."""
    if threads <= 1 or len(texts) < 256:
        return [model.encode(t) for t in texts]
    size = max(64, len(texts) // (threads * 4))
    chunks = [(model, list(texts[i : i + size])) for i in range(0, len(texts), size)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return [ids for chunk in pool.map(_encode_chunk, chunks) for ids in chunk]


# ---------------------------------------------------------------------------
# stages; each returns (inputs, outputs) as lists of paths


def _stage_ingest(cfg: PipelineConfig) -> tuple[list[Path], list[Path], dict[str, Any]]:
    out_dir = stage_dir(cfg, "ingest")
    registry = IdRegistry()
    skipped: dict[str, int] = {}

    def docs():
        for spec in cfg.inputs:
            if spec.format == "jsonl":
                reader = JsonlReader(
                    spec.path, spec.fields, default_source=spec.source, registry=registry, origin=cfg.rel(spec.path)
                )
                yield from reader
                skipped[cfg.rel(spec.path)] = reader.skipped
            else:
                yield from read_text_dir(spec.path, default_source=spec.source, registry=registry, origin=cfg.rel(spec.path))

    docs_path = out_dir / "docs.jsonl"
    stats = corpus_stats(_tee_write(docs(), docs_path), unit="bytes")
    report = {"stats": stats.to_report(), "skipped_lines": skipped}
    _write_json(out_dir / "stats.json", report)
    inputs = []
    for spec in cfg.inputs:
        if spec.path.is_dir():
            inputs.extend(sorted(p for p in spec.path.rglob("*") if p.is_file()))
        else:
            inputs.append(spec.path)
    return inputs, [docs_path, out_dir / "stats.json"], {"documents": sum(stats.docs.values())}


def _tee_write(docs: Iterable, path: Path):
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(doc.to_json() + "\n")
            yield doc


def _stage_cleanse(cfg: PipelineConfig) -> tuple[list[Path], list[Path], dict[str, Any]]:
    src = artifact(cfg, "ingest", "docs.jsonl")
    _require("cleanse", src)
    report = CleanseReport()
    dst = artifact(cfg, "cleanse", "docs.jsonl")
    write_documents(cleanse(read_documents(src), list(cfg.rules), report), dst)
    _write_json(artifact(cfg, "cleanse", "report.json"), report.to_dict())
    return [src], [dst, artifact(cfg, "cleanse", "report.json")], {"documents": report.output_docs}


def _stage_dedup(cfg: PipelineConfig) -> tuple[list[Path], list[Path], dict[str, Any]]:
    src = artifact(cfg, "cleanse", "docs.jsonl")
    _require("dedup", src)
    params = replace(cfg.dedup, seed=stage_seed(cfg.seed, "dedup"))
    docs = list(read_documents(src))
    survivors, decisions = deduplicate(docs, params)
    dst = artifact(cfg, "dedup", "docs.jsonl")
    write_documents(survivors, dst)
    audit = artifact(cfg, "dedup", "audit.jsonl")
    write_audit_log(decisions, audit)
    exact = sum(1 for d in decisions for x in d.dropped if x.reason == "exact")
    near = sum(1 for d in decisions for x in d.dropped if x.reason == "near")
    report = {"input_docs": len(docs), "output_docs": len(survivors), "exact_dropped": exact, "near_dropped": near}
    _write_json(artifact(cfg, "dedup", "report.json"), report)
    return [src], [dst, audit, artifact(cfg, "dedup", "report.json")], {"documents": len(survivors)}


def _stage_balance(cfg: PipelineConfig) -> tuple[list[Path], list[Path], dict[str, Any]]:
    src = artifact(cfg, "dedup", "docs.jsonl")
    _require("balance", src)
    spec = replace(cfg.mixture, seed=stage_seed(cfg.seed, "balance"))
    sampled, report = balance(list(read_documents(src)), spec)
    dst = artifact(cfg, "balance", "docs.jsonl")
    write_documents(sampled, dst)
    _write_json(artifact(cfg, "balance", "mixture.json"), report)
    return [src], [dst, artifact(cfg, "balance", "mixture.json")], {"documents": len(sampled)}


def _stage_train(cfg: PipelineConfig) -> tuple[list[Path], list[Path], dict[str, Any]]:
    src = artifact(cfg, "balance", "docs.jsonl")
    _require("train-tokenizer", src)
    model = train_bpe(read_documents(src), cfg.tokenizer.vocab_size, cfg.tokenizer.min_frequency)
    dst = artifact(cfg, "train-tokenizer", "tokenizer.json")
    model.save(dst)
    return [src], [dst], {"vocab_size": model.vocab_size}


def _stage_benchmark(cfg: PipelineConfig) -> tuple[list[Path], list[Path], dict[str, Any]]:
    corpus = artifact(cfg, "dedup", "docs.jsonl")
    model_path = artifact(cfg, "train-tokenizer", "tokenizer.json")
    _require("benchmark", corpus, model_path)
    b = cfg.benchmark
    counters: list[TokenCounter] = [ModelCounter(TokenizerModel.load(model_path), b.reference_name)]
    inputs = [corpus, model_path]
    closers: list[Callable[[], None]] = []
    for t in b.tokenizers:
        if t.model is not None:
            counters.append(ModelCounter(TokenizerModel.load(t.model), t.name))
            inputs.append(t.model)
        else:
            assert t.command is not None
            sc = SubprocessCounter(t.command, t.name, t.vocab_size)
            counters.append(sc)
            closers.append(sc.close)
    try:
        report = benchmark(counters, list(read_documents(corpus)), b.reference_name, b.orientation)
    finally:
        for close in closers:
            close()
    outputs = []
    suffix = {"json": "json", "csv": "csv", "markdown": "md"}
    for fmt in b.formats:
        path = artifact(cfg, "benchmark", f"efficiency.{suffix[fmt]}")
        emit_report(report, path, fmt)
        outputs.append(path)
    return inputs, outputs, {"tokenizers": len(counters)}


def _stage_pack(cfg: PipelineConfig) -> tuple[list[Path], list[Path], dict[str, Any]]:
    corpus = artifact(cfg, "balance", "docs.jsonl")
    model_path = artifact(cfg, "train-tokenizer", "tokenizer.json")
    _require("pack", corpus, model_path)
    model = TokenizerModel.load(model_path)
    p = cfg.prep
    texts = [d.text for d in read_documents(corpus)]
    encoded = [ids for ids in encode_all(model, texts, cfg.threads) if ids]
    packer = Packer(p.context_length, model.eos_id, p.mode, model.pad_id)
    suffix = "bin" if p.format == "binary-u32-le" else "jsonl"
    dst = artifact(cfg, "pack", f"packed.{suffix}")
    manifest = export_packed(
        packer.pack(encoded), dst, p.format,
        context_length=p.context_length, eos_id=model.eos_id, pad_id=model.pad_id,
        stats=packer.stats, extra={"mode": p.mode},
    )
    schedule = {
        "warmup_steps": p.warmup_steps,
        "peak_lr": p.peak_lr,
        "final_lr": p.final_lr,
        "total_steps": p.total_steps,
        "warmup": "linear from 0",
        "decay": "cosine",
    }
    outputs = [dst, dst.with_name(dst.name + ".manifest.json"), artifact(cfg, "pack", "schedule.json")]
    _write_json(artifact(cfg, "pack", "schedule.json"), schedule)
    if p.total_steps is not None:
        sched_cfg = ScheduleConfig(p.total_steps, p.warmup_steps, p.peak_lr, p.final_lr)
        every = max(1, p.total_steps // 1000)
        artifact(cfg, "pack", "schedule.csv").write_text(schedule_csv(sched_cfg, every), encoding="utf-8")
        outputs.append(artifact(cfg, "pack", "schedule.csv"))
    return [corpus, model_path], outputs, {"sequences": manifest["num_sequences"]}


_RUNNERS = {
    "ingest": _stage_ingest,
    "cleanse": _stage_cleanse,
    "dedup": _stage_dedup,
    "balance": _stage_balance,
    "train-tokenizer": _stage_train,
    "benchmark": _stage_benchmark,
    "pack": _stage_pack,
}


def _relpath(cfg: PipelineConfig, p: Path) -> str:
    try:
        return p.resolve().relative_to(cfg.output_dir.resolve()).as_posix()
    except ValueError:
        return cfg.rel(p)


def load_manifest(cfg: PipelineConfig) -> dict[str, Any] | None:
    path = cfg.output_dir / MANIFEST_NAME
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def run_pipeline(cfg: PipelineConfig, stages: Iterable[str] | None = None) -> dict[str, Any]:
    """Run ``stages`` (default: all) in pipeline order and return the run manifest.

    A failing stage raises :class:`StageError`; outputs and manifest entries of
    stages that already completed stay on disk.
    """
    wanted = set(STAGES if stages is None else stages)
    unknown = wanted - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stages: {sorted(unknown)}")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    digest = cfg.digest()
    manifest = load_manifest(cfg)
    if manifest is None or manifest.get("config_sha256") != digest:
        manifest = {"config_sha256": digest, "seed": cfg.seed, "stages": {}}
    for stage in STAGES:
        if stage not in wanted:
            continue
        stage_dir(cfg, stage).mkdir(parents=True, exist_ok=True)
        logger.info("running stage %s", stage)
        try:
            inputs, outputs, summary = _RUNNERS[stage](cfg)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc
        manifest["stages"][stage] = {
            "seed": stage_seed(cfg.seed, stage),
            "inputs": {_relpath(cfg, p): sha256_file(p) for p in inputs},
            "outputs": {_relpath(cfg, p): sha256_file(p) for p in outputs},
            "summary": summary,
        }
        manifest["stages"] = {s: manifest["stages"][s] for s in STAGES if s in manifest["stages"]}
        _write_json(cfg.output_dir / MANIFEST_NAME, manifest)
    return manifest
