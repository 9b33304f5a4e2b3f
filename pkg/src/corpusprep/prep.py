"""Sequence packing for pretraining and the warmup + cosine learning-rate schedule."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

DEFAULT_CONTEXT_LENGTH = 8192
PACK_MODES = ("drop_last", "pad_last")
EXPORT_FORMATS = ("binary-u32-le", "jsonl")


class PackError(ValueError):
    pass


class ChecksumError(PackError):
    pass


@dataclass
class PackedSequence:
    ids: np.ndarray
    doc_boundaries: list[int]
    padding_len: int = 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PackedSequence):
            return NotImplemented
        return (
            np.array_equal(self.ids, other.ids)
            and self.doc_boundaries == other.doc_boundaries
            and self.padding_len == other.padding_len
        )


@dataclass
class PackStats:
    documents: int = 0
    document_tokens: int = 0
    emitted_tokens: int = 0
    dropped_tokens: int = 0
    padding_tokens: int = 0
    sequences: int = 0


class Packer:
    """Concatenate documents with an EOS after each, then cut fixed-length windows.

    Documents may straddle windows. In ``drop_last`` mode an incomplete final
    window is discarded and counted in ``stats.dropped_tokens``; in ``pad_last``
    mode it is right-padded with ``pad_id``.
    """

    def __init__(
        self,
        context_length: int = DEFAULT_CONTEXT_LENGTH,
        eos_id: int = 1,
        mode: str = "drop_last",
        pad_id: int = 2,
        bos_id: int | None = None,
    ) -> None:
        if context_length < 2:
            raise PackError("context_length must be >= 2")
        if mode not in PACK_MODES:
            raise PackError(f"unknown pack mode {mode!r}")
        self.context_length = context_length
        self.eos_id = eos_id
        self.pad_id = pad_id
        self.bos_id = bos_id
        self.mode = mode
        self.stats = PackStats()

    def pack(self, docs: Iterable[Sequence[int]]) -> Iterator[PackedSequence]:
        L = self.context_length
        buf = np.empty(L, dtype=np.int64)
        fill = 0
        boundaries: list[int] = []
        for doc in docs:
            if len(doc) == 0:
                raise PackError("documents must contain at least one token")
            self.stats.documents += 1
            self.stats.document_tokens += len(doc)
            head = [self.bos_id] if self.bos_id is not None else []
            stream = np.asarray(head + list(doc) + [self.eos_id], dtype=np.int64)
            eos_at = len(stream) - 1
            pos = 0
            while pos < len(stream):
                take = min(L - fill, len(stream) - pos)
                buf[fill : fill + take] = stream[pos : pos + take]
                if pos <= eos_at < pos + take:
                    boundaries.append(fill + eos_at - pos)
                fill += take
                pos += take
                if fill == L:
                    yield self._emit(buf, boundaries, 0)
                    fill = 0
                    boundaries = []
        if fill:
            if self.mode == "pad_last":
                buf[fill:] = self.pad_id
                yield self._emit(buf, boundaries, L - fill)
            else:
                self.stats.dropped_tokens += fill

    def _emit(self, buf: np.ndarray, boundaries: list[int], padding: int) -> PackedSequence:
        self.stats.sequences += 1
        self.stats.emitted_tokens += len(buf) - padding
        self.stats.padding_tokens += padding
        return PackedSequence(buf.copy(), list(boundaries), padding)


def pack(
    docs: Iterable[Sequence[int]],
    context_length: int = DEFAULT_CONTEXT_LENGTH,
    eos_id: int = 1,
    mode: str = "drop_last",
    pad_id: int = 2,
) -> tuple[list[PackedSequence], PackStats]:
    packer = Packer(context_length, eos_id, mode, pad_id)
    sequences = list(packer.pack(docs))
    return sequences, packer.stats


# ---------------------------------------------------------------------------
# export / import


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def export_packed(
    sequences: Iterable[PackedSequence],
    path: str | Path,
    fmt: str = "binary-u32-le",
    *,
    context_length: int,
    eos_id: int,
    pad_id: int = 2,
    stats: PackStats | None = None,
    extra: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Write sequences plus a JSON manifest next to ``path``; returns the manifest.

    On any failure the partially written files are removed.
    """
    if fmt not in EXPORT_FORMATS:
        raise PackError(f"unknown export format {fmt!r}")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    count = 0
    last_padding = 0
    replaced = False
    try:
        with tmp.open("wb") as fh:
            for seq in sequences:
                if len(seq.ids) != context_length:
                    raise PackError(f"sequence {count} has length {len(seq.ids)}, expected {context_length}")
                if seq.ids.min(initial=0) < 0 or seq.ids.max(initial=0) > 0xFFFFFFFF:
                    raise PackError("token ids must fit in unsigned 32 bits")
                if fmt == "binary-u32-le":
                    fh.write(seq.ids.astype("<u4").tobytes())
                else:
                    record = {"ids": seq.ids.tolist(), "doc_boundaries": seq.doc_boundaries, "padding_len": seq.padding_len}
                    fh.write((json.dumps(record) + "\n").encode("utf-8"))
                last_padding = seq.padding_len
                count += 1
        os.replace(tmp, path)
        replaced = True
        manifest: dict[str, Any] = {
            "format": fmt,
            "context_length": context_length,
            "num_sequences": count,
            "eos_id": eos_id,
            "pad_id": pad_id,
            "last_padding_len": last_padding,
            "sha256": _sha256(path),
        }
        if stats is not None:
            manifest["stats"] = vars(stats).copy()
        manifest.update(extra or {})
        manifest_path(path).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        return manifest
    except BaseException:
        # Before the replace, any previous export (data and manifest) is intact.
        tmp.unlink(missing_ok=True)
        if replaced:
            path.unlink(missing_ok=True)
            manifest_path(path).unlink(missing_ok=True)
        raise


def load_packed(path: str | Path) -> tuple[list[PackedSequence], dict[str, Any]]:
    """Re-import an exported file, verifying the manifest checksum."""
    path = Path(path)
    manifest = json.loads(manifest_path(path).read_text(encoding="utf-8"))
    if _sha256(path) != manifest["sha256"]:
        raise ChecksumError(f"checksum mismatch for {path}")
    L = manifest["context_length"]
    if manifest["format"] == "jsonl":
        out = []
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                out.append(PackedSequence(np.asarray(rec["ids"], dtype=np.int64), rec["doc_boundaries"], rec["padding_len"]))
        return out, manifest
    flat = np.fromfile(path, dtype="<u4").astype(np.int64)
    if len(flat) != L * manifest["num_sequences"]:
        raise PackError(f"{path}: size does not match manifest")
    out = []
    eos = manifest["eos_id"]
    for i in range(manifest["num_sequences"]):
        ids = flat[i * L : (i + 1) * L]
        padding = manifest["last_padding_len"] if i == manifest["num_sequences"] - 1 else 0
        body = ids[: L - padding]
        out.append(PackedSequence(ids.copy(), np.flatnonzero(body == eos).tolist(), padding))
    return out, manifest


# ---------------------------------------------------------------------------
# learning-rate schedule


@dataclass(frozen=True)
class ScheduleConfig:
    total_steps: int
    warmup_steps: int = 10_000
    peak_lr: float = 3e-4
    final_lr: float = 3e-5

    def __post_init__(self) -> None:
        if not 0 < self.final_lr <= self.peak_lr:
            raise ValueError("need 0 < final_lr <= peak_lr")
        if not 0 <= self.warmup_steps < self.total_steps:
            raise ValueError("need 0 <= warmup_steps < total_steps")


def lr_at(step: int, cfg: ScheduleConfig) -> float:
    """Linear warmup from 0 to ``peak_lr``, then cosine decay to ``final_lr``.

    The decay uses cos²(πp/2), which equals ½(1 + cos πp) but evaluates the
    half-decay point without rounding error.
    """
    if not 0 <= step <= cfg.total_steps:
        raise ValueError(f"step {step} outside [0, {cfg.total_steps}]")
    if cfg.warmup_steps and step <= cfg.warmup_steps:
        return cfg.peak_lr * step / cfg.warmup_steps
    progress = (step - cfg.warmup_steps) / (cfg.total_steps - cfg.warmup_steps)
    return cfg.final_lr + (cfg.peak_lr - cfg.final_lr) * math.cos(math.pi * progress / 2) ** 2


def schedule_csv(cfg: ScheduleConfig, every: int = 1) -> str:
    steps = list(range(0, cfg.total_steps + 1, max(every, 1)))
    if steps[-1] != cfg.total_steps:
        steps.append(cfg.total_steps)
    return "step,lr\n" + "".join(f"{s},{lr_at(s, cfg)!r}\n" for s in steps)
