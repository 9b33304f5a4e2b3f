"""Exact and near-duplicate removal.

Near duplicates are found with character-shingle MinHash signatures and LSH
banding. Every LSH candidate pair is re-checked with the exact Jaccard of the
shingle sets before anything is dropped, and merged pairs are closed under
union-find so transitive near-duplicates share one (first-seen) representative.
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import Document

U64 = np.uint64
_MASK64 = (1 << 64) - 1
_EMPTY = np.empty(0, dtype=U64)


class DedupConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DedupParams:
    ngram: int = 5
    num_perm: int = 128
    bands: int = 16
    rows: int = 8
    threshold: float = 0.8
    per_language: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        problems = self.problems()
        if problems:
            raise DedupConfigError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.bands * self.rows != self.num_perm:
            out.append(f"b×r ≠ k: bands={self.bands} × rows={self.rows} != num_perm={self.num_perm}")
        if self.ngram < 1:
            out.append("ngram must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            out.append("threshold must be in [0, 1]")
        return out


# ---------------------------------------------------------------------------
# hashing


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, elementwise on uint64 (wrapping arithmetic)."""
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


def _splitmix_stream(seed: int, count: int) -> list[int]:
    state = seed & _MASK64
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        out.append(z ^ (z >> 31))
    return out


def permutation_params(num_perm: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Multipliers (odd) and offsets of the affine hash family for ``seed``."""
    raw = _splitmix_stream(seed, 2 * num_perm)
    a = np.array([x | 1 for x in raw[0::2]], dtype=U64)
    b = np.array(raw[1::2], dtype=U64)
    return a, b


def _codepoints(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-32-le"), dtype="<u4").astype(U64)


def _window_hashes(cps: np.ndarray, starts: np.ndarray, n: int) -> np.ndarray:
    h = np.full(len(starts), 0x243F6A8885A308D3, dtype=U64)
    for j in range(n):
        h = _mix64(h + cps[starts + j] + U64(1))
    return h


def shingle_set(text: str, n: int = 5) -> np.ndarray:
    """Sorted unique 64-bit hashes of the character ``n``-grams of ``text``."""
    if len(text) < n:
        return _EMPTY
    cps = _codepoints(text)
    return np.unique(_window_hashes(cps, np.arange(len(cps) - n + 1), n))


def shingle_sets(texts: Sequence[str], n: int = 5) -> list[np.ndarray]:
    """Batch version of :func:`shingle_set`; identical output, one vectorized pass."""
    if not texts:
        return []
    lengths = np.array([len(t) for t in texts], dtype=np.int64)
    cps = _codepoints("".join(texts))
    doc_start = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    counts = np.maximum(lengths - n + 1, 0)
    total = int(counts.sum())
    if total == 0:
        return [_EMPTY for _ in texts]
    owner = np.repeat(np.arange(len(texts)), counts)
    offset_in_doc = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    starts = doc_start[owner] + offset_in_doc
    h = _window_hashes(cps, starts, n)
    order = np.lexsort((h, owner))
    owner, h = owner[order], h[order]
    keep = np.ones(total, dtype=bool)
    keep[1:] = (owner[1:] != owner[:-1]) | (h[1:] != h[:-1])
    owner, h = owner[keep], h[keep]
    bounds = np.searchsorted(owner, np.arange(len(texts) + 1))
    return [h[bounds[i] : bounds[i + 1]] for i in range(len(texts))]


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    """Exact Jaccard similarity of two sorted unique hash arrays."""
    if len(a) == 0 and len(b) == 0:
        return 0.0
    inter = len(np.intersect1d(a, b, assume_unique=True))
    return inter / (len(a) + len(b) - inter)


# ---------------------------------------------------------------------------
# minhash


@dataclass
class MinHashSignature:
    doc_id: str
    values: np.ndarray
    seed: int

    @property
    def empty(self) -> bool:
        return len(self.values) == 0

    def agreement(self, other: MinHashSignature) -> float:
        if self.empty or other.empty:
            return 0.0
        return float(np.mean(self.values == other.values))


def minhash_from_shingles(shingles: np.ndarray, num_perm: int = 128, seed: int = 0) -> np.ndarray:
    if len(shingles) == 0:
        return _EMPTY
    a, b = permutation_params(num_perm, seed)
    return (shingles[None, :] * a[:, None] + b[:, None]).min(axis=1)


def minhash_signature(doc: Document | str, num_perm: int = 128, seed: int = 0, n: int = 5) -> MinHashSignature:
    """Signature of one document; texts shorter than ``n`` get an empty sentinel."""
    text = doc.text if isinstance(doc, Document) else doc
    doc_id = doc.id if isinstance(doc, Document) else ""
    return MinHashSignature(doc_id, minhash_from_shingles(shingle_set(text, n), num_perm, seed), seed)


def signature_matrix(shingles: Sequence[np.ndarray], num_perm: int = 128, seed: int = 0) -> np.ndarray:
    """``(len(shingles), num_perm)`` matrix; rows of empty sets are all-max and must be masked."""
    a, b = permutation_params(num_perm, seed)
    out = np.full((len(shingles), num_perm), np.iinfo(np.uint64).max, dtype=U64)
    nonempty = [i for i, s in enumerate(shingles) if len(s)]
    if not nonempty:
        return out
    flat = np.concatenate([shingles[i] for i in nonempty])
    starts = np.concatenate([[0], np.cumsum([len(shingles[i]) for i in nonempty])[:-1]])
    rows = np.array(nonempty)
    for p in range(num_perm):
        out[rows, p] = np.minimum.reduceat(flat * a[p] + b[p], starts)
    return out


# ---------------------------------------------------------------------------
# LSH + union-find


def lsh_candidates(signatures: np.ndarray, bands: int, rows: int, valid: np.ndarray | None = None) -> set[tuple[int, int]]:
    """Index pairs ``(i, j)``, ``i < j``, that share at least one band bucket."""
    n, k = signatures.shape
    if bands * rows != k:
        raise DedupConfigError(f"b×r ≠ k: {bands}×{rows} != {k}")
    idx = np.arange(n) if valid is None else np.flatnonzero(valid)
    pairs: set[tuple[int, int]] = set()
    for band in range(bands):
        block = np.ascontiguousarray(signatures[idx, band * rows : (band + 1) * rows])
        buckets: dict[bytes, list[int]] = defaultdict(list)
        for row, i in zip(block, idx):
            buckets[row.tobytes()].append(int(i))
        for members in buckets.values():
            if len(members) > 1:
                for x in range(len(members)):
                    for y in range(x + 1, len(members)):
                        pairs.add((members[x], members[y]))
    return pairs


class UnionFind:
    """Disjoint sets over ``0..n-1``; the root of every set is its smallest member."""

    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            lo, hi = (ra, rb) if ra < rb else (rb, ra)
            self.parent[hi] = lo


@dataclass
class Dropped:
    doc_id: str
    reason: str
    similarity: float


@dataclass
class DedupDecision:
    kept: str
    dropped: list[Dropped] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kept": self.kept,
            "dropped": [{"id": d.doc_id, "reason": d.reason, "similarity": round(d.similarity, 6)} for d in self.dropped],
        }


def lsh_near_dedup(
    signatures: Sequence[MinHashSignature],
    shingles: Mapping[str, np.ndarray] | Sequence[np.ndarray],
    bands: int = 16,
    rows: int = 8,
    threshold: float = 0.8,
) -> list[DedupDecision]:
    """Cluster near duplicates among ``signatures`` (given in stream order).

    ``shingles`` supplies the exact shingle set per document (by id or by
    position) for candidate verification.
    """
    if not signatures:
        return []
    k = bands * rows
    lengths = {len(s.values) for s in signatures if not s.empty}
    if lengths and lengths != {k}:
        raise DedupConfigError(f"b×r ≠ k: {bands}×{rows} != signature length {sorted(lengths)}")
    valid = np.array([not s.empty for s in signatures])
    matrix = np.zeros((len(signatures), k), dtype=U64)
    for i, s in enumerate(signatures):
        if not s.empty:
            matrix[i] = s.values
    if isinstance(shingles, Mapping):
        sets = [shingles[s.doc_id] for s in signatures]
    else:
        sets = list(shingles)
    return _cluster(matrix, valid, sets, [s.doc_id for s in signatures], bands, rows, threshold)


def _cluster(
    matrix: np.ndarray,
    valid: np.ndarray,
    sets: Sequence[np.ndarray],
    ids: Sequence[str],
    bands: int,
    rows: int,
    threshold: float,
) -> list[DedupDecision]:
    uf = UnionFind(len(ids))
    best_sim: dict[int, float] = {}
    for i, j in sorted(lsh_candidates(matrix, bands, rows, valid)):
        sim = jaccard(sets[i], sets[j])
        if sim >= threshold:
            uf.union(i, j)
            best_sim[i] = max(best_sim.get(i, 0.0), sim)
            best_sim[j] = max(best_sim.get(j, 0.0), sim)
    clusters: dict[int, list[int]] = defaultdict(list)
    for i in range(len(ids)):
        clusters[uf.find(i)].append(i)
    decisions = []
    for root in sorted(clusters):
        members = clusters[root]
        if len(members) > 1:
            dropped = [Dropped(ids[m], "near", best_sim[m]) for m in members if m != root]
            decisions.append(DedupDecision(ids[root], dropped))
    return decisions


# ---------------------------------------------------------------------------
# corpus-level operations


def _trimmed_key(text: str) -> bytes:
    return hashlib.sha256(text.rstrip().encode("utf-8")).digest()


def exact_dedup(docs: Iterable[Document]) -> tuple[list[Document], list[DedupDecision]]:
    """Collapse documents whose text matches after trailing-whitespace trim."""
    first: dict[bytes, int] = {}
    survivors: list[Document] = []
    decisions: dict[int, DedupDecision] = {}
    for doc in docs:
        key = _trimmed_key(doc.text)
        if key in first:
            rep = first[key]
            decisions.setdefault(rep, DedupDecision(survivors[rep].id)).dropped.append(Dropped(doc.id, "exact", 1.0))
        else:
            first[key] = len(survivors)
            survivors.append(doc)
    return survivors, [decisions[i] for i in sorted(decisions)]


def near_dedup(docs: Sequence[Document], params: DedupParams) -> tuple[list[Document], list[DedupDecision]]:
    docs = list(docs)
    if params.per_language:
        partitions: dict[str, list[int]] = defaultdict(list)
        for i, d in enumerate(docs):
            partitions[d.lang].append(i)
        groups = [partitions[lang] for lang in sorted(partitions)]
    else:
        groups = [list(range(len(docs)))]
    decisions: list[DedupDecision] = []
    dropped: set[str] = set()
    for group in groups:
        texts = [docs[i].text for i in group]
        sets = shingle_sets(texts, params.ngram)
        matrix = signature_matrix(sets, params.num_perm, params.seed)
        valid = np.array([len(s) > 0 for s in sets])
        ids = [docs[i].id for i in group]
        for dec in _cluster(matrix, valid, sets, ids, params.bands, params.rows, params.threshold):
            decisions.append(dec)
            dropped.update(d.doc_id for d in dec.dropped)
    order = {d.id: i for i, d in enumerate(docs)}
    decisions.sort(key=lambda dec: order[dec.kept])
    return [d for d in docs if d.id not in dropped], decisions


def deduplicate(docs: Iterable[Document], params: DedupParams | None = None) -> tuple[list[Document], list[DedupDecision]]:
    """Exact dedup followed by verified MinHash-LSH near dedup."""
    params = params or DedupParams()
    survivors, exact = exact_dedup(docs)
    survivors, near = near_dedup(survivors, params)
    return survivors, exact + near


def write_audit_log(decisions: Iterable[DedupDecision], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for dec in decisions:
            fh.write(json.dumps(dec.to_dict(), ensure_ascii=False) + "\n")
