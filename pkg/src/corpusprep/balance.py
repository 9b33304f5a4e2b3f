"""Language mixture balancing by up- and down-sampling per-language partitions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Mapping

import numpy as np

from .ingest import COUNT_UNITS, CorpusStats, Document

# Corpus mix by language used for the reference bilingual model.
REFERENCE_TARGETS = {"ko": 0.35, "en": 0.28, "code": 0.37}
DEFAULT_MAX_REPETITION = 4.0


class MixtureError(ValueError):
    pass


@dataclass(frozen=True)
class MixtureSpec:
    targets: Mapping[str, float] = field(default_factory=lambda: dict(REFERENCE_TARGETS))
    unit: str = "bytes"
    total_budget: float | None = None
    seed: int = 0
    max_repetition: float = DEFAULT_MAX_REPETITION

    def __post_init__(self) -> None:
        problems = self.problems()
        if problems:
            raise MixtureError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not self.targets:
            out.append("targets must name at least one language")
        for lang, p in self.targets.items():
            if not 0.0 <= p <= 1.0:
                out.append(f"targets.{lang}: proportion {p} outside [0, 1]")
        total = sum(self.targets.values())
        if abs(total - 1.0) > 1e-9:
            out.append(f"targets: proportions sum to {total}, expected 1")
        if self.unit not in COUNT_UNITS:
            out.append(f"unit: unknown counting unit {self.unit!r}")
        if self.total_budget is not None and self.total_budget <= 0:
            out.append("total_budget must be positive")
        if self.max_repetition < 1.0:
            out.append("max_repetition must be >= 1")
        return out


def compute_weights(stats: CorpusStats, spec: MixtureSpec) -> dict[str, float]:
    """Per-language sampling weights; >1 repeats documents, <1 subsamples them.

    Without a budget the output total is the largest one for which no weight
    exceeds ``spec.max_repetition``. Languages without a target get weight 0.
    """
    available = stats.counts(spec.unit)
    for lang, target in spec.targets.items():
        if target > 0 and available.get(lang, 0) == 0:
            raise MixtureError(f"no data available for target language {lang!r}")
    if spec.total_budget is not None:
        total_out = float(spec.total_budget)
    else:
        total_out = min(spec.max_repetition * available[lang] / t for lang, t in spec.targets.items() if t > 0)
    weights = {lang: 0.0 for lang in available}
    for lang, target in spec.targets.items():
        if target > 0:
            weights[lang] = target * total_out / available[lang]
        elif lang in available:
            weights[lang] = 0.0
    return weights


def sample_corpus(
    docs: Iterable[Document],
    weights: Mapping[str, float],
    spec: MixtureSpec,
) -> list[Document]:
    """Repeat each document ``floor(w)`` times plus once with probability ``frac(w)``.

    The result is shuffled with the same seeded generator, so the output is a
    pure function of (input order, weights, seed).
    """
    rng = np.random.default_rng(spec.seed)
    out: list[Document] = []
    for doc in docs:
        w = weights.get(doc.lang, 0.0)
        whole = math.floor(w)
        copies = whole + int(rng.random() < (w - whole))
        out.extend([doc] * copies)
    order = rng.permutation(len(out))
    return [out[i] for i in order]


def realized_mixture(docs: Iterable[Document], unit: str, count_tokens: Callable[[str], int] | None = None) -> dict[str, Any]:
    stats = CorpusStats()
    for doc in docs:
        stats.add(doc, count_tokens(doc.text) if count_tokens else None)
    props = stats.proportions(unit)
    return {
        "unit": unit,
        "counts": stats.counts(unit),
        "proportions": None if props is None else {k: round(v, 6) for k, v in props.items()},
    }


def balance(
    docs: list[Document],
    spec: MixtureSpec,
    count_tokens: Callable[[str], int] | None = None,
) -> tuple[list[Document], dict[str, Any]]:
    """Compute weights from ``docs`` and resample them; returns the corpus and a report."""
    stats = CorpusStats()
    for doc in docs:
        stats.add(doc, count_tokens(doc.text) if count_tokens else None)
    weights = compute_weights(stats, spec)
    sampled = sample_corpus(docs, weights, spec)
    report = {
        "targets": dict(spec.targets),
        "weights": {k: round(v, 9) for k, v in sorted(weights.items())},
        "missing_targets": sorted(set(spec.targets) - set(stats.counts(spec.unit))),
        "untargeted_languages": sorted(set(stats.counts(spec.unit)) - set(spec.targets)),
        "input": realized_mixture(docs, spec.unit, count_tokens),
        "output": realized_mixture(sampled, spec.unit, count_tokens),
    }
    return sampled, report
