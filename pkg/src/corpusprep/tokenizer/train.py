"""BPE training over pretoken counts."""

from __future__ import annotations

import heapq
import logging
from collections import Counter, defaultdict
from typing import Iterable, Mapping

from ..ingest import Document
from .model import DEFAULT_VOCAB_SIZE, FIRST_LEARNED_ID, TokenizerModel
from .pretok import pretoken_texts

logger = logging.getLogger(__name__)

DEFAULT_MIN_FREQUENCY = 2


def count_pretokens(corpus: Iterable[Document | str]) -> Counter[str]:
    counts: Counter[str] = Counter()
    for item in corpus:
        text = item.text if isinstance(item, Document) else item
        counts.update(pretoken_texts(text))
    return counts


def merge_word(word: list[str], a: str, b: str) -> list[str]:
    out = []
    i = 0
    while i < len(word):
        if i + 1 < len(word) and word[i] == a and word[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(word[i])
            i += 1
    return out


def learn_alphabet(word_counts: Mapping[str, int], budget: int) -> list[str]:
    """Characters by descending frequency (ties by codepoint), capped at ``budget``."""
    chars: Counter[str] = Counter()
    for word, c in word_counts.items():
        for ch in word:
            chars[ch] += c
    ranked = sorted(chars, key=lambda ch: (-chars[ch], ch))
    return ranked[:budget]


def _segments(text: str, alpha: set[str]) -> list[list[str]]:
    out, segment = [], []
    for ch in text:
        if ch in alpha:
            segment.append(ch)
        else:
            out.append(segment)
            segment = []
    out.append(segment)
    return [s for s in out if len(s) > 1]


def learn_merges(
    word_counts: Mapping[str, int],
    alphabet: Iterable[str],
    max_new_tokens: int,
    min_frequency: int = DEFAULT_MIN_FREQUENCY,
) -> tuple[list[tuple[str, str]], list[str]]:
    """Greedy BPE: repeatedly merge the most frequent adjacent pair.

    Ties go to the lexicographically smaller ``(left, right)`` pair. Characters
    outside ``alphabet`` split a word, since they will be byte-encoded. Returns
    the merge list and the new tokens in creation order (a merge whose product
    already exists adds no token).
    """
    alpha = set(alphabet)
    words: list[list[str]] = []
    counts: list[int] = []
    for text in sorted(word_counts):
        for segment in _segments(text, alpha):
            words.append(segment)
            counts.append(word_counts[text])

    pair_counts: dict[tuple[str, str], int] = defaultdict(int)
    where: dict[tuple[str, str], set[int]] = defaultdict(set)
    for wi, (w, c) in enumerate(zip(words, counts)):
        for pair in zip(w, w[1:]):
            pair_counts[pair] += c
            where[pair].add(wi)
    heap = [(-c, a, b) for (a, b), c in pair_counts.items()]
    heapq.heapify(heap)

    merges: list[tuple[str, str]] = []
    new_tokens: list[str] = []
    known = set(alpha)
    while heap and len(new_tokens) < max_new_tokens:
        neg, a, b = heapq.heappop(heap)
        current = pair_counts.get((a, b), 0)
        if current != -neg:
            if current > 0:
                heapq.heappush(heap, (-current, a, b))
            continue
        if current < min_frequency:
            break
        merges.append((a, b))
        product = a + b
        if product not in known:
            known.add(product)
            new_tokens.append(product)
        touched: set[tuple[str, str]] = set()
        for wi in sorted(where.pop((a, b), ())):
            w, c = words[wi], counts[wi]
            for pair in zip(w, w[1:]):
                pair_counts[pair] -= c
            w = merge_word(w, a, b)
            words[wi] = w
            for pair in zip(w, w[1:]):
                pair_counts[pair] += c
                where[pair].add(wi)
                touched.add(pair)
        pair_counts.pop((a, b), None)
        for pair in touched:
            c = pair_counts[pair]
            if c > 0:
                heapq.heappush(heap, (-c, pair[0], pair[1]))
    return merges, new_tokens


def train_from_counts(
    word_counts: Mapping[str, int],
    vocab_size: int = DEFAULT_VOCAB_SIZE,
    min_frequency: int = DEFAULT_MIN_FREQUENCY,
) -> TokenizerModel:
    if vocab_size <= FIRST_LEARNED_ID:
        raise ValueError(f"vocab_size must exceed {FIRST_LEARNED_ID} (specials + 256 byte tokens)")
    if not word_counts:
        raise ValueError("cannot train on an empty corpus")
    budget = vocab_size - FIRST_LEARNED_ID
    alphabet = learn_alphabet(word_counts, budget)
    merges, new_tokens = learn_merges(word_counts, alphabet, budget - len(alphabet), min_frequency)
    learned = alphabet + new_tokens
    if len(learned) < budget:
        logger.warning(
            "corpus too small to reach vocab_size=%d: learned %d tokens (vocab %d)",
            vocab_size, len(learned), FIRST_LEARNED_ID + len(learned),
        )
    config = {"vocab_size": vocab_size, "min_frequency": min_frequency}
    return TokenizerModel(learned, merges, config)


def train_bpe(
    corpus: Iterable[Document | str],
    vocab_size: int = DEFAULT_VOCAB_SIZE,
    min_frequency: int = DEFAULT_MIN_FREQUENCY,
) -> TokenizerModel:
    """Train a byte-fallback BPE tokenizer on documents or raw strings.

    ``vocab_size`` counts the 3 special and 256 byte tokens.
    """
    return train_from_counts(count_pretokens(corpus), vocab_size, min_frequency)
