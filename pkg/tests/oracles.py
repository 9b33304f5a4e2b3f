"""Slow, obviously-correct reference implementations used to check the library.

Nothing here imports corpusprep internals: each oracle re-derives the behaviour
from first principles so that a shared bug cannot hide in both routes.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter


# ---------------------------------------------------------------------------
# pretokenization (character-class scan, written independently)


def _cls(c: str) -> str:
    cat = unicodedata.category(c)
    if cat == "Nd":
        return "D"
    if cat[0] in "LM":
        return "W"
    if c.isspace():
        return "S"
    return "P"


def naive_pretokenize(text: str) -> list[str]:
    # First split into maximal same-class runs (digits always alone), then
    # move a trailing U+0020 from a whitespace run onto the next word.
    runs: list[list] = []
    for c in text:
        k = _cls(c)
        if runs and runs[-1][0] == k and k != "D":
            runs[-1][1] += c
        else:
            runs.append([k, c])
    out: list[str] = []
    carry = ""
    for i, (k, s) in enumerate(runs):
        s = carry + s
        carry = ""
        if k == "S" and s.endswith(" ") and i + 1 < len(runs) and runs[i + 1][0] == "W":
            s, carry = s[:-1], " "
        if s:
            out.append(s)
    return out


# ---------------------------------------------------------------------------
# BPE training: recount every pair from scratch at every step


def naive_bpe(word_counts: dict[str, int], budget: int, min_frequency: int = 2) -> tuple[list[str], list[tuple[str, str]]]:
    """Return (learned tokens, merges) for ``budget`` learned slots.

    Alphabet: characters by total frequency desc, then codepoint; capped at the
    budget. Characters outside the alphabet break words. Each step counts every
    adjacent pair over all words (weighted by word count), takes the maximum,
    breaks ties by the smallest (left, right) pair, and merges left to right.
    """
    freq: Counter[str] = Counter()
    for w, c in word_counts.items():
        for ch in w:
            freq[ch] += c
    alphabet = sorted(freq, key=lambda ch: (-freq[ch], ch))[:budget]
    alpha = set(alphabet)

    words: list[tuple[list[str], int]] = []
    for w, c in word_counts.items():
        seg: list[str] = []
        for ch in w + "\0":
            if ch != "\0" and ch in alpha:
                seg.append(ch)
            else:
                if len(seg) > 1:
                    words.append((seg, c))
                seg = []

    learned = list(alphabet)
    known = set(alphabet)
    merges: list[tuple[str, str]] = []
    while len(learned) < budget:
        pairs: Counter[tuple[str, str]] = Counter()
        for seg, c in words:
            for i in range(len(seg) - 1):
                pairs[(seg[i], seg[i + 1])] += c
        if not pairs:
            break
        top = max(pairs.values())
        if top < min_frequency:
            break
        best = min(p for p, n in pairs.items() if n == top)
        merges.append(best)
        if best[0] + best[1] not in known:
            known.add(best[0] + best[1])
            learned.append(best[0] + best[1])
        new_words = []
        for seg, c in words:
            out, i = [], 0
            while i < len(seg):
                if i + 1 < len(seg) and (seg[i], seg[i + 1]) == best:
                    out.append(seg[i] + seg[i + 1])
                    i += 2
                else:
                    out.append(seg[i])
                    i += 1
            new_words.append((out, c))
        words = new_words
    return learned, merges


def naive_encode_word(word: str, learned: list[str], merges: list[tuple[str, str]]) -> list[int]:
    """Apply merges in training order to one pretoken, then byte-fallback."""
    ids = {t: 259 + i for i, t in enumerate(learned)}
    syms = list(word)
    for a, b in merges:
        out, i = [], 0
        while i < len(syms):
            if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
                out.append(a + b)
                i += 2
            else:
                out.append(syms[i])
                i += 1
        syms = out
    result: list[int] = []
    for s in syms:
        if s in ids:
            result.append(ids[s])
        else:
            result.extend(3 + b for b in s.encode("utf-8"))
    return result


# ---------------------------------------------------------------------------
# similarity


def char_ngrams(text: str, n: int = 5) -> set[str]:
    # texts shorter than n have no shingles and are left to exact dedup
    return {text[i : i + n] for i in range(len(text) - n + 1)}


def exact_jaccard(x: str, y: str, n: int = 5) -> float:
    a, b = char_ngrams(x, n), char_ngrams(y, n)
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def lsh_candidate_probability(j: float, bands: int, rows: int) -> float:
    return 1.0 - (1.0 - j**rows) ** bands


# ---------------------------------------------------------------------------
# schedule


def reference_lr(step: int, total: int, warmup: int = 10_000, peak: float = 3e-4, final: float = 3e-5) -> float:
    if step <= warmup:
        return peak * step / warmup
    p = (step - warmup) / (total - warmup)
    return final + 0.5 * (peak - final) * (1 + math.cos(math.pi * p))
