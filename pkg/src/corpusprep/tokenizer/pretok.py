"""Split text into pretokens, the spans BPE merges may not cross.

Rules:
  * every decimal digit (Unicode Nd) is its own pretoken, so numbers are
    always encoded digit by digit;
  * a run of letters (L*) and combining marks (M*) is a word; a single
    U+0020 directly before a word is attached to it;
  * any other whitespace forms a whitespace run;
  * everything else forms a symbol run.

No case folding or Unicode normalization is applied, and joining the
pretoken texts reproduces the input exactly.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Iterator

WORD, DIGIT, SYMBOL, SPACE = "word", "digit", "symbol", "whitespace"

RULES = {
    "digits": "each Unicode Nd character is a separate pretoken",
    "words": "runs of L*/M* characters; one leading U+0020 attaches to the word",
    "whitespace": "runs of other whitespace",
    "symbols": "runs of remaining characters",
    "normalization": "none",
}

_kind_cache: dict[str, str] = {}


def char_kind(c: str) -> str:
    kind = _kind_cache.get(c)
    if kind is None:
        cat = unicodedata.category(c)
        if cat == "Nd":
            kind = DIGIT
        elif cat[0] in "LM":
            kind = WORD
        elif c.isspace():
            kind = SPACE
        else:
            kind = SYMBOL
        if len(_kind_cache) < 200_000:
            _kind_cache[c] = kind
    return kind


@dataclass(frozen=True)
class Pretoken:
    text: str
    kind: str


def iter_pretokens(text: str) -> Iterator[Pretoken]:
    n = len(text)
    i = 0
    while i < n:
        kind = char_kind(text[i])
        if kind == DIGIT:
            yield Pretoken(text[i], DIGIT)
            i += 1
            continue
        j = i + 1
        while j < n and char_kind(text[j]) == kind:
            j += 1
        if kind == SPACE:
            if text[j - 1] == " " and j < n and char_kind(text[j]) == WORD:
                if j - 1 > i:
                    yield Pretoken(text[i : j - 1], SPACE)
                k = j + 1
                while k < n and char_kind(text[k]) == WORD:
                    k += 1
                yield Pretoken(text[j - 1 : k], WORD)
                i = k
                continue
        yield Pretoken(text[i:j], kind)
        i = j


def pretokenize(text: str) -> list[Pretoken]:
    return list(iter_pretokens(text))


def pretoken_texts(text: str) -> list[str]:
    return [p.text for p in iter_pretokens(text)]
