"""Byte-fallback BPE tokenizer model: id layout, encode/decode and the JSON file format."""

from __future__ import annotations

import json
import logging
from bisect import bisect_left
from pathlib import Path
from typing import Any, Iterable, Sequence

from .pretok import RULES, pretoken_texts

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
SPECIAL_TOKENS = {"bos": "<s>", "eos": "</s>", "pad": "<pad>"}
BOS_ID, EOS_ID, PAD_ID = 0, 1, 2
BYTE_OFFSET = len(SPECIAL_TOKENS)
NUM_BYTES = 256
FIRST_LEARNED_ID = BYTE_OFFSET + NUM_BYTES
BYTE_TOKENS = tuple(f"<0x{b:02X}>" for b in range(NUM_BYTES))
DEFAULT_VOCAB_SIZE = 32_000

_CACHE_LIMIT = 1 << 17


class TokenizerError(ValueError):
    pass


class TokenizerModel:
    """Immutable trained tokenizer.

    Ids are laid out as: special tokens (bos=0, eos=1, pad=2), then the 256
    byte tokens (3..258), then learned tokens (single characters of the
    learned alphabet followed by merge products) in creation order.
    """

    def __init__(
        self,
        learned: Sequence[str],
        merges: Sequence[tuple[str, str]],
        config: dict[str, Any] | None = None,
    ) -> None:
        self.learned = tuple(learned)
        self.merges = tuple((a, b) for a, b in merges)
        self.config = dict(config or {})
        self._ids = {tok: FIRST_LEARNED_ID + i for i, tok in enumerate(self.learned)}
        if len(self._ids) != len(self.learned):
            raise TokenizerError("duplicate learned token")
        # A pair can be merged more than once in training when an earlier
        # merge produced one of its sides under another split.
        self._ranks: dict[tuple[str, str], list[int]] = {}
        for r, pair in enumerate(self.merges):
            self._ranks.setdefault(pair, []).append(r)
        for a, b in self.merges:
            if a + b not in self._ids:
                raise TokenizerError(f"merge product {a + b!r} missing from vocab")
        self._cache: dict[str, tuple[int, ...]] = {}

    # -- vocabulary ---------------------------------------------------------
    @property
    def vocab_size(self) -> int:
        return FIRST_LEARNED_ID + len(self.learned)

    bos_id, eos_id, pad_id = BOS_ID, EOS_ID, PAD_ID

    def id_to_token(self, i: int) -> str:
        if not 0 <= i < self.vocab_size:
            raise TokenizerError(f"token id {i} out of range [0, {self.vocab_size})")
        if i < BYTE_OFFSET:
            return list(SPECIAL_TOKENS.values())[i]
        if i < FIRST_LEARNED_ID:
            return BYTE_TOKENS[i - BYTE_OFFSET]
        return self.learned[i - FIRST_LEARNED_ID]

    def vocab(self) -> list[str]:
        return list(SPECIAL_TOKENS.values()) + list(BYTE_TOKENS) + list(self.learned)

    def token_id(self, token: str) -> int | None:
        return self._ids.get(token)

    # -- encoding -----------------------------------------------------------
    def _encode_pretoken(self, word: str) -> tuple[int, ...]:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        symbols = list(word)
        ranks = self._ranks
        # Equivalent to applying every merge in training order, but only
        # visits merges whose pair is present.
        cursor = 0
        while len(symbols) > 1:
            best = None
            best_rank = None
            for pair in zip(symbols, symbols[1:]):
                rs = ranks.get(pair)
                if rs is None:
                    continue
                k = bisect_left(rs, cursor)
                if k < len(rs) and (best_rank is None or rs[k] < best_rank):
                    best, best_rank = pair, rs[k]
            if best is None:
                break
            cursor = best_rank + 1
            a, b = best
            merged = []
            i = 0
            while i < len(symbols):
                if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
                    merged.append(a + b)
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        ids: list[int] = []
        for sym in symbols:
            tid = self._ids.get(sym)
            if tid is not None:
                ids.append(tid)
            else:
                ids.extend(BYTE_OFFSET + b for b in sym.encode("utf-8"))
        out = tuple(ids)
        if len(self._cache) < _CACHE_LIMIT:
            self._cache[word] = out
        return out

    def encode(self, text: str, add_specials: bool = False) -> list[int]:
        ids: list[int] = [BOS_ID] if add_specials else []
        for word in pretoken_texts(text):
            ids.extend(self._encode_pretoken(word))
        if add_specials:
            ids.append(EOS_ID)
        return ids

    def count(self, text: str) -> int:
        return sum(len(self._encode_pretoken(w)) for w in pretoken_texts(text))

    # -- decoding -----------------------------------------------------------
    def decode_checked(self, ids: Iterable[int], skip_specials: bool = False) -> tuple[str, bool]:
        """Decode ``ids``; the flag is False when a byte run was not valid UTF-8."""
        parts: list[str] = []
        pending = bytearray()
        clean = True

        def flush() -> None:
            nonlocal clean
            if pending:
                try:
                    parts.append(pending.decode("utf-8"))
                except UnicodeDecodeError:
                    clean = False
                    parts.append(pending.decode("utf-8", errors="replace"))
                pending.clear()

        for i in ids:
            i = int(i)
            if not 0 <= i < self.vocab_size:
                raise TokenizerError(f"token id {i} out of range [0, {self.vocab_size})")
            if i < BYTE_OFFSET:
                flush()
                if not skip_specials:
                    parts.append(self.id_to_token(i))
            elif i < FIRST_LEARNED_ID:
                pending.append(i - BYTE_OFFSET)
            else:
                flush()
                parts.append(self.learned[i - FIRST_LEARNED_ID])
        flush()
        if not clean:
            logger.warning("decoded byte tokens were not valid UTF-8; replacement characters inserted")
        return "".join(parts), clean

    def decode(self, ids: Iterable[int], skip_specials: bool = False) -> str:
        return self.decode_checked(ids, skip_specials)[0]

    # -- persistence --------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        return {
            "version": FORMAT_VERSION,
            "vocab": self.vocab(),
            "merges": [[a, b] for a, b in self.merges],
            "special_tokens": {name: {"id": i, "content": tok} for i, (name, tok) in enumerate(SPECIAL_TOKENS.items())},
            "byte_tokens": {"first_id": BYTE_OFFSET, "tokens": list(BYTE_TOKENS)},
            "config": {**self.config, "pretokenizer": RULES},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> TokenizerModel:
        if obj.get("version") != FORMAT_VERSION:
            raise TokenizerError(f"unsupported tokenizer format version {obj.get('version')!r}")
        vocab = obj["vocab"]
        if vocab[:FIRST_LEARNED_ID] != list(SPECIAL_TOKENS.values()) + list(BYTE_TOKENS):
            raise TokenizerError("special/byte token layout does not match this library")
        config = {k: v for k, v in obj.get("config", {}).items() if k != "pretokenizer"}
        return cls(vocab[FIRST_LEARNED_ID:], [tuple(m) for m in obj["merges"]], config)

    @classmethod
    def load(cls, path: str | Path) -> TokenizerModel:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TokenizerModel):
            return NotImplemented
        return (self.learned, self.merges, self.config) == (other.learned, other.merges, other.config)

    def __hash__(self) -> int:
        return hash((self.learned, self.merges))

    def __getstate__(self) -> dict[str, Any]:
        return {"learned": self.learned, "merges": self.merges, "config": self.config}

    def __setstate__(self, state: dict[str, Any]) -> None:
        self.__init__(state["learned"], state["merges"], state["config"])  # type: ignore[misc]
