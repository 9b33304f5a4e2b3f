"""Deterministic synthetic corpora for tests.

Everything is derived from ``random.Random(seed)`` so fixtures are identical on
every machine and Python >= 3.10.
"""

from __future__ import annotations

import json
import random
import string
from pathlib import Path

from corpusprep.ingest import Document

KO_WORDS = (
    "한국어 언어 모델 학습 데이터 문서 정리 품질 필터 중복 제거 토큰 분석 연구 결과 "
    "대한민국 서울 사람 시간 문제 경우 생각 사회 정부 기업 시장 경제 기술 개발 정보 "
    "교육 학교 학생 선생님 가족 친구 음식 여행 날씨 오늘 내일 어제 그리고 하지만 또한 "
    "있습니다 했습니다 합니다 됩니다 것입니다 위해 통해 대한 관련 다양한 새로운 중요한"
).split()
EN_WORDS = (
    "the of and to in a is that for it as was with be by on not he this are or his from at "
    "which but have an they you were their one all we can her has there been if more when "
    "will would who so no data model language corpus training quality filter token research "
    "result system people time year government market company school student family"
).split()
IDENTS = ("value", "count", "items", "result", "buffer", "index", "total", "node", "config", "path")


def korean_text(rng: random.Random, words: int) -> str:
    out = []
    for i in range(words):
        out.append(rng.choice(KO_WORDS))
        if i % 9 == 8:
            out[-1] += "."
    if rng.random() < 0.3:
        out.insert(rng.randrange(len(out) + 1), str(rng.randint(1, 2024)))
    return " ".join(out) + "."


def english_text(rng: random.Random, words: int) -> str:
    out = [rng.choice(EN_WORDS) for _ in range(words)]
    out[0] = out[0].capitalize()
    if rng.random() < 0.3:
        out.insert(rng.randrange(len(out) + 1), str(rng.randint(1, 2024)))
    return " ".join(out) + "."


def code_text(rng: random.Random, functions: int) -> str:
    blocks = []
    for _ in range(functions):
        name = f"{rng.choice(IDENTS)}_{rng.choice(IDENTS)}"
        a, b = rng.sample(IDENTS, 2)
        blocks.append(
            f"def {name}({a}, {b}):\n"
            f"    if {a} is None:\n"
            f"        return {rng.randint(0, 99)}\n"
            f"    {b} = [{a}[i] * {rng.randint(2, 9)} for i in range(len({a}))]\n"
            f"    return sum({b}) + {rng.randint(0, 9)}\n"
        )
    return "\n".join(blocks)


def wikitext(rng: random.Random) -> str:
    return (
        f"== {rng.choice(EN_WORDS).title()} ==\n"
        f"'''{rng.choice(EN_WORDS)}''' is a [[{rng.choice(EN_WORDS)}|{rng.choice(EN_WORDS)}]] term.{{{{cite|x}}}}\n"
        f"* {english_text(rng, 6)}\n"
        f"** {english_text(rng, 4)}\n"
        "{| class=\"wikitable\"\n! Name !! Value\n|-\n"
        f"| {rng.choice(EN_WORDS)} || {rng.randint(1, 99)}\n|}}\n"
    )


def random_word(rng: random.Random, lo: int = 3, hi: int = 9) -> str:
    return "".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(lo, hi)))


def make_records(n: int = 1000, seed: int = 0) -> list[dict]:
    """Raw JSONL records for a trilingual corpus with duplicates and junk.

    About 30% Korean, 35% English and 35% code, plus exact duplicates,
    near-duplicates, wikitext and HTML documents, and too-short fragments.
    Language tags are omitted on some records so detection runs.
    """
    rng = random.Random(seed)
    records: list[dict] = []
    for i in range(n):
        r = rng.random()
        if r < 0.3:
            rec = {"text": korean_text(rng, rng.randint(20, 80)), "lang": "ko", "source": "news"}
        elif r < 0.6:
            rec = {"text": english_text(rng, rng.randint(20, 80)), "lang": "en"}
        elif r < 0.65:
            rec = {"text": wikitext(rng), "lang": "en", "source": "wiki"}
        elif r < 0.67:
            rec = {"text": f"<p>{english_text(rng, 15)}</p><ul><li>one</li><li>two</li></ul>", "meta": {"format": "html"}}
        elif r < 0.69:
            rec = {"text": rng.choice(["ok", "x", "hi!"])}
        else:
            rec = {"text": code_text(rng, rng.randint(1, 4)), "lang": "code", "source": "code"}
        if rng.random() < 0.2:
            rec.pop("lang", None)
        rec["id"] = f"doc-{i:05d}"
        records.append(rec)
    # exact and near duplicates of earlier documents
    for j in range(n // 50):
        src = records[rng.randrange(len(records))]
        dup = dict(src, id=f"dup-{j:04d}")
        if j % 2:
            dup["text"] = src["text"] + " "
        records.insert(rng.randrange(len(records) + 1), dup)
    return records


def write_records(records: list[dict], path: Path) -> Path:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return Path(path)


def trilingual_documents(n: int, seed: int, shares: tuple[float, float, float] = (0.5, 0.3, 0.2)) -> list[Document]:
    """Lightweight documents with varied lengths and explicit language tags."""
    rng = random.Random(seed)
    langs = rng.choices(("ko", "en", "code"), weights=shares, k=n)
    docs = []
    for i, lang in enumerate(langs):
        if lang == "ko":
            text = korean_text(rng, rng.randint(5, 60))
        elif lang == "en":
            text = english_text(rng, rng.randint(10, 120))
        else:
            text = code_text(rng, rng.randint(1, 3))
        docs.append(Document(f"d{i}", text, lang, "code" if lang == "code" else "web"))
    return docs


def fuzz_string(rng: random.Random, max_len: int = 40) -> str:
    """Random text mixing Hangul, Latin, CJK, emoji, digits and control characters."""
    pools = (
        lambda: chr(rng.randint(0xAC00, 0xD7A3)),
        lambda: rng.choice(string.ascii_letters),
        lambda: chr(rng.randint(0x4E00, 0x9FFF)),
        lambda: chr(rng.randint(0x1F300, 0x1FAFF)),
        lambda: chr(rng.randint(0, 0x1F)),
        lambda: rng.choice(" \t\n　"),
        lambda: rng.choice(string.digits + "０１２３٣"),
        lambda: rng.choice(string.punctuation),
        lambda: chr(rng.randint(0x0300, 0x036F)),
    )
    return "".join(rng.choice(pools)() for _ in range(rng.randint(0, max_len)))


def _pseudo_words(rng: random.Random, count: int) -> list[str]:
    return [random_word(rng, 3, 9) for _ in range(count)]


def planted_dedup_corpus(
    n_docs: int = 10_000,
    n_planted: int = 500,
    n_decoys: int = 500,
    seed: int = 0,
    words_per_doc: int = 80,
) -> tuple[list[str], list[tuple[int, int, float]], list[tuple[int, int, float]]]:
    """Texts plus planted near-duplicate pairs (J >= 0.85) and decoy pairs (J <= 0.3).

    Pairs are ``(i, j, exact_jaccard)`` with ``i < j`` and are verified with the
    set-based oracle; positions are shuffled so pairs are not adjacent.
    """
    from oracles import exact_jaccard

    rng = random.Random(seed)
    vocab = _pseudo_words(rng, 20_000)

    def fresh() -> list[str]:
        return [rng.choice(vocab) for _ in range(words_per_doc)]

    texts: list[str] = []
    planted_raw, decoy_raw = [], []
    for _ in range(n_planted):
        base = fresh()
        while True:
            copy = list(base)
            for _ in range(rng.randint(1, 6)):
                copy[rng.randrange(len(copy))] = rng.choice(vocab)
            a, b = " ".join(base), " ".join(copy)
            j = exact_jaccard(a, b)
            if j >= 0.85 and a != b:
                break
        planted_raw.append((len(texts), len(texts) + 1, j))
        texts += [a, b]
    for _ in range(n_decoys):
        base = fresh()
        while True:
            shared = rng.randint(words_per_doc // 8, words_per_doc // 3)
            other = base[:shared] + fresh()[shared:]
            a, b = " ".join(base), " ".join(other)
            j = exact_jaccard(a, b)
            if j <= 0.3:
                break
        decoy_raw.append((len(texts), len(texts) + 1, j))
        texts += [a, b]
    while len(texts) < n_docs:
        texts.append(" ".join(fresh()))
    perm = list(range(len(texts)))
    rng.shuffle(perm)
    where = {old: new for new, old in enumerate(perm)}
    shuffled = [texts[old] for old in perm]

    def remap(pairs):
        return [tuple(sorted((where[i], where[j]))) + (jv,) for i, j, jv in pairs]

    return shuffled, remap(planted_raw), remap(decoy_raw)


def jaccard_pairs(n_pairs: int = 200, seed: int = 0, words: int = 60) -> list[tuple[str, str]]:
    """Document pairs whose similarity spans the whole [0, 1] range."""
    rng = random.Random(seed)
    vocab = _pseudo_words(rng, 5000)
    pairs = []
    for _ in range(n_pairs):
        base = [rng.choice(vocab) for _ in range(words)]
        keep = rng.random()
        other = [w if rng.random() < keep else rng.choice(vocab) for w in base]
        pairs.append((" ".join(base), " ".join(other)))
    return pairs
