from __future__ import annotations

import pytest

from corpus_fixtures import make_records, trilingual_documents, write_records
from corpusprep.tokenizer import train_bpe


@pytest.fixture(scope="session")
def small_corpus() -> list:
    return trilingual_documents(400, seed=11)


@pytest.fixture(scope="session")
def small_model(small_corpus):
    return train_bpe(small_corpus, vocab_size=800)


@pytest.fixture
def fixture_jsonl(tmp_path):
    return write_records(make_records(200, seed=3), tmp_path / "corpus.jsonl")


# -- acceptance reporting -------------------------------------------------------

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion outcome; a crash before recording counts as FAIL."""
    rows = request.config.stash[_RESULTS]
    state = {"recorded": False, "number": None, "title": ""}

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        state["recorded"] = True
        rows.append((number, title, bool(ok), detail))
        return bool(ok)

    def declare(number: int, title: str) -> None:
        state["number"], state["title"] = number, title

    record.declare = declare
    yield record
    if not state["recorded"] and state["number"] is not None:
        rows.append((state["number"], state["title"], False, "error before result was recorded"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = sorted(config.stash.get(_RESULTS, []))
    if not rows:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, ok, detail in rows:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
    passed = sum(row[2] for row in rows)
    terminalreporter.write_line(f"{passed}/{len(rows)} criteria passed")
