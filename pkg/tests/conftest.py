from __future__ import annotations

import pytest

from l2g.corpus_io import DocInterner, RankedList


def make_list(qid: str, ids: list[str], interner: DocInterner | None = None, tag: str = "t") -> RankedList:
    interner = interner if interner is not None else DocInterner()
    return RankedList(qid, [interner.intern(d) for d in ids], tag)


@pytest.fixture
def toy_lists() -> list[RankedList]:
    interner = DocInterner()
    return [make_list("q1", ["d1", "d2", "d3"], interner), make_list("q2", ["d2", "d3", "d4"], interner)]


@pytest.fixture
def toy_graph(toy_lists):
    from l2g.graph import from_lists

    return from_lists(toy_lists)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
