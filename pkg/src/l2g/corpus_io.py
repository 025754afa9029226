"""Document identity, TREC run/qrels exchange formats and pool statistics."""

from __future__ import annotations

import io
import logging
import os
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Union

from .errors import InputError, NotFoundError, ParseError

log = logging.getLogger(__name__)

Source = Union[bytes, bytearray, str, os.PathLike, IO[bytes], IO[str]]


@dataclass(frozen=True, slots=True)
class DocRef:
    handle: int
    external_id: str

    def __str__(self) -> str:
        return self.external_id


class DocInterner:
    """Bijective map between external document ids and dense handles.

    Handles are handed out contiguously from 0 in first-seen order.
    """

    def __init__(self, ids: Iterable[str] = ()):
        self._handles: dict[str, int] = {}
        self._refs: list[DocRef] = []
        for external_id in ids:
            self.intern(external_id)

    def intern(self, external_id: str) -> DocRef:
        handle = self._handles.get(external_id)
        if handle is not None:
            return self._refs[handle]
        if not external_id:
            raise InputError("document id must be non-empty")
        ref = DocRef(len(self._refs), external_id)
        self._handles[external_id] = ref.handle
        self._refs.append(ref)
        return ref

    def get(self, external_id: str) -> DocRef | None:
        handle = self._handles.get(external_id)
        return None if handle is None else self._refs[handle]

    def lookup(self, external_id: str) -> DocRef:
        ref = self.get(external_id)
        if ref is None:
            raise NotFoundError(f"unknown document {external_id!r}")
        return ref

    def ref(self, handle: int) -> DocRef:
        if not 0 <= handle < len(self._refs):
            raise NotFoundError(f"unknown document handle {handle}")
        return self._refs[handle]

    def __len__(self) -> int:
        return len(self._refs)

    def __contains__(self, external_id: object) -> bool:
        return external_id in self._handles

    def __iter__(self) -> Iterator[DocRef]:
        return iter(self._refs)

    def ids(self) -> list[str]:
        return [r.external_id for r in self._refs]

    def copy(self) -> DocInterner:
        return DocInterner(self.ids())


@dataclass(frozen=True, slots=True)
class QueryRecord:
    qid: str
    text: str | None = None


@dataclass
class RankedList:
    """One query's ordered candidates, rank 1 first.

    ``scores`` is an optional side-band (first-stage scores on parse,
    synthetic descending scores on emission); it never drives ordering.
    """

    qid: str
    docs: list[DocRef]
    tag: str = "l2g"
    scores: list[float] | None = None

    def __post_init__(self) -> None:
        self.docs = list(self.docs)
        if not self.docs:
            raise InputError(f"ranked list for {self.qid!r} is empty")
        if len({d.external_id for d in self.docs}) != len(self.docs):
            raise InputError(f"ranked list for {self.qid!r} has duplicate documents")
        if self.scores is not None:
            self.scores = list(self.scores)
            if len(self.scores) != len(self.docs):
                raise InputError("scores and docs differ in length")

    def __len__(self) -> int:
        return len(self.docs)

    @property
    def doc_ids(self) -> list[str]:
        return [d.external_id for d in self.docs]

    def truncate(self, c: int) -> RankedList:
        if c >= len(self.docs):
            return self
        scores = None if self.scores is None else self.scores[:c]
        return RankedList(self.qid, self.docs[:c], self.tag, scores)


@dataclass
class QueryStream:
    """Queries in arrival order, each paired with its first-stage list."""

    items: list[tuple[QueryRecord, RankedList]] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for query, ranked in self.items:
            if query.qid in seen:
                raise InputError(f"query {query.qid!r} appears twice in stream")
            if ranked.qid != query.qid:
                raise InputError(f"list qid {ranked.qid!r} does not match query {query.qid!r}")
            seen.add(query.qid)

    @classmethod
    def from_lists(cls, lists: Iterable[RankedList], texts: dict[str, str] | None = None) -> QueryStream:
        texts = texts or {}
        return cls([(QueryRecord(rl.qid, texts.get(rl.qid)), rl) for rl in lists])

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[tuple[QueryRecord, RankedList]]:
        return iter(self.items)

    @property
    def m(self) -> int:
        return len(self.items)

    @property
    def lists(self) -> list[RankedList]:
        return [rl for _, rl in self.items]

    @property
    def qids(self) -> list[str]:
        return [q.qid for q, _ in self.items]


class Qrels:
    """Relevance grades keyed by (qid, external doc id); absent pairs grade 0."""

    def __init__(self, grades: dict[str, dict[str, int]] | None = None):
        self._grades: dict[str, dict[str, int]] = {}
        self.overwrites = 0
        for qid, docs in (grades or {}).items():
            for docid, grade in docs.items():
                self.set(qid, docid, grade)

    def set(self, qid: str, docid: str, grade: int) -> None:
        if grade < 0:
            raise InputError(f"negative grade for ({qid}, {docid})")
        self._grades.setdefault(qid, {})[docid] = int(grade)

    def grade(self, qid: str, docid: str) -> int:
        return self._grades.get(qid, {}).get(docid, 0)

    def judged(self, qid: str) -> dict[str, int]:
        return dict(self._grades.get(qid, {}))

    def relevant(self, qid: str) -> set[str]:
        return {d for d, g in self._grades.get(qid, {}).items() if g > 0}

    @property
    def qids(self) -> list[str]:
        return list(self._grades)

    def as_dict(self) -> dict[str, dict[str, int]]:
        return {q: dict(d) for q, d in self._grades.items()}

    def __contains__(self, qid: object) -> bool:
        return qid in self._grades

    def __len__(self) -> int:
        return sum(len(d) for d in self._grades.values())


def _lines(source: Source) -> Iterator[str]:
    if isinstance(source, (bytes, bytearray)):
        yield from io.StringIO(bytes(source).decode("utf-8"))
    elif isinstance(source, str):
        yield from io.StringIO(source)
    elif isinstance(source, os.PathLike):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    else:
        for line in source:
            yield line.decode("utf-8") if isinstance(line, bytes) else line


def _source_name(source: Source) -> str | None:
    if isinstance(source, os.PathLike):
        return os.fspath(source)
    if isinstance(source, (bytes, bytearray, str)):
        return None
    return getattr(source, "name", None)


def parse_run_file(source: Source, interner: DocInterner | None = None) -> list[RankedList]:
    """Parse ``qid Q0 docid rank score tag`` lines into one RankedList per qid.

    Lists come out in order of each qid's first appearance. A qid may be
    split over several blocks as long as its ranks keep increasing.
    """
    interner = interner if interner is not None else DocInterner()
    name = _source_name(source)
    order: list[str] = []
    docs: dict[str, list[DocRef]] = {}
    scores: dict[str, list[float]] = {}
    last_rank: dict[str, int] = {}
    seen: dict[str, set[str]] = {}
    tags: dict[str, str] = {}
    for lineno, raw in enumerate(_lines(source), start=1):
        parts = raw.split()
        if not parts:
            continue
        if len(parts) != 6:
            raise ParseError(f"expected 6 fields, got {len(parts)}", lineno, name)
        qid, _q0, docid, rank_s, score_s, tag = parts
        try:
            rank = int(rank_s)
            score = float(score_s)
        except ValueError as exc:
            raise ParseError(f"bad rank/score: {exc}", lineno, name) from None
        if qid not in docs:
            order.append(qid)
            docs[qid], scores[qid], seen[qid] = [], [], set()
            tags[qid] = tag
        elif rank <= last_rank[qid]:
            raise ParseError(f"rank {rank} for {qid} does not increase", lineno, name)
        if docid in seen[qid]:
            raise ParseError(f"duplicate document {docid} for {qid}", lineno, name)
        seen[qid].add(docid)
        last_rank[qid] = rank
        docs[qid].append(interner.intern(docid))
        scores[qid].append(score)
    return [RankedList(q, docs[q], tags[q], scores[q]) for q in order]


def _format_lines(ranked: RankedList, tag: str) -> Iterator[str]:
    scores = ranked.scores
    if scores is None:
        k = len(ranked.docs)
        scores = [float(k - i) for i in range(k)]
    for i in range(1, len(scores)):
        if not scores[i] < scores[i - 1]:
            raise InputError(f"scores for {ranked.qid} are not strictly decreasing at rank {i + 1}")
    for rank, (doc, score) in enumerate(zip(ranked.docs, scores), start=1):
        yield f"{ranked.qid} Q0 {doc.external_id} {rank} {score:.6f} {tag}\n"


def write_run_file(rankings: Iterable[RankedList], tag: str | None = None, sink: IO[bytes] | None = None) -> bytes:
    """Emit TREC run lines; lists without scores get ``k - r + 1``."""
    out = "".join(
        line for rl in rankings for line in _format_lines(rl, tag if tag is not None else rl.tag)
    ).encode("utf-8")
    if sink is not None:
        sink.write(out)
    return out


def parse_qrels(source: Source) -> Qrels:
    """Parse ``qid 0 docid grade`` lines. Later duplicates overwrite earlier ones."""
    qrels = Qrels()
    name = _source_name(source)
    for lineno, raw in enumerate(_lines(source), start=1):
        parts = raw.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", lineno, name)
        qid, _iter, docid, grade_s = parts
        try:
            grade = int(grade_s)
        except ValueError:
            raise ParseError(f"bad grade {grade_s!r}", lineno, name) from None
        if grade < 0:
            raise ParseError(f"negative grade {grade}", lineno, name)
        if docid in qrels._grades.get(qid, {}):
            qrels.overwrites += 1
            log.warning("qrels line %d overwrites grade for (%s, %s)", lineno, qid, docid)
        qrels.set(qid, docid, grade)
    return qrels


def write_qrels(qrels: Qrels) -> bytes:
    return "".join(
        f"{qid} 0 {docid} {grade}\n" for qid, docs in qrels.as_dict().items() for docid, grade in docs.items()
    ).encode("utf-8")


def shared_occurrence_share(pools: Sequence[set[str]]) -> float:
    """Percentage of pool entries that also occur in some other query's pool."""
    counts: dict[str, int] = {}
    for pool in pools:
        for d in pool:
            counts[d] = counts.get(d, 0) + 1
    total = sum(len(p) for p in pools)
    shared = sum(1 for pool in pools for d in pool if counts[d] > 1)
    return 100.0 * shared / total


OverlapStatistic = Callable[[Sequence[set[str]]], float]


def topc_overlap(
    stream: QueryStream | Iterable[RankedList],
    c: int,
    statistic: OverlapStatistic = shared_occurrence_share,
) -> float:
    """Cross-query overlap of top-``c`` pools, in percent."""
    if c < 1:
        raise InputError("c must be positive")
    lists = stream.lists if isinstance(stream, QueryStream) else list(stream)
    if not lists:
        raise InputError("overlap of an empty stream is undefined")
    return statistic([set(rl.doc_ids[:c]) for rl in lists])


def read_path(path: str | os.PathLike) -> bytes:
    return Path(path).read_bytes()
