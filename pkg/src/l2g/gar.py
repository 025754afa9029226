"""Sliding-window and graph-adaptive listwise reranking under a fixed call budget.

Windows move forward through the candidate pool: the best ``w - s`` docs of
each reranked window are carried into the next window and meet ``s`` docs
not seen before; the remaining ``s`` are emitted below. In the adaptive
variant the ``s`` incoming docs alternate between the first-stage order
and a frontier of graph neighbours of the window's top docs. Both variants
issue exactly ``budget(len(pool), w, s)`` reranker calls.
"""

from __future__ import annotations

import heapq
import logging
import math
import random
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

from .corpus_io import DocRef, QueryRecord, QueryStream, RankedList, write_run_file
from .errors import ConfigError, L2GError
from .graph import AffinityGraph, PropagationConfig, StaticAffinity, propagate
from .rerankers import Reranker

log = logging.getLogger(__name__)

MODES = ("sliding", "gar_l2g", "gar_file", "gar_random")
FIRST_STAGE = "first_stage"
FRONTIER = "graph_frontier"


def budget(c: int, w: int, s: int) -> int:
    """Reranker calls needed to slide a size-``w`` window with step ``s`` over ``c`` docs."""
    if c < 1 or w < 1 or s < 1:
        raise ConfigError("pool, window and step must be positive")
    if c <= w:
        return 1
    return math.ceil((c - w) / s) + 1


@dataclass(frozen=True)
class GarConfig:
    window: int = 20
    step: int = 10
    pool_size: int = 100
    mode: str = "sliding"
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    neighbors_per_doc: int = 10
    seed: int = 0
    fill: str = "alternate"
    direction: str = "top_down"

    def __post_init__(self) -> None:
        if min(self.window, self.step, self.pool_size, self.neighbors_per_doc) < 1:
            raise ConfigError("window, step, pool size and neighbours must be positive")
        if self.step > self.window:
            raise ConfigError(f"step {self.step} exceeds window {self.window}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.fill not in ("alternate", "frontier_first"):
            raise ConfigError(f"unknown fill policy {self.fill!r}")
        if self.direction not in ("top_down", "bottom_up"):
            raise ConfigError(f"unknown direction {self.direction!r}")
        if self.direction == "bottom_up" and self.mode != "sliding":
            raise ConfigError("bottom_up windows only apply to sliding mode")

    @property
    def calls_per_query(self) -> int:
        return budget(self.pool_size, self.window, self.step)


@dataclass
class RerankResult:
    docs: list[DocRef]
    window_calls: int
    provenance: dict[str, str]

    def scores(self, c: int | None = None) -> list[float]:
        top = c if c is not None else len(self.docs)
        return [float(top - r) for r in range(len(self.docs))]

    def to_ranked_list(self, qid: str, tag: str = "l2g", c: int | None = None) -> RankedList:
        return RankedList(qid, self.docs, tag, self.scores(c))


# -- neighbour sources -------------------------------------------------------


class LocalNeighbors(Protocol):
    def top(self, doc: DocRef, b: int, exclude: set[str]) -> list[tuple[str, float]]: ...


class NeighborSource(Protocol):
    def local(self, qid: str, pool: Sequence[DocRef]) -> LocalNeighbors | None: ...


class L2GNeighbors:
    """Neighbours from a (possibly growing) listwise-induced graph, pool-restricted."""

    def __init__(self, graph: AffinityGraph, cfg: PropagationConfig | None = None):
        self.graph = graph
        self.cfg = cfg or PropagationConfig()

    def local(self, qid: str, pool: Sequence[DocRef]) -> LocalNeighbors | None:
        if not any(d.external_id in self.graph for d in pool):
            return None
        prop = propagate(self.graph, [d.external_id for d in pool], self.cfg)
        if prop.matrix.nnz == 0:
            return None
        return _PropagatedLocal(prop)


class _PropagatedLocal:
    def __init__(self, prop):
        self.prop = prop
        # pool refs may come from another interner; resolve by external id
        self.by_id = {r.external_id: r for r in prop.refs}

    def top(self, doc: DocRef, b: int, exclude: set[str]) -> list[tuple[str, float]]:
        ref = self.by_id.get(doc.external_id)
        if ref is None:
            return []
        out = []
        for nb, score in self.prop.neighbors(ref, len(self.prop)):
            if nb.external_id not in exclude:
                out.append((nb.external_id, score))
                if len(out) == b:
                    break
        return out


class _StaticLocal:
    def __init__(self, static: StaticAffinity, pool: Sequence[DocRef]):
        self.static = static
        self.pool = {d.external_id: d for d in pool}

    def top(self, doc: DocRef, b: int, exclude: set[str]) -> list[tuple[str, float]]:
        cands = [
            (ext, w)
            for ext, w in self.static.row(doc).items()
            if ext in self.pool and ext not in exclude and ext != doc.external_id and w > 0
        ]
        cands.sort(key=lambda t: (-t[1], self.pool[t[0]].handle))
        return cands[:b]


class FileNeighbors:
    """Neighbours from a precomputed, frozen affinity graph."""

    def __init__(self, source: StaticAffinity | AffinityGraph, cfg: PropagationConfig | None = None):
        self.source = source
        self.cfg = cfg or PropagationConfig(k=1)

    def local(self, qid: str, pool: Sequence[DocRef]) -> LocalNeighbors | None:
        if isinstance(self.source, AffinityGraph):
            return L2GNeighbors(self.source, self.cfg).local(qid, pool)
        return _StaticLocal(self.source, pool)


class _RandomLocal:
    def __init__(self, rng: random.Random, pool: Sequence[DocRef]):
        self.rng = rng
        self.pool = list(pool)

    def top(self, doc: DocRef, b: int, exclude: set[str]) -> list[tuple[str, float]]:
        cands = [d.external_id for d in self.pool if d.external_id not in exclude and d.external_id != doc.external_id]
        picked = self.rng.sample(cands, min(b, len(cands)))
        return [(ext, self.rng.random()) for ext in picked]


class RandomNeighbors:
    """Random pool members as neighbours; the chance-level control."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def local(self, qid: str, pool: Sequence[DocRef]) -> LocalNeighbors:
        return _RandomLocal(random.Random(f"{self.seed}:{qid}"), pool)


# -- reranking loops ---------------------------------------------------------


class _Frontier:
    """Max-priority queue of candidate ids; repeated pushes keep the max key."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, str]] = []
        self._best: dict[str, float] = {}

    def push(self, ext: str, key: float, handle: int) -> None:
        if key <= self._best.get(ext, -math.inf):
            return
        self._best[ext] = key
        heapq.heappush(self._heap, (-round(key, 12), handle, ext))

    def pop(self, seen: set[str]) -> str | None:
        while self._heap:
            negkey, _, ext = heapq.heappop(self._heap)
            if ext in seen or -negkey != round(self._best[ext], 12):
                continue
            return ext
        return None

    def __len__(self) -> int:
        return len(self._heap)


def _forward(
    query: QueryRecord,
    pool: Sequence[DocRef],
    reranker: Reranker,
    w: int,
    s: int,
    local: LocalNeighbors | None = None,
    b: int = 10,
    fill: str = "alternate",
) -> RerankResult:
    pool = list(pool)
    n_calls = budget(len(pool), w, s)
    by_id = {d.external_id: d for d in pool}
    seen: set[str] = set()
    provenance: dict[str, str] = {}
    frontier = _Frontier()
    expanded: set[str] = set()
    cursor = 0

    def from_residual() -> DocRef | None:
        nonlocal cursor
        while cursor < len(pool):
            d = pool[cursor]
            cursor += 1
            if d.external_id not in seen:
                return d
        return None

    def take(doc: DocRef, source: str) -> DocRef:
        seen.add(doc.external_id)
        provenance[doc.external_id] = source
        return doc

    window = []
    while len(window) < w and (d := from_residual()) is not None:
        window.append(take(d, FIRST_STAGE))

    carry = w - s
    emitted: list[DocRef] = []
    ranked: list[DocRef] = []
    for t in range(n_calls):
        ranked = reranker(query, window)
        if t == n_calls - 1:
            break
        emitted.extend(ranked[carry:])
        if local is not None:
            for d in ranked[:s]:
                if d.external_id in expanded:
                    continue
                expanded.add(d.external_id)
                for ext, score in local.top(d, b, seen):
                    frontier.push(ext, score, by_id[ext].handle)
        incoming: list[DocRef] = []
        use_frontier = local is not None
        while len(incoming) < s:
            doc = source = None
            if use_frontier:
                ext = frontier.pop(seen)
                if ext is not None:
                    doc, source = by_id[ext], FRONTIER
            if doc is None:
                doc, source = from_residual(), FIRST_STAGE
            if doc is None and local is not None:
                ext = frontier.pop(seen)
                if ext is not None:
                    doc, source = by_id[ext], FRONTIER
            if doc is None:
                break
            incoming.append(take(doc, source))
            if local is not None and fill == "alternate":
                use_frontier = not use_frontier
        window = ranked[:carry] + incoming

    final = ranked[:carry] + emitted + ranked[carry:]
    final += [take(d, FIRST_STAGE) for d in pool if d.external_id not in seen]
    return RerankResult(final, n_calls, provenance)


def _bottom_up(query: QueryRecord, pool: Sequence[DocRef], reranker: Reranker, w: int, s: int) -> RerankResult:
    work = list(pool)
    n_calls = budget(len(work), w, s)
    for t in range(n_calls):
        start = max(len(work) - w - t * s, 0)
        work[start : start + w] = reranker(query, work[start : start + w])
    return RerankResult(work, n_calls, {d.external_id: FIRST_STAGE for d in work})


def sliding_window(
    pool: RankedList | Sequence[DocRef],
    reranker: Reranker,
    w: int = 20,
    s: int = 10,
    query: QueryRecord | None = None,
    direction: str = "top_down",
) -> RerankResult:
    if s > w:
        raise ConfigError(f"step {s} exceeds window {w}")
    docs, query = _unpack(pool, query)
    if direction == "bottom_up":
        return _bottom_up(query, docs, reranker, w, s)
    return _forward(query, docs, reranker, w, s)


def gar_rerank(
    pool: RankedList | Sequence[DocRef],
    source: NeighborSource | None,
    reranker: Reranker,
    cfg: GarConfig,
    query: QueryRecord | None = None,
) -> RerankResult:
    docs, query = _unpack(pool, query)
    docs = docs[: cfg.pool_size]
    if cfg.mode == "sliding" or source is None:
        return sliding_window(docs, reranker, cfg.window, cfg.step, query, cfg.direction)
    local = source.local(query.qid, docs)
    return _forward(query, docs, reranker, cfg.window, cfg.step, local, cfg.neighbors_per_doc, cfg.fill)


def _unpack(pool: RankedList | Sequence[DocRef], query: QueryRecord | None) -> tuple[list[DocRef], QueryRecord]:
    if isinstance(pool, RankedList):
        return list(pool.docs), query or QueryRecord(pool.qid)
    return list(pool), query or QueryRecord("q")


# -- streams -----------------------------------------------------------------


@dataclass
class StreamOutput:
    results: list[tuple[str, RerankResult]]
    graph: AffinityGraph
    pool_size: int
    tag: str = "l2g"

    @property
    def total_calls(self) -> int:
        return sum(r.window_calls for _, r in self.results)

    def run_lists(self) -> list[RankedList]:
        return [r.to_ranked_list(qid, self.tag, self.pool_size) for qid, r in self.results]

    def run_bytes(self) -> bytes:
        return write_run_file(self.run_lists(), self.tag)

    def provenance_csv(self) -> str:
        rows = ["qid,docid,rank,source"]
        for qid, r in self.results:
            rows += [f"{qid},{d.external_id},{i},{r.provenance[d.external_id]}" for i, d in enumerate(r.docs, start=1)]
        return "\n".join(rows) + "\n"


def _source_for(cfg: GarConfig, graph: AffinityGraph, file_source: NeighborSource | None) -> NeighborSource | None:
    if cfg.mode == "gar_l2g":
        return L2GNeighbors(graph, cfg.propagation)
    if cfg.mode == "gar_file":
        if file_source is None:
            raise ConfigError("mode gar_file needs a file-loaded affinity graph")
        return file_source
    if cfg.mode == "gar_random":
        return RandomNeighbors(cfg.seed)
    return None


def _tag_error(exc: L2GError, qid: str) -> L2GError:
    if exc.args:
        exc.args = (f"query {qid}: {exc.args[0]}",) + exc.args[1:]
    exc.qid = qid  # type: ignore[attr-defined]
    return exc


def run_stream(
    stream: QueryStream,
    cfg: GarConfig,
    reranker: Reranker | None = None,
    graph: AffinityGraph | None = None,
    *,
    file_source: NeighborSource | None = None,
    tag: str = "l2g",
    workers: int = 1,
    reranker_factory: Callable[[], Reranker] | None = None,
) -> StreamOutput:
    """Rerank each query in stream order, then feed its ranking back into the graph.

    The feedback costs no reranker calls. ``workers > 1`` is only allowed in
    sliding mode, where the graph never influences output.
    """
    graph = graph if graph is not None else AffinityGraph()
    source = _source_for(cfg, graph, file_source)
    results: list[tuple[str, RerankResult]] = []
    precomputed: dict[str, RerankResult] = {}
    if workers > 1:
        if cfg.mode != "sliding":
            raise ConfigError("parallel execution is only allowed in sliding mode")
        if reranker_factory is None:
            raise ConfigError("parallel execution needs a reranker factory")
        precomputed = dict(_parallel_sliding(stream, cfg, reranker_factory, workers))
    elif reranker is None:
        raise ConfigError("no reranker given")
    for query, ranked in stream:
        try:
            result = precomputed.get(query.qid) or gar_rerank(ranked, source, reranker, cfg, query)
            results.append((query.qid, result))
            graph.ingest(RankedList(query.qid, result.docs, tag))
        except L2GError as exc:
            raise _tag_error(exc, query.qid)
    return StreamOutput(results, graph, cfg.pool_size, tag)


def _parallel_sliding(stream: QueryStream, cfg: GarConfig, factory: Callable[[], Reranker], workers: int):
    import threading

    local = threading.local()

    def one(item):
        query, ranked = item
        if not hasattr(local, "reranker"):
            local.reranker = factory()
        try:
            return query.qid, gar_rerank(ranked, None, local.reranker, cfg, query)
        except L2GError as exc:
            raise _tag_error(exc, query.qid)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, stream.items))


# -- query order -------------------------------------------------------------


def order_stream(stream: QueryStream, policy: str = "dataset", c: int = 100) -> QueryStream:
    """Reorder a stream: as given, or greedily by maximal/minimal pool overlap.

    The greedy orders seed with the most (least) overlapping pair and then
    append the query whose top-``c`` pool shares the most (fewest) docs with
    everything processed so far. Ties go to the smaller qid.
    """
    if policy == "dataset":
        return QueryStream(list(stream.items))
    if policy not in ("max_overlap", "min_overlap"):
        raise ConfigError(f"unknown order policy {policy!r}")
    items = list(stream.items)
    if len(items) <= 1:
        return QueryStream(items)
    sign = -1 if policy == "max_overlap" else 1
    pools = {q.qid: set(rl.doc_ids[:c]) for q, rl in items}
    by_qid = {q.qid: (q, rl) for q, rl in items}
    qids = sorted(pools)
    best = None
    for i, a in enumerate(qids):
        for bq in qids[i + 1 :]:
            key = (sign * len(pools[a] & pools[bq]), a, bq)
            if best is None or key < best:
                best = key
    assert best is not None
    order = [best[1], best[2]]
    union = pools[best[1]] | pools[best[2]]
    remaining = [q for q in qids if q not in order]
    while remaining:
        nxt = min(remaining, key=lambda q: (sign * len(pools[q] & union), q))
        order.append(nxt)
        union |= pools[nxt]
        remaining.remove(nxt)
    return QueryStream([by_qid[q] for q in order])
