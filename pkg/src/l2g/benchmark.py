"""Per-query latency and footprint measurement for the L2G adaptive stage.

Timing covers only graph work (ingest, pool-restricted propagation,
neighbour reads). Reranker calls and file I/O are outside the timed scope.
"""

from __future__ import annotations

import gc
import random
import time
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .corpus_io import DocInterner, QueryStream, RankedList
from .errors import InputError
from .graph import AffinityGraph, PropagationConfig, batch_update, propagate
from .synthetic import random_stream

PHASES = ("ingest", "propagate", "neighbors")


@dataclass(frozen=True)
class BenchRecord:
    query_index: int
    ingest_seconds: float
    propagate_seconds: float
    neighbors_seconds: float
    graph_bytes: int
    pool_size: int
    new_docs: int


@dataclass(frozen=True)
class BenchConfig:
    pool_size: int = 100
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    committed: int = 10
    neighbors_per_doc: int = 10
    warmup: int = 3
    repetitions: int = 1
    flat_tolerance: float = 0.05


@dataclass
class BenchSummary:
    phases: dict[str, dict[str, float]]
    peak_bytes: int
    measured: int
    ingest_slope_per_100: float
    ingest_flat: bool


@dataclass
class BenchReport:
    records: list[BenchRecord]
    summary: BenchSummary | None


@contextmanager
def _no_gc() -> Iterator[None]:
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def summarize(values: Sequence[float]) -> dict[str, float]:
    if not values:
        return {"median": 0.0, "mean": 0.0, "p95": 0.0}
    arr = np.asarray(values, dtype=float)
    return {"median": float(np.median(arr)), "mean": float(arr.mean()), "p95": float(np.percentile(arr, 95))}


def slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``ys`` on ``xs``."""
    if len(xs) < 2:
        return 0.0
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    x = x - x.mean()
    denom = float(x @ x)
    return 0.0 if denom == 0 else float(x @ (y - y.mean())) / denom


def _one_pass(lists: Sequence[RankedList], cfg: BenchConfig) -> list[BenchRecord]:
    graph = AffinityGraph()
    clock = time.perf_counter
    out = []
    for i, ranked in enumerate(lists):
        pool = ranked.doc_ids[: cfg.pool_size]
        t0 = clock()
        new = graph.ingest(ranked)
        t1 = clock()
        prop = propagate(graph, pool, cfg.propagation)
        t2 = clock()
        for ext in pool[: cfg.committed]:
            prop.neighbors(graph.interner.lookup(ext), cfg.neighbors_per_doc)
        t3 = clock()
        out.append(BenchRecord(i, t1 - t0, t2 - t1, t3 - t2, graph.stats().estimated_bytes, len(pool), new))
    return out


def bench_stream(stream: QueryStream | Sequence[RankedList], cfg: BenchConfig | None = None) -> BenchReport:
    """Time ingest, propagation and neighbour reads for every query of a stream.

    With several repetitions each phase keeps its fastest time per query.
    """
    cfg = cfg or BenchConfig()
    lists = stream.lists if isinstance(stream, QueryStream) else list(stream)
    if not lists:
        raise InputError("cannot benchmark an empty stream")
    with _no_gc():
        passes = [_one_pass(lists, cfg) for _ in range(max(1, cfg.repetitions))]
    records = []
    for i in range(len(lists)):
        reps = [p[i] for p in passes]
        r = reps[-1]
        records.append(
            BenchRecord(
                i,
                min(x.ingest_seconds for x in reps),
                min(x.propagate_seconds for x in reps),
                min(x.neighbors_seconds for x in reps),
                r.graph_bytes,
                r.pool_size,
                r.new_docs,
            )
        )
    return BenchReport(records, summarize_records(records, cfg))


@dataclass(frozen=True)
class IngestScaling:
    seconds: list[float]
    median: float
    slope_per_100: float
    tolerance: float

    @property
    def ratio(self) -> float:
        return self.slope_per_100 / self.median if self.median else 0.0

    @property
    def flat(self) -> bool:
        return self.slope_per_100 <= self.tolerance * self.median


def bench_ingest(
    stream: QueryStream | Sequence[RankedList],
    repetitions: int = 5,
    warmup: int = 3,
    tolerance: float = 0.05,
) -> IngestScaling:
    """Time ingest alone over a stream, keeping the fastest of ``repetitions`` per query.

    Unlike ``bench_stream`` no propagation runs between ingests, so the
    measurement isolates ingest cost from cache pressure of the other phases.
    """
    lists = stream.lists if isinstance(stream, QueryStream) else list(stream)
    if not lists:
        raise InputError("cannot benchmark an empty stream")
    clock = time.perf_counter
    best = [float("inf")] * len(lists)
    with _no_gc():
        for _ in range(max(1, repetitions)):
            graph = AffinityGraph()
            for i, ranked in enumerate(lists):
                t0 = clock()
                graph.ingest(ranked)
                best[i] = min(best[i], clock() - t0)
    kept = best[warmup:]
    per_100 = 100 * slope(range(warmup, len(lists)), kept)
    return IngestScaling(best, float(np.median(kept)), per_100, tolerance)


def summarize_records(records: Sequence[BenchRecord], cfg: BenchConfig | None = None) -> BenchSummary:
    cfg = cfg or BenchConfig()
    kept = list(records[cfg.warmup :])
    ingest = [r.ingest_seconds for r in kept]
    phases = {
        "ingest": summarize(ingest),
        "propagate": summarize([r.propagate_seconds for r in kept]),
        "neighbors": summarize([r.neighbors_seconds for r in kept]),
    }
    per_100 = 100 * slope([r.query_index for r in kept], ingest)
    flat = per_100 <= cfg.flat_tolerance * phases["ingest"]["median"]
    peak = max((r.graph_bytes for r in records), default=0)
    return BenchSummary(phases, peak, len(kept), per_100, flat)


def report_bench(records: Sequence[BenchRecord], summary: BenchSummary | None = None) -> str:
    lines = ["q,ingest_s,prop_s,nbr_s,bytes,pool,new_docs"]
    for r in records:
        lines.append(
            f"{r.query_index},{r.ingest_seconds:.9f},{r.propagate_seconds:.9f},{r.neighbors_seconds:.9f},"
            f"{r.graph_bytes},{r.pool_size},{r.new_docs}"
        )
    if summary is not None and records:
        lines.append("")
        lines.append("# summary")
        lines.append("phase,median_s,mean_s,p95_s")
        for phase, s in summary.phases.items():
            lines.append(f"{phase},{s['median']:.9f},{s['mean']:.9f},{s['p95']:.9f}")
        lines.append(f"# measured_queries,{summary.measured}")
        lines.append(f"# peak_bytes,{summary.peak_bytes}")
        lines.append(f"# ingest_slope_per_100_queries_s,{summary.ingest_slope_per_100:.3e}")
        lines.append(f"# ingest_flat,{'yes' if summary.ingest_flat else 'no'}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class BatchScaling:
    base_docs: int
    delta: int
    seconds: float
    double_seconds: float

    @property
    def ratio(self) -> float:
        return self.double_seconds / self.seconds


def _new_doc_batch(rng: random.Random, interner: DocInterner, old: Sequence[str], n_lists: int, k: int, tag: str) -> list[RankedList]:
    half = k // 2
    lists = []
    fresh = 0
    for i in range(n_lists):
        ids = [f"{tag}{fresh + j}" for j in range(k - half)] + rng.sample(old, half)
        fresh += k - half
        rng.shuffle(ids)
        lists.append(RankedList(f"{tag}q{i}", [interner.intern(x) for x in ids], tag))
    return lists


def bench_batch_scaling(
    delta: int = 2000,
    base_queries: int = 200,
    k: int = 20,
    vocab: int = 2000,
    repetitions: int = 7,
    seed: int = 0,
) -> BatchScaling:
    """Time batch updates introducing ``delta`` and ``2 * delta`` unseen docs.

    Each batch list carries ``k/2`` unseen docs and ``k/2`` docs from the
    existing pool, so the batch size grows with the number of new docs while
    the old pool stays fixed.
    """
    rng = random.Random(seed)
    base = AffinityGraph()
    for rl in random_stream(base_queries, k, vocab, seed, base.interner, "base").lists:
        base.ingest(rl)
    old = base.interner.ids()
    per_list = k - k // 2
    sizes = ((delta, "a"), (2 * delta, "b"))
    best = [float("inf")] * len(sizes)
    # alternate the two sizes so slow drift in machine state hits both alike
    for _ in range(max(1, repetitions)):
        for i, (n_new, tag) in enumerate(sizes):
            graph = base.copy()
            batch = _new_doc_batch(rng, graph.interner, old, max(1, n_new // per_list), k, tag)
            with _no_gc():
                t0 = time.perf_counter()
                batch_update(graph, batch)
                best[i] = min(best[i], time.perf_counter() - t0)
    return BatchScaling(base.doc_count, delta, best[0], best[1])
