"""Seeded synthetic streams for tests, demos and benchmarks."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .corpus_io import DocInterner, QueryRecord, QueryStream, Qrels, RankedList


def random_stream(
    m: int,
    k: int,
    vocab: int,
    seed: int = 0,
    interner: DocInterner | None = None,
    prefix: str = "q",
) -> QueryStream:
    """``m`` queries, each a random ordering of ``k`` distinct docs out of ``vocab``."""
    rng = random.Random(seed)
    interner = interner if interner is not None else DocInterner()
    items = []
    for i in range(m):
        docs = [interner.intern(f"d{j}") for j in rng.sample(range(vocab), k)]
        qid = f"{prefix}{i}"
        items.append((QueryRecord(qid), RankedList(qid, docs, "synthetic")))
    return QueryStream(items)


@dataclass
class ClusteredCorpus:
    stream: QueryStream
    qrels: Qrels
    clusters: dict[str, int]


def clustered_corpus(
    n_clusters: int = 20,
    cluster_size: int = 20,
    n_queries: int = 60,
    pool_size: int = 100,
    core_size: int = 10,
    relevant_per_query: int = 8,
    deep_fraction: float = 0.3,
    shallow_depth: int = 20,
    seed: int = 0,
    interner: DocInterner | None = None,
) -> ClusteredCorpus:
    """First-stage pools over a clustered corpus with planted relevance.

    Query ``i`` belongs to cluster ``i % n_clusters``. Each cluster has a
    core of ``core_size`` docs and every query of the cluster judges a random
    ``relevant_per_query`` of them relevant, so related queries share
    relevant docs. A ``deep_fraction`` share of each query's relevant docs
    is placed below rank ``shallow_depth``; the rest sit above it. Other
    slots hold non-core docs of the same cluster and docs of other clusters.
    """
    rng = random.Random(seed)
    interner = interner if interner is not None else DocInterner()
    ids = [[f"c{c:02d}d{j:02d}" for j in range(cluster_size)] for c in range(n_clusters)]
    clusters = {d: c for c, docs in enumerate(ids) for d in docs}
    all_docs = [d for docs in ids for d in docs]
    items = []
    qrels = Qrels()
    for i in range(n_queries):
        qid = f"q{i:03d}"
        c = i % n_clusters
        core = ids[c][:core_size]
        relevant = rng.sample(core, relevant_per_query)
        for d in relevant:
            qrels.set(qid, d, 1)
        n_deep = round(deep_fraction * len(relevant))
        deep, shallow = relevant[:n_deep], relevant[n_deep:]
        rel_set = set(relevant)
        same = [d for d in ids[c] if d not in rel_set]
        other = [d for d in all_docs if clusters[d] != c]
        fillers = same + rng.sample(other, pool_size - len(relevant) - len(same))
        rng.shuffle(fillers)
        pool: list[str | None] = [None] * pool_size
        for d, pos in zip(shallow, rng.sample(range(shallow_depth), len(shallow))):
            pool[pos] = d
        for d, pos in zip(deep, rng.sample(range(shallow_depth, pool_size), len(deep))):
            pool[pos] = d
        it = iter(fillers)
        docs = [interner.intern(d if d is not None else next(it)) for d in pool]
        items.append((QueryRecord(qid, f"topic {c}"), RankedList(qid, docs, "bm25")))
    return ClusteredCorpus(QueryStream(items), qrels, clusters)
