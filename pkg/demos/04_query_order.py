"""How arrival order shapes the graph seen by each query.

The adaptive graph only knows queries that came earlier in the stream.
This demo reorders a stream three ways and reports, for each query, how
many of its pool docs the graph had already seen when it arrived.

Run: python3 demos/04_query_order.py
"""

from __future__ import annotations

from l2g import AffinityGraph, order_stream, topc_overlap
from l2g.synthetic import clustered_corpus

corpus = clustered_corpus(n_clusters=40, cluster_size=12, n_queries=80, pool_size=20, core_size=6, relevant_per_query=4, shallow_depth=10, seed=2)
print(f"share of top-20 pool entries shared with another query: {topc_overlap(corpus.stream, 20):.1f}%\n")

for policy in ("dataset", "max_overlap", "min_overlap"):
    stream = order_stream(corpus.stream, policy, c=20)
    graph = AffinityGraph()
    seen_share = []
    for _, ranked in stream:
        pool = ranked.doc_ids[:20]
        seen_share.append(sum(graph.df(d) > 0 for d in pool) / len(pool))
        graph.ingest(ranked)
    first_half = sum(seen_share[: len(seen_share) // 2]) / (len(seen_share) // 2)
    print(f"{policy:12} first five qids {stream.qids[:5]}  mean seen share in first half {first_half:.2f}")
