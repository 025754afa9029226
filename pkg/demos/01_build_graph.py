"""Build an affinity graph from a tiny query log, inspect it, save and reload it.

Run: python3 demos/01_build_graph.py
"""

from __future__ import annotations

import io

from l2g import AffinityGraph, load, parse_run_file, save, score_vector

RUN = b"""\
q1 Q0 d1 1 3.0 bm25
q1 Q0 d2 2 2.0 bm25
q1 Q0 d3 3 1.0 bm25
q2 Q0 d2 1 3.0 bm25
q2 Q0 d3 2 2.0 bm25
q2 Q0 d4 3 1.0 bm25
q3 Q0 d5 1 2.0 bm25
q3 Q0 d1 2 1.0 bm25
"""

graph = AffinityGraph()
for ranked in parse_run_file(io.BytesIO(RUN), graph.interner):
    # rank r in a list of length k contributes weight k - r + 1
    print(ranked.qid, {d.external_id: s for d, s in score_vector(ranked).items()})
    graph.ingest(ranked)

print()
print("raw affinity d2-d3:", graph.raw("d2", "d3"), "(2*1 from q1 plus 3*2 from q2)")
print("raw affinity d1-d1:", graph.raw("d1", "d1"))
print("document frequency of d2:", graph.df("d2"))
print(graph.stats())

blob = save(graph)
again = load(blob)
print()
print(f"serialized to {len(blob)} bytes; reload identical:", save(again) == blob)
