"""Multi-hop propagation over a candidate pool, and how IDF damps hub documents.

A "hub" doc appears near the top of every list. Without IDF it dominates
everyone's neighbour list; with IDF its weight is divided by log(1 + df).

Run: python3 demos/02_propagation_idf.py
"""

from __future__ import annotations

import random

from l2g import AffinityGraph, PropagationConfig, RankedList, propagate

rng = random.Random(3)
graph = AffinityGraph()
topics = [[f"t{t}d{j}" for j in range(6)] for t in range(4)]
for q in range(40):
    docs = rng.sample(topics[q % 4], 4) + ["hub"]
    rng.shuffle(docs)
    graph.ingest(RankedList(f"q{q}", [graph.interner.intern(d) for d in docs]))

pool = [d for t in topics for d in t] + ["hub"]
focus = graph.interner.lookup("t0d0")

for idf in (False, True):
    for k in (1, 2, 3):
        prop = propagate(graph, pool, PropagationConfig(k=k, idf=idf))
        row = prop.row(focus)
        top = prop.neighbors(focus, 4)
        print(
            f"idf={idf!s:5} k={k}  row sum={sum(row.values()):.6f}  "
            f"hub mass={row.get(graph.handle('hub'), 0.0):.3f}  "
            f"top-4={[d.external_id for d, _ in top]}"
        )
