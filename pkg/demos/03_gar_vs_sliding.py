"""Sliding-window reranking against graph-adaptive reranking at equal budget.

A synthetic clustered corpus plants relevant docs deep in each first-stage
pool. Each mode gets the same number of reranker window calls per query;
the graph modes differ only in which docs they pull into later windows.

With ceil((c - w) / s) + 1 calls, every mode ends up scoring every pool
doc once, so a reliable reranker reaches the same top-10 whichever order
the docs arrive in. Expect the columns to agree closely.

Run: python3 demos/03_gar_vs_sliding.py
"""

from __future__ import annotations

from l2g import GarConfig, budget, compare_runs, evaluate_run, make_reranker, run_stream
from l2g.synthetic import clustered_corpus

corpus = clustered_corpus(n_clusters=20, cluster_size=20, n_queries=60, pool_size=100, deep_fraction=0.3, seed=0)
print(f"{len(corpus.stream)} queries, budget {budget(100, 20, 10)} window calls per query\n")

reports = {}
for spec in ("identity", "noisy:8", "oracle"):
    per_mode = {}
    for mode in ("sliding", "gar_l2g", "gar_random"):
        reranker = make_reranker(spec, corpus.qrels, seed=1)
        out = run_stream(corpus.stream, GarConfig(mode=mode, pool_size=100), reranker)
        assert out.total_calls == len(corpus.stream) * budget(100, 20, 10)
        per_mode[mode] = evaluate_run(out.run_lists(), corpus.qrels, k=10)
    reports[spec] = per_mode

print(compare_runs(reports))
