"""Listwise-to-graph affinity graphs and graph-aware adaptive reranking."""

from __future__ import annotations

from .benchmark import BenchConfig, bench_batch_scaling, bench_ingest, bench_stream, report_bench
from .corpus_io import (
    DocInterner,
    DocRef,
    QueryRecord,
    QueryStream,
    Qrels,
    RankedList,
    parse_qrels,
    parse_run_file,
    shared_occurrence_share,
    topc_overlap,
    write_qrels,
    write_run_file,
)
from .errors import (
    ChecksumError,
    ConfigError,
    GraphFormatError,
    InputError,
    L2GError,
    NotFoundError,
    ParseError,
    RerankerError,
    TruncatedGraphError,
    VersionMismatchError,
)
from .evaluation import EvalReport, compare_runs, evaluate_run, ndcg_at_k
from .gar import (
    FileNeighbors,
    GarConfig,
    L2GNeighbors,
    RandomNeighbors,
    RerankResult,
    budget,
    gar_rerank,
    order_stream,
    run_stream,
    sliding_window,
)
from .graph import (
    AffinityGraph,
    PropagationConfig,
    StaticAffinity,
    batch_update,
    idf_weight,
    load,
    neighbors,
    propagate,
    save,
    score_vector,
    stats,
    weighted_affinity,
)
from .rerankers import ExternalReranker, IdentityReranker, OracleConfig, OracleReranker, RandomReranker, Reranker, make_reranker

__all__ = [name for name in dir() if not name.startswith("_") and name != "annotations"]
