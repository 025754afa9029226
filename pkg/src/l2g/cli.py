"""Command line entry point: ``l2g {build-graph,rerank,eval,bench,stats}``.

Exit codes: 0 success, 2 configuration, 3 parse/format, 4 reranker, 5 I/O.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import graph as g
from .benchmark import BenchConfig, bench_stream, report_bench
from .corpus_io import QueryStream, parse_qrels, parse_run_file, topc_overlap
from .errors import ConfigError, GraphFormatError, InputError, L2GError, NotFoundError, RerankerError
from .evaluation import evaluate_run
from .gar import FileNeighbors, GarConfig, budget, order_stream, run_stream
from .rerankers import make_reranker
from .synthetic import random_stream

EXIT_OK, EXIT_CONFIG, EXIT_PARSE, EXIT_RERANKER, EXIT_IO = 0, 2, 3, 4, 5
DEFAULT_POOL = 100

log = logging.getLogger("l2g")


def read_config(path: str) -> dict[str, str]:
    """``key=value`` lines; ``#`` comments. Keys use flag spelling without dashes."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _emit(text: str | bytes, out: str | None) -> None:
    data = text.encode("utf-8") if isinstance(text, str) else text
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(out).write_bytes(data)


def _pool(args: argparse.Namespace) -> int:
    return DEFAULT_POOL if args.pool is None else args.pool


def _gar_config(args: argparse.Namespace) -> GarConfig:
    return GarConfig(
        window=args.window,
        step=args.step,
        pool_size=_pool(args),
        mode=args.mode,
        propagation=g.PropagationConfig(k=args.hops),
        neighbors_per_doc=args.neighbors,
        seed=args.seed,
        fill=args.fill,
        direction=args.direction,
    )


def cmd_build_graph(args: argparse.Namespace) -> int:
    if not args.run:
        raise ConfigError("build-graph needs at least one --run")
    graph = g.load(args.append) if args.append else g.AffinityGraph()
    for path in args.run:
        for ranked in parse_run_file(Path(path), graph.interner):
            graph.ingest(ranked.truncate(args.pool) if args.pool else ranked)
    if args.out:
        g.save(graph, args.out)
    print(graph.stats().to_csv(), end="")
    return EXIT_OK


def cmd_rerank(args: argparse.Namespace) -> int:
    cfg = _gar_config(args)
    graph = g.AffinityGraph()
    file_source = None
    if args.graph:
        loaded = g.load_affinity_file(args.graph)
        if cfg.mode == "gar_file":
            file_source = FileNeighbors(loaded, cfg.propagation)
        elif isinstance(loaded, g.AffinityGraph):
            graph = loaded
        else:
            raise ConfigError("only l2g graph files can warm-start the L2G graph")
    elif cfg.mode == "gar_file":
        raise ConfigError("--mode gar_file needs --graph")
    lists = [rl.truncate(cfg.pool_size) for rl in parse_run_file(Path(args.run), graph.interner)]
    stream = order_stream(QueryStream.from_lists(lists), args.order.replace("-", "_"), cfg.pool_size)
    qrels = parse_qrels(Path(args.qrels)) if args.qrels else None

    def factory():
        return make_reranker(args.reranker, qrels, args.seed, args.timeout)

    if args.parallel > 1:
        out = run_stream(stream, cfg, graph=graph, tag=args.tag, workers=args.parallel, reranker_factory=factory)
    else:
        with factory() as reranker:
            out = run_stream(stream, cfg, reranker, graph, file_source=file_source, tag=args.tag)
            if out.total_calls != reranker.calls:
                raise RerankerError(f"call accounting mismatch: {reranker.calls} vs {out.total_calls}")
    _emit(out.run_bytes(), args.out)
    if args.provenance:
        Path(args.provenance).write_text(out.provenance_csv(), encoding="utf-8")
    if args.graph_out:
        g.save(out.graph, args.graph_out)
    per_query = {budget(len(rl), cfg.window, cfg.step) for rl in stream.lists}
    per = next(iter(per_query)) if len(per_query) == 1 else "varies"
    print(f"window calls: {out.total_calls} total, {per} per query", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    run = parse_run_file(Path(args.run))
    qrels = parse_qrels(Path(args.qrels))
    report = evaluate_run(run, qrels, args.k, args.gain)
    lines = [f"qid,ndcg@{args.k}"]
    lines += [f"{qid},{v:.4f}" for qid, v in report.per_query.items()]
    lines.append(f"mean,{100 * report.mean:.1f}")
    lines.append(f"skipped,{report.skipped}")
    text = "\n".join(lines) + "\n"
    if report.all_skipped:
        print("warning: no query in the run has relevant judgments; all skipped", file=sys.stderr)
    _emit(text, args.out)
    if args.out and args.out != "-":
        print(f"mean nDCG@{args.k}: {100 * report.mean:.1f} over {len(report.per_query)} queries ({report.skipped} skipped)")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    if args.run:
        stream = QueryStream.from_lists(parse_run_file(Path(args.run)))
    elif args.synthetic:
        stream = random_stream(args.synthetic, args.k, args.vocab, args.seed)
    else:
        raise ConfigError("bench needs --run or --synthetic")
    cfg = BenchConfig(
        pool_size=_pool(args),
        propagation=g.PropagationConfig(k=args.hops),
        neighbors_per_doc=args.neighbors,
        warmup=args.warmup,
        repetitions=args.repetitions,
    )
    report = bench_stream(stream, cfg)
    _emit(report_bench(report.records, report.summary), args.out)
    s = report.summary
    print(
        f"ingest slope {s.ingest_slope_per_100:.3e} s/100q vs median {s.phases['ingest']['median']:.3e} s: "
        f"{'flat' if s.ingest_flat else 'NOT flat'}; peak {s.peak_bytes} bytes",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    if args.graph:
        _emit(g.load(args.graph).stats().to_csv(), args.out)
        return EXIT_OK
    if not args.run:
        raise ConfigError("stats needs --run or --graph")
    lists = parse_run_file(Path(args.run))
    docs = {d for rl in lists for d in rl.doc_ids}
    lines = [f"Query count: {len(lists)}", f"Distinct docs: {len(docs)}"]
    if lists:
        lines.append(f"Top-{_pool(args)} overlap (%): {topc_overlap(lists, _pool(args)):.1f}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="key=value file of flag defaults")
    shared.add_argument("--qrels", help="qrels file")
    shared.add_argument("--graph", help="graph file (l2g binary or edge list)")
    shared.add_argument("--mode", default="sliding", choices=["sliding", "gar_l2g", "gar_file", "gar_random"])
    shared.add_argument("--window", type=int, default=20)
    shared.add_argument("--step", type=int, default=10)
    shared.add_argument("--pool", type=int, help="top-c pool size (default 100; build-graph keeps full lists)")
    shared.add_argument("--hops", type=int, default=3)
    shared.add_argument("--neighbors", type=int, default=10)
    shared.add_argument("--reranker", default="identity")
    shared.add_argument("--order", default="dataset", choices=["dataset", "max-overlap", "min-overlap"])
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--out", help="output path (default stdout)")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="l2g", description="Listwise-to-graph reranking toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", parents=[shared], help="build an L2G graph from run files")
    p.set_defaults(func=cmd_build_graph)
    p.add_argument("--run", action="append", help="run file (repeatable)")
    p.add_argument("--append", help="existing graph file to extend")

    p = sub.add_parser("rerank", parents=[shared], help="rerank a run under a call budget")
    p.set_defaults(func=cmd_rerank)
    p.add_argument("--run", help="TREC run file")
    p.add_argument("--provenance", help="per-doc provenance CSV output")
    p.add_argument("--graph-out", help="save the grown L2G graph here")
    p.add_argument("--tag", default="l2g")
    p.add_argument("--fill", default="alternate", choices=["alternate", "frontier_first"])
    p.add_argument("--direction", default="top_down", choices=["top_down", "bottom_up"])
    p.add_argument("--timeout", type=float, default=60.0, help="external reranker timeout per window (s)")
    p.add_argument("--parallel", type=int, default=1, help="worker threads (sliding mode only)")

    p = sub.add_parser("eval", parents=[shared], help="nDCG@k of a run")
    p.set_defaults(func=cmd_eval)
    p.add_argument("--run", help="TREC run file")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--gain", default="exponential", choices=["exponential", "linear"])

    p = sub.add_parser("bench", parents=[shared], help="per-query latency and footprint")
    p.set_defaults(func=cmd_bench)
    p.add_argument("--run", help="TREC run file")
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--synthetic", type=int, help="benchmark a random stream of this many queries")
    p.add_argument("--k", type=int, default=20, help="list length of synthetic queries")
    p.add_argument("--vocab", type=int, default=5000, help="doc vocabulary of synthetic queries")

    p = sub.add_parser("stats", parents=[shared], help="run-file or graph-file statistics")
    p.set_defaults(func=cmd_stats)
    p.add_argument("--run", help="TREC run file")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        defaults = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]  # type: ignore[union-attr]
        known = {a.dest: a for a in sub._actions}
        typed = {}
        for key, value in defaults.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            action = known[key]
            typed[key] = action.type(value) if action.type else value
            if isinstance(action, argparse._AppendAction):
                typed[key] = [typed[key]]
        sub.set_defaults(**typed)
        args = parser.parse_args(argv)
    return args


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        if args.step > args.window:
            raise ConfigError(f"--step {args.step} exceeds --window {args.window}")
        if args.command == "rerank" and args.reranker.split(":")[0] in ("oracle", "noisy") and not args.qrels:
            raise ConfigError(f"--reranker {args.reranker} needs --qrels")
        if args.command == "eval" and not (args.run and args.qrels):
            raise ConfigError("eval needs --run and --qrels")
        if args.command == "rerank" and not args.run:
            raise ConfigError("rerank needs --run")
        return args.func(args)
    except ConfigError as exc:
        print(f"l2g: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RerankerError as exc:
        print(f"l2g: reranker error: {exc}", file=sys.stderr)
        return EXIT_RERANKER
    except (InputError, GraphFormatError, NotFoundError) as exc:
        print(f"l2g: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"l2g: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except L2GError as exc:
        print(f"l2g: error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
