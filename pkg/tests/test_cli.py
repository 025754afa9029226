from __future__ import annotations

import sys

import pytest

from l2g import graph as g
from l2g.cli import main
from l2g.corpus_io import parse_run_file, write_qrels, write_run_file
from l2g.synthetic import clustered_corpus

TOY_RUN = "q1 Q0 d1 1 3.0 bm25\nq1 Q0 d2 2 2.0 bm25\nq1 Q0 d3 3 1.0 bm25\nq2 Q0 d2 1 3.0 bm25\nq2 Q0 d3 2 2.0 bm25\nq2 Q0 d4 3 1.0 bm25\n"


@pytest.fixture
def files(tmp_path):
    run = tmp_path / "toy.run"
    run.write_text(TOY_RUN)
    corpus = clustered_corpus(n_clusters=4, n_queries=8, pool_size=60, seed=5)
    crun = tmp_path / "c.run"
    crun.write_bytes(write_run_file(corpus.stream.lists, "bm25"))
    qrels = tmp_path / "c.qrels"
    qrels.write_bytes(write_qrels(corpus.qrels))
    return tmp_path, run, crun, qrels


def test_build_graph_toy(files, capsys):
    tmp, run, *_ = files
    out = tmp / "g.bin"
    assert main(["build-graph", "--run", str(run), "--out", str(out)]) == 0
    assert capsys.readouterr().out.splitlines()[1].split(",")[:3] == ["4", "5", "2"]
    assert g.load(out).edge_count == 5
    again = tmp / "g2.bin"
    main(["build-graph", "--run", str(run), "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_build_graph_append_equals_one_shot(files):
    tmp, run, crun, _ = files
    main(["build-graph", "--run", str(run), "--out", str(tmp / "a.bin")])
    main(["build-graph", "--run", str(crun), "--append", str(tmp / "a.bin"), "--out", str(tmp / "b.bin")])
    main(["build-graph", "--run", str(run), "--run", str(crun), "--out", str(tmp / "c.bin")])
    assert (tmp / "b.bin").read_bytes() == (tmp / "c.bin").read_bytes()


def test_rerank_identity_is_fixed_point(files, capsys):
    tmp, run, crun, _ = files
    out = tmp / "out.run"
    assert main(["rerank", "--run", str(crun), "--pool", "60", "--out", str(out)]) == 0
    before = parse_run_file(crun)
    after = parse_run_file(out)
    assert [rl.doc_ids for rl in after] == [rl.doc_ids for rl in before]
    assert "window calls: 40 total, 5 per query" in capsys.readouterr().err


def test_rerank_reports_nine_calls_per_query(files, capsys):
    tmp, _, _, _ = files
    run = tmp / "big.run"
    run.write_text("".join(f"q Q0 d{i} {i + 1} {100 - i} x\n" for i in range(100)))
    assert main(["rerank", "--run", str(run), "--out", str(tmp / "o.run")]) == 0
    assert "9 per query" in capsys.readouterr().err


def test_rerank_outputs_are_deterministic(files):
    tmp, _, crun, qrels = files
    args = ["rerank", "--run", str(crun), "--qrels", str(qrels), "--mode", "gar_l2g", "--reranker", "noisy:4", "--pool", "60"]
    main(args + ["--out", str(tmp / "a.run"), "--provenance", str(tmp / "a.csv")])
    main(args + ["--out", str(tmp / "b.run"), "--provenance", str(tmp / "b.csv")])
    assert (tmp / "a.run").read_bytes() == (tmp / "b.run").read_bytes()
    assert (tmp / "a.csv").read_bytes() == (tmp / "b.csv").read_bytes()
    assert (tmp / "a.csv").read_text().startswith("qid,docid,rank,source\n")


def test_rerank_gar_oracle_not_worse_than_sliding(files, capsys):
    tmp, _, crun, qrels = files
    means = {}
    for mode in ("sliding", "gar_l2g"):
        out = tmp / f"{mode}.run"
        main(["rerank", "--run", str(crun), "--qrels", str(qrels), "--mode", mode, "--reranker", "oracle", "--pool", "60", "--out", str(out)])
        main(["eval", "--run", str(out), "--qrels", str(qrels), "--out", str(tmp / f"{mode}.csv")])
        means[mode] = float((tmp / f"{mode}.csv").read_text().splitlines()[-2].split(",")[1])
    assert means["gar_l2g"] >= means["sliding"]


def test_rerank_gar_file_and_graph_out(files):
    tmp, run, crun, _ = files
    edges = tmp / "edges.txt"
    edges.write_text("c00d00 c00d05 1.0\n")
    assert main(["rerank", "--run", str(crun), "--mode", "gar_file", "--graph", str(edges), "--pool", "60", "--out", str(tmp / "f.run")]) == 0
    assert main(["rerank", "--run", str(crun), "--mode", "gar_l2g", "--pool", "60", "--out", str(tmp / "l.run"), "--graph-out", str(tmp / "grown.bin")]) == 0
    assert g.load(tmp / "grown.bin").m == 8


def test_rerank_external_plugin(files):
    tmp, run, *_ = files
    prog = "import json,sys\nfor l in sys.stdin:\n    r=json.loads(l)\n    print(json.dumps({'docids': r['docids'][::-1]}), flush=True)"
    plugin = tmp / "rev.py"
    plugin.write_text(prog)
    out = tmp / "x.run"
    assert main(["rerank", "--run", str(run), "--reranker", f"external:{sys.executable} {plugin}", "--out", str(out)]) == 0
    assert parse_run_file(out)[0].doc_ids == ["d3", "d2", "d1"]


def test_eval_perfect_and_skipped(files, capsys, tmp_path):
    run = tmp_path / "p.run"
    run.write_text("q1 Q0 a 1 2.0 x\nq1 Q0 b 2 1.0 x\n")
    qrels = tmp_path / "p.qrels"
    qrels.write_text("q1 0 a 1\n")
    assert main(["eval", "--run", str(run), "--qrels", str(qrels)]) == 0
    out = capsys.readouterr()
    assert "mean,100.0" in out.out
    other = tmp_path / "o.qrels"
    other.write_text("zz 0 a 1\n")
    assert main(["eval", "--run", str(run), "--qrels", str(other)]) == 0
    out = capsys.readouterr()
    assert "all skipped" in out.err
    assert "skipped,1" in out.out


def test_bench_synthetic_and_run(files, tmp_path):
    _, run, *_ = files
    out = tmp_path / "b.csv"
    assert main(["bench", "--run", str(run), "--warmup", "0", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "q,ingest_s,prop_s,nbr_s,bytes,pool,new_docs"
    assert sum(1 for line in lines if line[:1].isdigit()) == 2
    assert "# measured_queries,2" in lines
    one = tmp_path / "one.run"
    one.write_text("q Q0 a 1 1.0 x\n")
    main(["bench", "--run", str(one), "--out", str(tmp_path / "one.csv")])
    assert sum(1 for line in (tmp_path / "one.csv").read_text().splitlines() if line[:1].isdigit()) == 1
    assert main(["bench", "--synthetic", "60", "--out", str(tmp_path / "s.csv")]) == 0
    assert "# ingest_flat," in (tmp_path / "s.csv").read_text()


def test_stats(files, capsys, tmp_path):
    _, run, *_ = files
    assert main(["stats", "--run", str(run), "--pool", "3"]) == 0
    out = capsys.readouterr().out
    assert "Query count: 2" in out and "Distinct docs: 4" in out and "Top-3 overlap (%): 66.7" in out
    empty = tmp_path / "e.bin"
    g.save(g.AffinityGraph(), empty)
    assert main(["stats", "--graph", str(empty)]) == 0
    assert capsys.readouterr().out == "docs,edges,queries,bytes\n0,0,0,0\n"
    many = tmp_path / "m.run"
    many.write_text("".join(f"q{i} Q0 d 1 1.0 x\n" for i in range(43)))
    main(["stats", "--run", str(many)])
    assert "Query count: 43" in capsys.readouterr().out


def test_config_file_sets_defaults(files, capsys, tmp_path):
    _, _, crun, _ = files
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# defaults\nwindow = 10\nstep=5\npool=60\n")
    assert main(["rerank", "--config", str(cfg), "--run", str(crun), "--out", str(tmp_path / "o.run")]) == 0
    assert "11 per query" in capsys.readouterr().err
    assert main(["rerank", "--config", str(cfg), "--run", str(crun), "--step", "10", "--out", str(tmp_path / "o.run")]) == 0
    assert "6 per query" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour=blue\n")
    assert main(["rerank", "--config", str(bad), "--run", str(crun)]) == 2


def test_exit_codes(files, tmp_path):
    _, run, crun, qrels = files
    assert main(["rerank", "--run", str(run), "--window", "5", "--step", "10"]) == 2
    assert main(["rerank", "--run", str(run), "--reranker", "oracle"]) == 2
    assert main(["rerank", "--run", str(run), "--mode", "gar_file"]) == 2
    assert main(["rerank", "--run", str(run), "--mode", "gar_l2g", "--parallel", "2"]) == 2
    assert main(["eval", "--run", str(run)]) == 2
    bad = tmp_path / "bad.run"
    bad.write_text("q1 Q0 a\n")
    assert main(["stats", "--run", str(bad)]) == 3
    assert main(["stats", "--graph", str(run)]) == 3
    assert main(["rerank", "--run", str(run), "--reranker", f"external:{sys.executable} -c pass"]) == 4
    assert main(["stats", "--run", str(tmp_path / "missing.run")]) == 5
    with pytest.raises(SystemExit) as exc:
        main(["rerank", "--mode", "nonsense"])
    assert exc.value.code == 2
