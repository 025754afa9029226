"""Plug an out-of-process reranker into the adaptive loop.

The child process lives for the whole stream and receives one request per
window. Any executable that follows the line protocol works; see
echo_reranker.py next to this file.

Run: python3 demos/06_external_reranker.py
"""

from __future__ import annotations

import sys
from pathlib import Path

from l2g import ExternalReranker, GarConfig, run_stream
from l2g.synthetic import random_stream

plugin = [sys.executable, str(Path(__file__).with_name("echo_reranker.py"))]
stream = random_stream(5, 30, 80, seed=4)
cfg = GarConfig(mode="gar_l2g", pool_size=30, window=10, step=5)

with ExternalReranker(plugin, timeout=10) as reranker:
    out = run_stream(stream, cfg, reranker)

print(f"{out.total_calls} window calls ({cfg.calls_per_query} per query)")
for qid, res in out.results[:3]:
    print(qid, [d.external_id for d in res.docs[:8]])
