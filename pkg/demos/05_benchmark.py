"""Per-query cost of the adaptive stage on a synthetic stream.

Times ingest, pool propagation and neighbour reads per query, then checks
that ingest cost does not grow with the number of queries already seen and
that a batch update scales with the number of new docs it introduces.

Run: python3 demos/05_benchmark.py
"""

from __future__ import annotations

from l2g import BenchConfig, bench_batch_scaling, bench_ingest, bench_stream
from l2g.synthetic import random_stream

stream = random_stream(300, 100, 5000, seed=0)
report = bench_stream(stream, BenchConfig(pool_size=100, repetitions=2))
s = report.summary
for phase, v in s.phases.items():
    print(f"{phase:10} median {1e6 * v['median']:8.1f} us   p95 {1e6 * v['p95']:8.1f} us")
print(f"peak estimated graph size: {s.peak_bytes / 1e6:.1f} MB")

ing = bench_ingest(random_stream(500, 20, 5000, seed=1), repetitions=5)
print(f"\ningest slope: {100 * ing.ratio:+.1f}% of median per 100 queries (flat: {ing.flat})")

scale = bench_batch_scaling(delta=2000)
print(f"batch update: {1e3 * scale.seconds:.1f} ms for 2000 new docs, "
      f"{1e3 * scale.double_seconds:.1f} ms for 4000 (ratio {scale.ratio:.2f})")
