"""Minimal external reranker speaking the line protocol.

Reads one JSON object per line, {"qid", "query", "docids"}, and answers
with {"docids": [...]} holding a permutation. This one sorts by docid,
which is enough to show the plumbing.
"""

import json
import sys

for line in sys.stdin:
    req = json.loads(line)
    print(json.dumps({"docids": sorted(req["docids"])}), flush=True)
