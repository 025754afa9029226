"""nDCG@k scoring and Table-style run comparison."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from .corpus_io import Qrels, RankedList
from .errors import InputError

GAINS = ("exponential", "linear")


def _gain(grade: int, kind: str) -> float:
    if kind == "exponential":
        return float(2**grade - 1)
    return float(grade)


def dcg(grades: Iterable[int], k: int, gain: str = "exponential") -> float:
    total = 0.0
    for i, g in enumerate(grades, start=1):
        if i > k:
            break
        if g:
            total += _gain(g, gain) / math.log2(i + 1)
    return total


def ndcg_at_k(ranking: RankedList, qrels: Qrels, k: int = 10, gain: str = "exponential") -> float | None:
    """nDCG@k of one ranking, or None when the query has no relevant judgments.

    The ideal ordering is taken over every judged document of the query, not
    only the retrieved ones.
    """
    if k < 1:
        raise InputError("k must be positive")
    if gain not in GAINS:
        raise InputError(f"unknown gain {gain!r}")
    judged = qrels.judged(ranking.qid)
    ideal = dcg(sorted(judged.values(), reverse=True), k, gain)
    if ideal == 0:
        return None
    return dcg((judged.get(d, 0) for d in ranking.doc_ids), k, gain) / ideal


@dataclass
class EvalReport:
    per_query: dict[str, float] = field(default_factory=dict)
    mean: float = 0.0
    skipped: int = 0
    k: int = 10

    @property
    def all_skipped(self) -> bool:
        return not self.per_query

    def to_tsv(self) -> str:
        return "".join(f"{qid}\t{v:.4f}\n" for qid, v in self.per_query.items())


def evaluate_run(run: Iterable[RankedList], qrels: Qrels, k: int = 10, gain: str = "exponential") -> EvalReport:
    per_query: dict[str, float] = {}
    skipped = 0
    for ranking in run:
        score = ndcg_at_k(ranking, qrels, k, gain)
        if score is None:
            skipped += 1
        else:
            per_query[ranking.qid] = score
    mean = sum(per_query.values()) / len(per_query) if per_query else 0.0
    return EvalReport(per_query, mean, skipped, k)


def compare_runs(reports: Mapping[str, EvalReport | Mapping[str, EvalReport]]) -> str:
    """Render methods x datasets as CSV, values in percent to one decimal.

    ``reports`` maps a method name either to one report or to a mapping of
    dataset name to report. The last column averages the dataset means.
    """
    if not reports:
        raise InputError("nothing to compare")
    table: dict[str, dict[str, EvalReport]] = {
        name: (dict(r) if isinstance(r, Mapping) else {"all": r}) for name, r in reports.items()
    }
    datasets: list[str] = []
    for per_ds in table.values():
        datasets += [d for d in per_ds if d not in datasets]
    lines = [",".join(["method", *datasets, "avg"])]
    for name, per_ds in table.items():
        cells = [f"{100 * per_ds[d].mean:.1f}" if d in per_ds else "" for d in datasets]
        means = [per_ds[d].mean for d in datasets if d in per_ds]
        cells.append(f"{100 * sum(means) / len(means):.1f}")
        lines.append(",".join([name, *cells]))
    return "\n".join(lines) + "\n"
