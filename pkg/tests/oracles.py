"""Brute-force reference implementations used only by the tests.

They share no code with the package: everything is recomputed densely from
plain Python lists of doc ids.
"""

from __future__ import annotations

import math

import numpy as np


def score_dict(ids: list[str]) -> dict[str, int]:
    k = len(ids)
    return {d: k - r for r, d in enumerate(ids)}


def dense_gram(lists: list[list[str]], order: list[str]) -> np.ndarray:
    """Sum over lists of outer(a_i, a_i), integer matrix restricted to ``order``."""
    pos = {d: i for i, d in enumerate(order)}
    out = np.zeros((len(order), len(order)), dtype=np.int64)
    for ids in lists:
        a = np.zeros(len(order), dtype=np.int64)
        for d, w in score_dict(ids).items():
            if d in pos:
                a[pos[d]] = w
        out += np.outer(a, a)
    return out


def doc_freq(lists: list[list[str]]) -> dict[str, int]:
    df: dict[str, int] = {}
    for ids in lists:
        for d in ids:
            df[d] = df.get(d, 0) + 1
    return df


def dense_propagation(lists: list[list[str]], pool: list[str], k: int, idf: bool = True, base: float = math.e) -> np.ndarray:
    """Restrict to ``pool``, rescale score vectors by idf, then (normalize, multiply)^k."""
    df = doc_freq(lists)
    gram = dense_gram(lists, pool).astype(float)
    if idf:
        w = np.array([1.0 / math.log(1 + df[d], base) for d in pool])
        gram = gram * np.outer(w, w)

    def norm(m: np.ndarray) -> np.ndarray:
        m = m.copy()
        for i in range(m.shape[0]):
            s = m[i].sum()
            if s > 0:
                m[i] /= s
        return m

    p1 = norm(gram)
    p = p1
    for _ in range(k - 1):
        p = norm(p @ p1)
    return p


def pairwise_overlap_share(pools: list[set[str]]) -> float:
    """Scan every (query, doc, other query) triple."""
    total = shared = 0
    for i, pool in enumerate(pools):
        for d in pool:
            total += 1
            if any(d in other for j, other in enumerate(pools) if j != i):
                shared += 1
    return 100.0 * shared / total


def ndcg(ranking: list[str], grades: dict[str, int], k: int, linear: bool = False) -> float | None:
    gain = (lambda g: g) if linear else (lambda g: 2**g - 1)
    dcg = sum(gain(grades.get(d, 0)) / math.log2(i + 2) for i, d in enumerate(ranking[:k]))
    ideal = sorted(grades.values(), reverse=True)[:k]
    idcg = sum(gain(g) / math.log2(i + 2) for i, g in enumerate(ideal))
    return None if idcg == 0 else dcg / idcg
