"""Listwise-to-graph (L2G) affinity accumulator.

Each ranked list of length k turns into a score vector giving the rank-r
document weight ``k - r + 1``. The graph accumulates the Gram matrix of
those vectors, ``raw(d, e) = sum_i a_i[d] * a_i[e]``, as exact integers in
upper-triangle storage. Inverse-document-frequency reweighting and k-hop
propagation are applied lazily at read time, restricted to a query's
candidate pool.
"""

from __future__ import annotations

import io
import logging
import math
import os
import struct
import zlib
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import IO, Union

import numpy as np
import scipy.sparse as sp

from .corpus_io import DocInterner, DocRef, RankedList
from .errors import (
    ChecksumError,
    ConfigError,
    GraphFormatError,
    InputError,
    NotFoundError,
    ParseError,
    TruncatedGraphError,
    VersionMismatchError,
)

log = logging.getLogger(__name__)

DocLike = Union[DocRef, str]

MAX_HOPS = 3


class ScoreVector(dict):
    """Sparse rank-derived weights; absent documents weigh 0."""

    def __missing__(self, key):
        return 0


def score_vector(ranked: RankedList) -> ScoreVector:
    k = len(ranked.docs)
    return ScoreVector((doc, k - r) for r, doc in enumerate(ranked.docs))


@dataclass(frozen=True)
class PropagationConfig:
    k: int = 3
    include_diagonal: bool = True
    idf: bool = True
    log_base: float = math.e

    def __post_init__(self) -> None:
        if not 1 <= self.k <= MAX_HOPS:
            raise ConfigError(f"hops must be in 1..{MAX_HOPS}, got {self.k}")
        if self.log_base <= 1:
            raise ConfigError("log base must exceed 1")


@dataclass(frozen=True)
class GraphStats:
    doc_count: int = 0
    edge_count: int = 0
    queries_ingested: int = 0
    estimated_bytes: int = 0

    def to_csv(self) -> str:
        return (
            "docs,edges,queries,bytes\n"
            f"{self.doc_count},{self.edge_count},{self.queries_ingested},{self.estimated_bytes}\n"
        )


@dataclass(frozen=True)
class BatchUpdate:
    """Cell attribution of one batch against the old/new document split.

    ``old_old`` cells live in the previous affinity block, ``old_new`` in the
    cross block and ``new_new`` in the block spanned only by unseen docs.
    """

    lists: int
    new_docs: int
    old_old: int
    old_new: int
    new_new: int

    @property
    def touched(self) -> int:
        return self.old_old + self.old_new + self.new_new


# Footprint model: each stored cell is an 8-byte column index plus an 8-byte
# weight; each seen document costs an 8-byte df, an 8-byte row offset and its
# UTF-8 external id.
CELL_BYTES = 16
DOC_BYTES = 16


class AffinityGraph:
    """Sparse symmetric doc-doc co-occurrence graph built from ranked lists.

    Rows hold the upper triangle including the diagonal: ``_rows[d]`` maps
    ``e >= d`` to the accumulated integer weight.
    """

    def __init__(self, interner: DocInterner | None = None):
        self.interner = interner if interner is not None else DocInterner()
        self._rows: list[dict[int, int]] = []
        self._df: list[int] = []
        self.m = 0
        self._nnz = 0
        self._doc_count = 0
        self._id_bytes = 0
        self._qids: set[str] = set()

    # -- identity -----------------------------------------------------------

    def _grow(self) -> None:
        missing = len(self.interner) - len(self._df)
        if missing > 0:
            self._rows.extend({} for _ in range(missing))
            self._df.extend([0] * missing)

    def _resolve(self, doc: DocLike) -> int | None:
        if isinstance(doc, DocRef):
            h = doc.handle
            if h < len(self._df) and self.interner.ref(h).external_id == doc.external_id:
                return h
            doc = doc.external_id
        ref = self.interner.get(doc)
        if ref is None or ref.handle >= len(self._df):
            return None
        return ref.handle

    def handle(self, doc: DocLike) -> int:
        """Handle of a document the graph has seen; NotFoundError otherwise."""
        h = self._resolve(doc)
        if h is None or self._df[h] == 0:
            raise NotFoundError(f"document {str(doc)!r} not in graph")
        return h

    def __contains__(self, doc: object) -> bool:
        if not isinstance(doc, (DocRef, str)):
            return False
        h = self._resolve(doc)
        return h is not None and self._df[h] > 0

    def docs(self) -> list[DocRef]:
        return [self.interner.ref(h) for h, df in enumerate(self._df) if df > 0]

    # -- accumulation -------------------------------------------------------

    def _weighted_handles(self, ranked: RankedList) -> list[tuple[int, int]]:
        k = len(ranked.docs)
        pairs = [(self.interner.intern(d.external_id).handle, k - r) for r, d in enumerate(ranked.docs)]
        if len({h for h, _ in pairs}) != k:
            raise InputError(f"ranked list for {ranked.qid!r} has duplicate documents")
        pairs.sort()
        return pairs

    def _accumulate(self, pairs: list[tuple[int, int]], new: set[int] | None, touched: set[int] | None) -> int:
        self._grow()
        df = self._df
        fresh = 0
        for h, _ in pairs:
            if df[h] == 0:
                fresh += 1
                self._doc_count += 1
                self._id_bytes += len(self.interner.ref(h).external_id.encode("utf-8"))
                if new is not None:
                    new.add(h)
            df[h] += 1
        rows = self._rows
        nnz = 0
        for i, (hi, wi) in enumerate(pairs):
            row = rows[hi]
            for hj, wj in pairs[i:]:
                prev = row.get(hj)
                if prev is None:
                    row[hj] = wi * wj
                    nnz += 1
                else:
                    row[hj] = prev + wi * wj
                if touched is not None:
                    touched.add(hi << 32 | hj)
        self._nnz += nnz
        self.m += 1
        return fresh

    def ingest(self, ranked: RankedList) -> int:
        """Add one ranked list; returns the number of previously unseen docs.

        Cost is O(k^2) in the list length and independent of graph size.
        """
        if ranked.qid in self._qids:
            log.warning("query %s ingested more than once", ranked.qid)
        self._qids.add(ranked.qid)
        return self._accumulate(self._weighted_handles(ranked), None, None)

    # -- reads --------------------------------------------------------------

    def raw(self, d: DocLike, e: DocLike) -> int:
        hd, he = self._resolve(d), self._resolve(e)
        if hd is None or he is None:
            return 0
        if hd > he:
            hd, he = he, hd
        return self._rows[hd].get(he, 0)

    def df(self, d: DocLike) -> int:
        h = self._resolve(d)
        return 0 if h is None else self._df[h]

    def idf_weight(self, d: DocLike, log_base: float = math.e) -> float:
        return _idf(self._df[self.handle(d)], log_base)

    def weighted_affinity(self, d1: DocLike, d2: DocLike, log_base: float = math.e) -> float:
        h1, h2 = self.handle(d1), self.handle(d2)
        lo, hi = min(h1, h2), max(h1, h2)
        raw = self._rows[lo].get(hi, 0)
        if raw == 0:
            return 0.0
        return raw * _idf(self._df[h1], log_base) * _idf(self._df[h2], log_base)

    def row(self, d: DocLike) -> dict[int, int]:
        """Full symmetric row of ``d`` keyed by handle. O(|D|); test/debug use."""
        h = self.handle(d)
        out = dict(self._rows[h])
        for e in range(h):
            w = self._rows[e].get(h)
            if w is not None:
                out[e] = w
        return out

    @property
    def doc_count(self) -> int:
        return self._doc_count

    @property
    def edge_count(self) -> int:
        return self._nnz - self._doc_count

    def stats(self) -> GraphStats:
        return GraphStats(
            doc_count=self._doc_count,
            edge_count=self.edge_count,
            queries_ingested=self.m,
            estimated_bytes=CELL_BYTES * self._nnz + DOC_BYTES * self._doc_count + self._id_bytes,
        )

    def to_dense(self) -> np.ndarray:
        """Dense symmetric raw matrix over all handles (small graphs only)."""
        n = len(self._df)
        out = np.zeros((n, n), dtype=np.int64)
        for h, row in enumerate(self._rows):
            for e, w in row.items():
                out[h, e] = w
                out[e, h] = w
        return out

    def copy(self) -> AffinityGraph:
        g = AffinityGraph(self.interner.copy())
        g._rows = [dict(r) for r in self._rows]
        g._df = list(self._df)
        g.m, g._nnz, g._doc_count, g._id_bytes = self.m, self._nnz, self._doc_count, self._id_bytes
        g._qids = set(self._qids)
        return g

    snapshot = copy

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AffinityGraph):
            return NotImplemented
        self._grow()
        other._grow()
        return (
            self.m == other.m
            and self._cells() == other._cells()
            and self._df_by_id() == other._df_by_id()
        )

    __hash__ = None  # type: ignore[assignment]

    def _df_by_id(self) -> dict[str, int]:
        return {self.interner.ref(h).external_id: df for h, df in enumerate(self._df) if df > 0}

    def _cells(self) -> dict[tuple[str, str], int]:
        ids = self.interner.ids()
        out = {}
        for h, row in enumerate(self._rows):
            for e, w in row.items():
                a, b = ids[h], ids[e]
                out[(a, b) if a <= b else (b, a)] = w
        return out

    def __repr__(self) -> str:
        s = self.stats()
        return f"AffinityGraph(docs={s.doc_count}, edges={s.edge_count}, queries={s.queries_ingested})"


def _idf(df: int, log_base: float) -> float:
    return math.log(log_base) / math.log1p(df)


def idf_weight(graph: AffinityGraph, d: DocLike, log_base: float = math.e) -> float:
    return graph.idf_weight(d, log_base)


def weighted_affinity(graph: AffinityGraph, d1: DocLike, d2: DocLike, log_base: float = math.e) -> float:
    return graph.weighted_affinity(d1, d2, log_base)


def ingest(graph: AffinityGraph, ranked: RankedList) -> AffinityGraph:
    graph.ingest(ranked)
    return graph


def batch_update(graph: AffinityGraph, lists: Iterable[RankedList]) -> BatchUpdate:
    """Fold a batch of lists into ``graph`` and attribute the touched cells.

    The final state equals ingesting the lists one at a time.
    """
    new: set[int] = set()
    touched: set[int] = set()  # cells packed as hi << 32 | lo
    n = 0
    for ranked in lists:
        if ranked.qid in graph._qids:
            log.warning("query %s ingested more than once", ranked.qid)
        graph._qids.add(ranked.qid)
        graph._accumulate(graph._weighted_handles(ranked), new, touched)
        n += 1
    old_old = old_new = new_new = 0
    for key in touched:
        fresh = (key >> 32 in new) + (key & 0xFFFFFFFF in new)
        if fresh == 0:
            old_old += 1
        elif fresh == 1:
            old_new += 1
        else:
            new_new += 1
    return BatchUpdate(n, len(new), old_old, old_new, new_new)


# -- propagation -------------------------------------------------------------


def _row_normalize(m: sp.csr_matrix) -> sp.csr_matrix:
    sums = np.asarray(m.sum(axis=1)).ravel()
    inv = np.zeros_like(sums)
    nz = sums > 0
    inv[nz] = 1.0 / sums[nz]
    out = sp.diags(inv) @ m
    out = out.tocsr()
    out.eliminate_zeros()
    return out


@dataclass
class Propagation:
    """Row-stochastic k-hop affinities restricted to one candidate pool."""

    refs: list[DocRef]
    matrix: sp.csr_matrix
    index: dict[int, int]

    def __len__(self) -> int:
        return len(self.refs)

    def __contains__(self, doc: object) -> bool:
        return isinstance(doc, DocRef) and doc.handle in self.index

    def row(self, doc: DocRef) -> dict[int, float]:
        i = self._position(doc)
        start, stop = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return {
            self.refs[j].handle: float(v)
            for j, v in zip(self.matrix.indices[start:stop], self.matrix.data[start:stop])
        }

    def _position(self, doc: DocRef) -> int:
        i = self.index.get(doc.handle)
        if i is None or self.refs[i].external_id != doc.external_id:
            raise NotFoundError(f"document {doc.external_id!r} not in propagated pool")
        return i

    def neighbors(self, doc: DocRef, n: int, exclude: set[int] | frozenset[int] = frozenset()) -> list[tuple[DocRef, float]]:
        """Top-``n`` pool members by propagated score, self and ``exclude`` handles skipped.

        Scores equal to 12 decimals count as ties and fall back to handle order.
        """
        i = self._position(doc)
        start, stop = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        cands = []
        for j, v in zip(self.matrix.indices[start:stop], self.matrix.data[start:stop]):
            ref = self.refs[j]
            if j == i or v <= 0 or ref.handle in exclude:
                continue
            cands.append((-round(float(v), 12), ref.handle, ref, float(v)))
        cands.sort(key=lambda t: (t[0], t[1]))
        return [(ref, v) for _, _, ref, v in cands[:n]]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _pool_handles(graph: AffinityGraph, pool: Iterable[DocLike]) -> tuple[list[DocRef], int]:
    refs: list[DocRef] = []
    seen: set[int] = set()
    dropped = 0
    for d in pool:
        h = graph._resolve(d)
        if h is None or graph._df[h] == 0:
            dropped += 1
            continue
        if h not in seen:
            seen.add(h)
            refs.append(graph.interner.ref(h))
    return refs, dropped


def propagate(graph: AffinityGraph, pool: Iterable[DocLike], cfg: PropagationConfig | None = None) -> Propagation:
    """k-hop row-normalized propagation of IDF-weighted affinity over ``pool``.

    Pool members the graph has never seen are dropped. Rows with no mass
    stay zero.
    """
    cfg = cfg or PropagationConfig()
    pool = list(pool)
    if not pool:
        raise InputError("pool is empty")
    refs, dropped = _pool_handles(graph, pool)
    if dropped:
        log.debug("propagate: %d pool docs unseen by the graph were dropped", dropped)
    n = len(refs)
    index = {r.handle: i for i, r in enumerate(refs)}
    ri: list[int] = []
    ci: list[int] = []
    vals: list[int] = []
    for i, ref in enumerate(refs):
        for e, w in graph._rows[ref.handle].items():
            j = index.get(e)
            if j is None:
                continue
            if i == j:
                if cfg.include_diagonal:
                    ri.append(i)
                    ci.append(i)
                    vals.append(w)
                continue
            ri.extend((i, j))
            ci.extend((j, i))
            vals.extend((w, w))
    rows = np.asarray(ri, dtype=np.int64)
    cols = np.asarray(ci, dtype=np.int64)
    data = np.asarray(vals, dtype=np.float64)
    if cfg.idf and n:
        idf = np.array([_idf(graph._df[r.handle], cfg.log_base) for r in refs])
        data = data * idf[rows] * idf[cols]
    w = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    step = _row_normalize(w)
    out = step
    for _ in range(cfg.k - 1):
        out = _row_normalize(out @ step)
    out.sort_indices()
    return Propagation(refs, out, index)


def neighbors(
    graph: AffinityGraph,
    d: DocLike,
    n: int,
    pool: Iterable[DocLike],
    cfg: PropagationConfig | None = None,
) -> list[tuple[DocRef, float]]:
    if n < 1:
        raise InputError("n must be positive")
    h = graph.handle(d)
    pool = list(pool)
    pool_ids = {p.external_id if isinstance(p, DocRef) else p for p in pool}
    ref = graph.interner.ref(h)
    if ref.external_id not in pool_ids:
        raise NotFoundError(f"document {ref.external_id!r} not in pool")
    return propagate(graph, pool, cfg).neighbors(ref, n)


def stats(graph: AffinityGraph) -> GraphStats:
    return graph.stats()


# -- serialization -----------------------------------------------------------
#
# Little-endian layout:
#   header   <8s H H Q Q Q Q   magic, version, flags, m, n_ids, nnz, payload_len
#   payload  per handle: <Q I df, id length, then UTF-8 id bytes
#            row_ptr  (n_ids + 1) x <u8
#            cols     nnz x <u4     (upper triangle incl. diagonal, sorted per row)
#            weights  nnz x <i8
#   trailer  <I  CRC-32 of header + payload

MAGIC = b"L2GGRAPH"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHHQQQQ")
_ID = struct.Struct("<QI")
_CRC = struct.Struct("<I")


def save(graph: AffinityGraph, sink: IO[bytes] | str | os.PathLike | None = None) -> bytes:
    graph._grow()
    ids = graph.interner.ids()
    parts = []
    for h, ext in enumerate(ids):
        raw = ext.encode("utf-8")
        parts.append(_ID.pack(graph._df[h], len(raw)))
        parts.append(raw)
    row_ptr = np.zeros(len(ids) + 1, dtype="<u8")
    cols: list[int] = []
    weights: list[int] = []
    for h, row in enumerate(graph._rows):
        for e in sorted(row):
            cols.append(e)
            weights.append(row[e])
        row_ptr[h + 1] = len(cols)
    parts.append(row_ptr.tobytes())
    parts.append(np.asarray(cols, dtype="<u4").tobytes())
    parts.append(np.asarray(weights, dtype="<i8").tobytes())
    payload = b"".join(parts)
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, 0, graph.m, len(ids), len(cols), len(payload))
    body = head + payload
    data = body + _CRC.pack(zlib.crc32(body))
    if sink is None:
        return data
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            fh.write(data)
    else:
        sink.write(data)
    return data


def _read_source(source: bytes | IO[bytes] | str | os.PathLike) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read()
    return source.read()


def is_graph_file(data: bytes) -> bool:
    return data[: len(MAGIC)] == MAGIC


def load(source: bytes | IO[bytes] | str | os.PathLike) -> AffinityGraph:
    """Read a graph written by :func:`save`; nothing is returned on any error."""
    data = _read_source(source)
    if len(data) < len(MAGIC):
        if MAGIC.startswith(data) and data:
            raise TruncatedGraphError("file ends inside the magic number")
        raise GraphFormatError("not an l2g graph file")
    if not is_graph_file(data):
        raise GraphFormatError("not an l2g graph file")
    if len(data) < _HEADER.size:
        raise TruncatedGraphError("file ends inside the header")
    _, version, _flags, m, n_ids, nnz, payload_len = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"graph format version {version}, expected {FORMAT_VERSION}")
    end = _HEADER.size + payload_len
    if len(data) < end + _CRC.size:
        raise TruncatedGraphError(f"expected {end + _CRC.size} bytes, got {len(data)}")
    if len(data) > end + _CRC.size:
        raise GraphFormatError("trailing bytes after checksum")
    (crc,) = _CRC.unpack_from(data, end)
    if zlib.crc32(data[:end]) != crc:
        raise ChecksumError("checksum mismatch")
    try:
        return _decode(io.BytesIO(data[_HEADER.size : end]), m, n_ids, nnz)
    except (struct.error, ValueError, UnicodeDecodeError, IndexError) as exc:
        raise GraphFormatError(f"inconsistent graph payload: {exc}") from None


def _take(buf: io.BytesIO, n: int) -> bytes:
    out = buf.read(n)
    if len(out) != n:
        raise ValueError("payload shorter than declared")
    return out


def _decode(buf: io.BytesIO, m: int, n_ids: int, nnz: int) -> AffinityGraph:
    interner = DocInterner()
    df: list[int] = []
    for _ in range(n_ids):
        count, size = _ID.unpack(_take(buf, _ID.size))
        ext = _take(buf, size).decode("utf-8")
        if interner.get(ext) is not None:
            raise ValueError(f"duplicate id {ext!r}")
        interner.intern(ext)
        df.append(count)
    row_ptr = np.frombuffer(_take(buf, 8 * (n_ids + 1)), dtype="<u8").astype(np.int64)
    cols = np.frombuffer(_take(buf, 4 * nnz), dtype="<u4").astype(np.int64)
    weights = np.frombuffer(_take(buf, 8 * nnz), dtype="<i8")
    if buf.read(1):
        raise ValueError("payload longer than declared")
    if row_ptr[0] != 0 or row_ptr[-1] != nnz or np.any(np.diff(row_ptr) < 0):
        raise ValueError("bad row offsets")
    g = AffinityGraph(interner)
    g._df = df
    g._rows = []
    for h in range(n_ids):
        lo, hi = row_ptr[h], row_ptr[h + 1]
        rc = cols[lo:hi]
        if np.any(rc < h) or np.any(rc >= n_ids):
            raise ValueError("cell outside upper triangle")
        g._rows.append(dict(zip(rc.tolist(), weights[lo:hi].tolist())))
    g.m = m
    g._nnz = nnz
    g._doc_count = sum(1 for x in df if x > 0)
    g._id_bytes = sum(len(interner.ref(h).external_id.encode("utf-8")) for h in range(n_ids) if df[h] > 0)
    return g


def load_affinity_file(source: bytes | IO[bytes] | str | os.PathLike, interner: DocInterner | None = None) -> "StaticAffinity | AffinityGraph":
    """Load a precomputed affinity graph.

    Accepts either an l2g binary graph file or a whitespace-separated edge
    list ``docid_a docid_b weight`` (symmetric; repeated pairs keep the max).
    """
    data = _read_source(source)
    if is_graph_file(data):
        return load(data)
    return StaticAffinity.parse(data, interner)


class StaticAffinity:
    """Fixed symmetric affinity weights, e.g. from a bi-encoder dump."""

    def __init__(self, interner: DocInterner | None = None):
        self.interner = interner if interner is not None else DocInterner()
        self._adj: dict[int, dict[int, float]] = {}

    def add(self, a: str, b: str, weight: float) -> None:
        ha = self.interner.intern(a).handle
        hb = self.interner.intern(b).handle
        if ha == hb:
            return
        for x, y in ((ha, hb), (hb, ha)):
            row = self._adj.setdefault(x, {})
            row[y] = max(weight, row.get(y, weight))

    def weight(self, a: DocLike, b: DocLike) -> float:
        ra = self.interner.get(a.external_id if isinstance(a, DocRef) else a)
        rb = self.interner.get(b.external_id if isinstance(b, DocRef) else b)
        if ra is None or rb is None:
            return 0.0
        return self._adj.get(ra.handle, {}).get(rb.handle, 0.0)

    def row(self, doc: DocRef) -> dict[str, float]:
        ref = self.interner.get(doc.external_id)
        if ref is None:
            return {}
        return {self.interner.ref(h).external_id: w for h, w in self._adj.get(ref.handle, {}).items()}

    def __len__(self) -> int:
        return sum(len(r) for r in self._adj.values()) // 2

    @classmethod
    def parse(cls, data: bytes | str, interner: DocInterner | None = None) -> StaticAffinity:
        try:
            text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
        except UnicodeDecodeError:
            raise ParseError("affinity file is neither an l2g graph nor UTF-8 text") from None
        out = cls(interner)
        for lineno, line in enumerate(text.splitlines(), start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 3:
                raise ParseError(f"expected 3 fields, got {len(parts)}", lineno)
            try:
                weight = float(parts[2])
            except ValueError:
                raise ParseError(f"bad weight {parts[2]!r}", lineno) from None
            out.add(parts[0], parts[1], weight)
        return out


def from_lists(lists: Sequence[RankedList], interner: DocInterner | None = None) -> AffinityGraph:
    g = AffinityGraph(interner)
    for rl in lists:
        g.ingest(rl)
    return g
