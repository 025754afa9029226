"""Listwise reranker adapters.

A reranker takes a query and a window of documents and returns a
permutation of that window (order only, no scores). Every adapter counts
its invocations so harnesses can check call budgets.
"""

from __future__ import annotations

import json
import queue
import random
import shlex
import subprocess
import threading
from collections.abc import Sequence
from dataclasses import dataclass

from .corpus_io import DocRef, QueryRecord, Qrels
from .errors import ConfigError, RerankerError


class Reranker:
    """Base adapter; subclasses implement :meth:`rerank`."""

    name = "reranker"

    def __init__(self) -> None:
        self.calls = 0

    def rerank(self, query: QueryRecord, window: list[DocRef]) -> list[DocRef]:
        raise NotImplementedError

    def __call__(self, query: QueryRecord, window: Sequence[DocRef]) -> list[DocRef]:
        window = list(window)
        self.calls += 1
        out = self.rerank(query, window)
        check_permutation(window, out)
        return out

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def check_permutation(window: Sequence[DocRef], out: Sequence[DocRef]) -> None:
    if len(out) != len(window) or sorted(d.external_id for d in out) != sorted(d.external_id for d in window):
        raise RerankerError("reranker output is not a permutation of its input window")


class IdentityReranker(Reranker):
    name = "identity"

    def rerank(self, query: QueryRecord, window: list[DocRef]) -> list[DocRef]:
        return list(window)


@dataclass(frozen=True)
class OracleConfig:
    qrels: Qrels
    noise_swaps: int = 0
    seed: int = 0


class OracleReranker(Reranker):
    """Sorts a window by judged relevance, optionally perturbed.

    Ungraded docs count as grade 0 and ties keep input order. With
    ``noise_swaps > 0`` that many random adjacent transpositions are applied
    per window from a seeded generator.
    """

    name = "oracle"

    def __init__(self, cfg: OracleConfig):
        super().__init__()
        if cfg.noise_swaps < 0:
            raise ConfigError("noise_swaps must be non-negative")
        self.cfg = cfg
        self._rng = random.Random(cfg.seed)

    def rerank(self, query: QueryRecord, window: list[DocRef]) -> list[DocRef]:
        grade = self.cfg.qrels.grade
        out = sorted(window, key=lambda d: -grade(query.qid, d.external_id))
        if len(out) > 1:
            for _ in range(self.cfg.noise_swaps):
                i = self._rng.randrange(len(out) - 1)
                out[i], out[i + 1] = out[i + 1], out[i]
        return out


class RandomReranker(Reranker):
    name = "random"

    def __init__(self, seed: int = 0):
        super().__init__()
        self._rng = random.Random(seed)

    def rerank(self, query: QueryRecord, window: list[DocRef]) -> list[DocRef]:
        out = list(window)
        self._rng.shuffle(out)
        return out


class ExternalReranker(Reranker):
    """Bridge to a child process speaking newline-delimited JSON.

    Request ``{"qid": ..., "query": ... | null, "docids": [...]}``, response
    ``{"docids": [...]}``, strictly one response per request. Any protocol
    violation or timeout raises RerankerError; nothing is substituted.
    """

    name = "external"

    def __init__(self, command: str | Sequence[str], timeout: float = 60.0):
        super().__init__()
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise ConfigError("external reranker command is empty")
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue[str | None] = queue.Queue()

    def _start(self) -> subprocess.Popen:
        if self._proc is None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    encoding="utf-8",
                    bufsize=1,
                )
            except OSError as exc:
                raise RerankerError(f"cannot start reranker {self.command[0]!r}: {exc}") from None
            threading.Thread(target=self._pump, args=(self._proc,), daemon=True).start()
        return self._proc

    def _pump(self, proc: subprocess.Popen) -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def rerank(self, query: QueryRecord, window: list[DocRef]) -> list[DocRef]:
        if not window:
            return []
        proc = self._start()
        request = {"qid": query.qid, "query": query.text, "docids": [d.external_id for d in window]}
        try:
            assert proc.stdin is not None
            proc.stdin.write(json.dumps(request) + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._fail(f"cannot write to reranker: {exc}")
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._fail(f"reranker timed out after {self.timeout}s on {query.qid}")
        if line is None:
            self._fail(f"reranker exited while handling {query.qid}")
        try:
            ids = json.loads(line)["docids"]
        except (json.JSONDecodeError, KeyError, TypeError):
            self._fail(f"malformed reranker response: {line.strip()[:200]!r}")
        by_id = {d.external_id: d for d in window}
        if not isinstance(ids, list) or len(ids) != len(window) or set(ids) != set(by_id):
            self._fail(f"reranker response for {query.qid} is not a permutation of the request")
        return [by_id[i] for i in ids]

    def _fail(self, message: str):
        proc = self._proc
        if proc is not None and proc.poll() is None:
            proc.kill()
        self.close()
        raise RerankerError(message)

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.wait(timeout=2)
        except (subprocess.TimeoutExpired, OSError):
            proc.kill()
            proc.wait()
        self._lines = queue.Queue()


def make_reranker(spec: str, qrels: Qrels | None = None, seed: int = 0, timeout: float = 60.0) -> Reranker:
    """Build an adapter from ``identity|oracle|noisy:<swaps>|random|external:<command>``."""
    kind, _, arg = spec.partition(":")
    if kind == "identity":
        return IdentityReranker()
    if kind == "random":
        return RandomReranker(seed)
    if kind in ("oracle", "noisy"):
        if qrels is None:
            raise ConfigError(f"reranker {kind!r} needs qrels")
        swaps = 0
        if kind == "noisy":
            try:
                swaps = int(arg)
            except ValueError:
                raise ConfigError(f"bad swap count in {spec!r}") from None
        return OracleReranker(OracleConfig(qrels, swaps, seed))
    if kind == "external":
        if not arg:
            raise ConfigError("external reranker needs a command")
        return ExternalReranker(arg, timeout)
    raise ConfigError(f"unknown reranker {spec!r}")
