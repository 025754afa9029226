"""Exception hierarchy shared by every l2g module."""

from __future__ import annotations


class L2GError(Exception):
    """Base class for all library errors."""


class InputError(L2GError, ValueError):
    """Caller supplied a malformed value (duplicate docs, empty ids, ...)."""


class ParseError(InputError):
    """A text exchange file (run, qrels, edge list) could not be parsed."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class ConfigError(L2GError, ValueError):
    """Invalid or inconsistent configuration."""


class NotFoundError(L2GError, KeyError):
    """A document or query is not known to the structure being queried."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class RerankerError(L2GError, RuntimeError):
    """A reranker violated its contract or its process failed."""


class GraphFormatError(L2GError):
    """Graph file is not a valid l2g graph file."""


class VersionMismatchError(GraphFormatError):
    pass


class TruncatedGraphError(GraphFormatError):
    pass


class ChecksumError(GraphFormatError):
    pass
