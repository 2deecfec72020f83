"""Exception hierarchy shared across the package."""

from __future__ import annotations


class StatlerError(Exception):
    """Root of every error raised by this package."""


class ParseFailure(StatlerError):
    """Malformed world-state or program text.

    ``position`` is a character offset for state text; ``line``/``column``
    are 1-based and filled for program text.
    """

    def __init__(self, reason: str, *, position: int | None = None,
                 line: int | None = None, column: int | None = None):
        self.reason = reason
        self.position = position
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"col {column}")
        if position is not None and line is None:
            where.append(f"pos {position}")
        loc = f" at {', '.join(where)}" if where else ""
        super().__init__(f"{reason}{loc}")


class ExecutionError(StatlerError):
    """Runtime failure while executing an action program."""

    @property
    def kind(self) -> str:
        return type(self).__name__


class UnknownFunction(ExecutionError):
    pass


class ArityMismatch(ExecutionError):
    pass


class NonStringArgument(ExecutionError):
    pass


class EnvRuleViolation(ExecutionError):
    """The simulator refused an action."""


class UnknownObject(EnvRuleViolation):
    pass


class DestinationOccupied(EnvRuleViolation):
    pass


class SourceCovered(EnvRuleViolation):
    pass


class SelfPlacement(EnvRuleViolation):
    pass


class WriterFailure(ExecutionError):
    """The world-model writer produced unusable output."""


class BudgetExceeded(StatlerError):
    pass


class ConfigError(StatlerError):
    pass


class BackendError(StatlerError):
    """Completion backend failure; aborts the episode rather than scoring it."""


class ScriptExhausted(BackendError):
    pass


class CacheMiss(BackendError):
    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"no cached completion for digest {digest}")


class TransportError(BackendError):
    pass


class HTTPStatusError(TransportError):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        super().__init__(f"HTTP {status}: {body[:200]}")
