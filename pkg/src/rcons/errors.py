"""Exception hierarchy shared by every module."""

from __future__ import annotations


class RconsError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgument(RconsError, ValueError):
    """A caller passed a state, operation, parameter or assignment that does not fit."""


class TypeSpecError(RconsError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class ConfigurationError(RconsError):
    """A system, layout or algorithm configuration is inconsistent."""


class ProtocolError(RconsError):
    """An event or shared access broke the rules of the execution model."""


class InvalidEventError(ProtocolError):
    """An event is not enabled in the current system state."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        prefix = f"event {index}: " if index is not None else ""
        super().__init__(prefix + message)


class InvariantViolation(ProtocolError):
    """An algorithm broke one of its runtime-enforced invariants."""


class ScheduleFormatError(RconsError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__((f"line {line}: " if line is not None else "") + message)
