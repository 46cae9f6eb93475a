"""
Exceptions raised by the qfw package.

Every operation reports bad arguments with InvalidArgumentError, which is also a
ValueError so callers catching the builtin keep working.
"""


class QfwError(Exception):
    """Base class for all qfw errors."""


class InvalidArgumentError(QfwError, ValueError):
    """An argument violates the operation's precondition."""


class PreconditionError(QfwError):
    """A numerical precondition of an emulated subroutine does not hold."""


class DegenerateInputError(QfwError):
    """The input is numerically degenerate (vanishing gap, collapsed chain, empty data)."""


class ConfigError(QfwError, ValueError):
    """A run or sweep configuration is invalid."""
