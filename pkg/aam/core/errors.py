"""
Exception hierarchy for AAM.

Everything the package raises on purpose derives from AAMError, so callers
(the CLI in particular) can map failures to exit codes. Transaction aborts
are not errors: they are signalled with TransactionAbort in aam.core.txn and
never leave txn_execute.
"""

from typing import Optional


class AAMError(Exception):
    """Base class for all AAM errors."""


class MalformedInputError(AAMError):
    """Input data violates a structural precondition (e.g. vertex id out of range)."""


class GraphParseError(MalformedInputError):
    """A graph file could not be parsed."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ContractError(AAMError):
    """A caller broke an API contract (unknown operator, owner mismatch, ...)."""


class FitError(AAMError):
    """Linear regression cannot be computed from the given samples."""


class WatchdogError(AAMError):
    """No commit progress was made within the configured wall-clock budget."""


class ValidationError(AAMError):
    """An algorithm result disagreed with its sequential oracle."""


class ConfigError(AAMError):
    """Invalid configuration or spec string."""
