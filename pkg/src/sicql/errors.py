"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class SicqlError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SicqlError):
    """Syntax or semantic error while parsing query text."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class PlanError(SicqlError):
    """Logical plan rewrite failed (e.g. constraint targets nothing)."""


class EstimationError(SicqlError):
    """Cost/reliability estimation is missing required profile data."""


class InfeasiblePlanError(SicqlError):
    """No implementation assignment satisfies the user thresholds."""

    def __init__(self, message: str, violated: list[str] | None = None):
        self.violated = violated or []
        super().__init__(message)


class CheckError(SicqlError):
    """A checker failed to produce a verdict (distinct from a violation)."""


class ModelError(SicqlError):
    """Model client failure: transport, missing rule, bad capability."""


class UnsupportedCapabilityError(ModelError):
    """Requested a decoding feature the client cannot provide."""


class RegexSupportError(SicqlError):
    """Regex pattern uses a feature outside the supported subset."""


class EngineError(SicqlError):
    """Runtime execution failure (missing table, schema mismatch, ...)."""


class AbortRun(SicqlError):
    """Raised internally when an ABORT failure mode cancels the query."""

    def __init__(self, constraint_id: str, reason: str):
        self.constraint_id = constraint_id
        self.reason = reason
        super().__init__(f"run aborted by constraint {constraint_id}: {reason}")


class StoreError(SicqlError):
    """Constraint store failure (duplicate id, unknown id, ...)."""


class ObservabilityError(SicqlError):
    """Observability store failure (no data, relabeling conflict, ...)."""


class LabelConflictError(ObservabilityError):
    """A true label was already submitted for this invocation."""


class ConfigError(SicqlError):
    """Invalid configuration file or profile."""
