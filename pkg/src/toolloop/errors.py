"""Exception types shared across the engine."""

from __future__ import annotations

from dataclasses import dataclass


class EngineError(Exception):
    """Base class for every error raised by this package."""


# --- registry ---------------------------------------------------------------

class DuplicateName(EngineError):
    pass


class InvalidSpec(EngineError):
    """A tool spec violated one or more invariants; all reasons are kept."""

    def __init__(self, reasons: list[str]):
        self.reasons = list(reasons)
        super().__init__("; ".join(self.reasons))


class ParseError(EngineError):
    """A structured document could not be parsed."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


@dataclass(frozen=True)
class Violation:
    """One problem found while validating a function call."""

    code: str  # unknown_tool | unknown_param | missing_required_param | type_mismatch
    param: str
    message: str


class CallValidationError(EngineError):
    """Carries every violation found in a single call, not just the first."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


# --- retrieval ---------------------------------------------------------------

class EmptyCorpus(EngineError):
    pass


class UnknownTool(EngineError):
    pass


class DimensionMismatch(EngineError):
    pass


class ZeroVector(EngineError):
    pass


class BackendUnavailable(EngineError):
    """Retrieval backend failed; the provider error is attached as cause."""

    def __init__(self, message: str, cause: Exception | None = None):
        self.cause = cause
        super().__init__(message)


class UnknownBackend(EngineError):
    pass


# --- llm gateway -------------------------------------------------------------

class AdapterError(EngineError):
    """Completion adapter failure (network, timeout, exhausted script)."""

    def __init__(self, message: str, retryable: bool = False):
        self.retryable = retryable
        super().__init__(message)


class ParseFailure(EngineError):
    """Model output did not match the turn grammar; reason goes into feedback."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


# --- agent loop --------------------------------------------------------------

class ConfigError(EngineError):
    pass


class SessionAbort(EngineError):
    """An adapter error aborted a session; the partial trace is preserved."""

    def __init__(self, cause: Exception, trace):
        self.cause = cause
        self.trace = trace
        super().__init__(f"session aborted: {cause}")


# --- executor ----------------------------------------------------------------

class NotFound(EngineError):
    pass


class UpstreamError(EngineError):
    pass


class UnknownField(EngineError):
    pass


class FixtureMissing(EngineError):
    pass


class CacheIoError(EngineError):
    pass


class NetworkAttempt(AssertionError):
    """Raised by the forbidding transport when hermetic mode touches the network."""


# --- eval harness ------------------------------------------------------------

class SchemaError(EngineError):
    """Dataset record(s) violated the question schema; names the question ids."""

    def __init__(self, message: str, question_ids: list[str] | None = None):
        self.question_ids = question_ids or []
        super().__init__(message)


class MissingOptions(EngineError):
    pass


class MissingGold(EngineError):
    pass


class StyleError(EngineError):
    pass


class UnknownQuestionId(EngineError):
    pass


class NoRetrievalSteps(EngineError):
    pass
