"""Exception hierarchy for the engine.

Every error the public API can raise subclasses CopilotError so callers can
catch one base. Names mirror the operation contracts (catalog, gateway,
planner, executor, service).
"""

from __future__ import annotations


class CopilotError(Exception):
    """Base class for all engine errors."""


# --- catalog ---------------------------------------------------------------

class DuplicateSource(CopilotError):
    pass


class UnreadableLocator(CopilotError):
    pass


class SchemaMismatch(CopilotError):
    pass


class UnknownSource(CopilotError):
    pass


class UnknownColumn(CopilotError):
    def __init__(self, name: str, valid: list[str] | None = None):
        self.name = name
        self.valid = list(valid or [])
        msg = f"unknown column {name!r}"
        if self.valid:
            msg += f" (valid: {', '.join(self.valid)})"
        super().__init__(msg)


class InvalidRange(CopilotError):
    pass


# --- llm gateway -----------------------------------------------------------

class TapeMiss(CopilotError):
    def __init__(self, fingerprint: str):
        self.fingerprint = fingerprint
        super().__init__(f"no tape entry for fingerprint {fingerprint}")


class ProviderUnavailable(CopilotError):
    pass


class ContextOverflow(CopilotError):
    pass


class EmptyText(CopilotError):
    pass


# --- exploration -----------------------------------------------------------

class QuotaInfeasible(CopilotError):
    pass


class InsufficientData(CopilotError):
    pass


# --- forge / registry ------------------------------------------------------

class InvalidConfig(CopilotError):
    pass


class BodyParseError(CopilotError):
    pass


class DuplicateName(CopilotError):
    pass


class NotTested(CopilotError):
    pass


# --- planner ---------------------------------------------------------------

class UnparseableRequest(CopilotError):
    pass


class NoTaskApplicable(CopilotError):
    pass


class PlanUnserializable(CopilotError):
    pass


# --- executor --------------------------------------------------------------

class CycleError(CopilotError):
    pass


class LoopExpansionError(CopilotError):
    pass


class NodeTimeout(CopilotError):
    pass


class FallbackExhausted(CopilotError):
    def __init__(self, message: str, attempts: list[str] | None = None):
        self.attempts = list(attempts or [])
        super().__init__(message)


class EmptyResult(CopilotError):
    pass


# --- evaluator -------------------------------------------------------------

class MalformedSpec(CopilotError):
    pass


# --- external runner -------------------------------------------------------

class ExternalTimeout(CopilotError):
    pass


class MemoryExceeded(CopilotError):
    pass


class SpawnFailure(CopilotError):
    pass


# --- service ---------------------------------------------------------------

class ValidationFailure(CopilotError):
    pass


class Conflict(CopilotError):
    pass


class NotFound(CopilotError):
    pass


class ExplorationInterrupted(CopilotError):
    """Provider failure mid-exploration; checkpoint allows resuming."""

    def __init__(self, message: str, checkpoint_path: str | None = None):
        self.checkpoint_path = checkpoint_path
        super().__init__(message)
