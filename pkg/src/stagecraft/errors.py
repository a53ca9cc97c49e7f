"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class StagecraftError(Exception):
    """Base class for all engine errors."""


class BackendTimeout(StagecraftError):
    """The text-generation backend did not answer within the request timeout."""


class BackendUnavailable(StagecraftError):
    """The text-generation backend could not be reached at all."""


class ScriptExhausted(StagecraftError):
    """A scripted backend has no reply left for a routing key (a fixture bug)."""


class ParseFailure(StagecraftError):
    """A model reply could not be parsed into the expected structure."""

    def __init__(self, message: str, path: str = "") -> None:
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ContractViolation(StagecraftError):
    """An operation was invoked with arguments that break its contract."""


class ValidationFailure(StagecraftError):
    """A produced blueprint failed structural validation."""

    def __init__(self, violations) -> None:
        lines = "; ".join(str(v) for v in violations)
        super().__init__(f"blueprint validation failed: {lines}")
        self.violations = list(violations)


class BlueprintSchemaError(StagecraftError):
    """A blueprint document does not match the schema."""

    def __init__(self, path: str, expected: str, found: str) -> None:
        super().__init__(f"{path}: expected {expected}, found {found}")
        self.path = path
        self.expected = expected
        self.found = found


class StageError(StagecraftError):
    """A live-performance operation was misused."""


class RosterMismatch(StageError):
    """The roster does not cover exactly the blueprint's actors."""


class OffStage(StageError):
    """A turn was submitted for an actor who is not on stage."""


class EmptyTurn(StageError):
    """A submitted turn contains no parseable speech, action, or thinking."""


class InputQueueFull(StageError):
    """An actor already has a pending input; only one turn may be queued."""


class UnparseableVerdict(StagecraftError):
    """A judge reply could not be turned into a consistent verdict."""


class CorruptTranscript(StagecraftError):
    """A persisted transcript file could not be replayed."""

    def __init__(self, message: str, line_no: int) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
