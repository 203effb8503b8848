"""Exception hierarchy shared across pipeline stages."""


class VizforgeError(Exception):
    """Base class for all pipeline errors."""


class RejectedRecordError(VizforgeError):
    """A record violates its own invariants; carries per-field diagnostics."""

    def __init__(self, message: str, fields: dict | None = None):
        super().__init__(message)
        self.fields = fields or {}


class NotFoundError(VizforgeError):
    """Requested artifact or record does not exist."""


class CorruptionError(VizforgeError):
    """Stored bytes no longer match their content hash. Fatal."""


class ConfigError(VizforgeError):
    """Configuration failed to parse or validate; names the offending keys."""

    def __init__(self, message: str, keys: list | None = None):
        super().__init__(message)
        self.keys = keys or []


class LockError(VizforgeError):
    """A second process tried to open a run that is already live."""


class MalformedItemError(VizforgeError):
    """A raw source item is missing its code field (or otherwise unmappable)."""


class SourceError(VizforgeError):
    """A source locator could not be resolved at all."""


class ParseError(VizforgeError):
    """Source text failed to parse under the configured grammar."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(message)
        self.line = line
        self.col = col


class PlanningError(VizforgeError):
    """Task planning hit a record whose source type is not in the matrix."""


class PreconditionError(VizforgeError):
    """An operation was called outside its contract."""


class MalformedGenerationError(VizforgeError):
    """Gateway output could not be parsed into the required sections."""


class SnippetError(VizforgeError):
    """Requested snippet length exceeds the reference file."""


class EdgeError(VizforgeError):
    """Requested translation edge is not configured (in either direction)."""


class TemplateError(VizforgeError):
    """Prompt template missing, or placeholders not covered by variables."""


class GatewayUnavailableError(VizforgeError):
    """Transport retries exhausted against the model provider."""


class JudgeFormatError(VizforgeError):
    """Judge output still malformed after the corrective re-ask."""


class FatalStageError(VizforgeError):
    """Unrecoverable stage failure; aborts the run with exit code 1."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class EmptyReportError(VizforgeError):
    """Aggregation requested over zero scored records."""
