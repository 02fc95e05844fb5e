"""Exception types shared across the package."""


class CitenavError(Exception):
    """Base class for package errors."""


class IngestError(CitenavError):
    """Raised when a corpus file cannot be read at all."""


class SplitError(CitenavError):
    """Raised when a corpus cannot be split as requested."""


class EvaluationError(CitenavError):
    """Raised when a run cannot be evaluated against the given qrels."""


class ScorerUnavailableError(CitenavError):
    """External scorer process died, refused, or timed out.

    Carries the batch that failed so callers can report or retry it.
    """

    def __init__(self, message, batch=None):
        super().__init__(message)
        self.batch = batch or []


class ProtocolError(CitenavError):
    """External scorer replied with something outside the wire protocol."""


class PipelineStageError(CitenavError):
    """A pipeline stage failed; remembers which iteration."""

    def __init__(self, iteration, stage, cause):
        super().__init__(f"iteration {iteration}, stage {stage}: {cause}")
        self.iteration = iteration
        self.stage = stage
        self.__cause__ = cause
