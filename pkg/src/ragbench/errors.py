"""Exception hierarchy shared by every ragbench module."""


class RagBenchError(Exception):
    """Base class for all errors raised by ragbench."""


class InvalidInputError(RagBenchError, ValueError):
    pass


class ConflictError(RagBenchError):
    """Duplicate identifiers (document ids, chunk ids)."""


class ParseError(RagBenchError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f"{':' if where else 'line '}{line}"
        super().__init__(f"{where}: {message}" if where else message)


class ConfigError(RagBenchError):
    pass


class BackendError(RagBenchError):
    pass


class BackendUnavailableError(BackendError):
    """Transport failure, timeout, or non-2xx status after all retries."""


class UnsupportedOperationError(BackendError):
    """The backend cannot perform the requested operation (e.g. no logprob echo)."""


class DataIntegrityError(RagBenchError):
    pass


class DegenerateDataError(RagBenchError):
    pass


class LabelingError(RagBenchError):
    pass


class PipelineError(RagBenchError):
    """Generation failed mid-pipeline; ``trace`` holds whatever was completed."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace
