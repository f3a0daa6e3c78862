"""Exception hierarchy. All engine errors derive from ConvQAError."""
from __future__ import annotations


class ConvQAError(Exception):
    pass


class DatasetFormatError(ConvQAError):
    """A dataset file line failed to parse or validate."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class TemplateError(ConvQAError):
    pass


class BackendError(ConvQAError):
    """A text-generation backend failed. Carries the role it was serving."""

    def __init__(self, message: str, role: str | None = None):
        super().__init__(message)
        self.role = role


class TransportError(BackendError):
    """HTTP failure after retries; ``status`` is the last status seen, if any."""

    def __init__(self, message: str, role: str | None = None, status: int | None = None):
        super().__init__(message, role=role)
        self.status = status


class RetrievalError(ConvQAError):
    pass


class StageError(ConvQAError):
    """Wraps an error raised inside one pipeline stage; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


class SessionNotFoundError(ConvQAError):
    pass


class SessionBusyError(ConvQAError):
    """A second turn was requested while one is still running on the session."""
