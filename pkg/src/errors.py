"""
Exception hierarchy for privreport.

Validation findings are returned as Diagnostic lists; the exceptions below are
reserved for inputs that cannot be processed at all and for provider failures.
"""

from typing import Iterable, Optional


class PrivReportError(Exception):
    """Base class for every error raised by this package."""


# --- Loading ---

class LoadError(PrivReportError):
    """An input artifact could not be read or parsed."""


class DfdSyntaxError(LoadError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateIdError(LoadError):
    def __init__(self, element_id: str):
        super().__init__(f"duplicate id '{element_id}'")
        self.element_id = element_id


class UnknownReferenceError(LoadError):
    def __init__(self, element_id: str):
        super().__init__(f"reference to undeclared node '{element_id}'")
        self.element_id = element_id


class EmptyDiagramError(LoadError):
    def __init__(self):
        super().__init__("the diagram declares no nodes")


class MissingFileError(LoadError):
    def __init__(self, name: str):
        super().__init__(f"missing file '{name}'")
        self.name = name


class SchemaViolationError(LoadError):
    def __init__(self, file: str, path: str, reason: str):
        super().__init__(f"{file} at {path}: {reason}")
        self.file = file
        self.path = path
        self.reason = reason


# --- Contracts ---

class PreconditionViolated(PrivReportError):
    def __init__(self, message: str, subjects: Iterable[str] = ()):
        super().__init__(message)
        self.subjects = list(subjects)


class MissingSlotError(PrivReportError):
    def __init__(self, slot: str):
        super().__init__(f"no value for prompt slot '{slot}'")
        self.slot = slot


class CoverageMismatchError(PrivReportError):
    def __init__(self, entry_ids: Iterable[str]):
        self.entry_ids = sorted(entry_ids)
        super().__init__(f"explanations do not match in-scope entries: {', '.join(self.entry_ids)}")


# --- Provider ---

class ProviderError(PrivReportError):
    """The completion provider could not produce a usable completion."""


class AuthMissingError(ProviderError):
    def __init__(self, env_name: str):
        super().__init__(f"environment variable {env_name} is not set")
        self.env_name = env_name


class TransportError(ProviderError):
    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status


class MalformedResponseError(ProviderError):
    pass


class EmptyCompletionError(ProviderError):
    def __init__(self, agent: str):
        super().__init__(f"{agent} returned an empty completion")
        self.agent = agent


# --- Agent output shape ---

class ShapeError(PrivReportError):
    """Agent output did not have the expected structure."""


class UnclosedScratchpadError(ShapeError):
    def __init__(self):
        super().__init__("<scratchpad> opened but never closed")


class MissingPartError(ShapeError):
    def __init__(self, part: str):
        super().__init__(f"completion is missing the <{part}> part")
        self.part = part


class ItemCountMismatchError(ShapeError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected {expected} requirement items, got {got}")
        self.expected = expected
        self.got = got


# --- Pipeline ---

class StageError(PrivReportError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class ReviewAbortedError(PrivReportError):
    def __init__(self, stage: str):
        super().__init__(f"review of '{stage}' ended without confirmation (no input)")
        self.stage = stage
