"""
Exception hierarchy shared by every dxpath module.

Every error carries a human-readable message and an optional details dict
that the CLI merges into its single-line JSON error object.
"""

from typing import Any, Dict, Optional


class DxPathError(Exception):
    """Base exception for dxpath errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class ConfigError(DxPathError):
    """Invalid or inconsistent configuration."""
    pass


# kg-store

class GraphFormatError(DxPathError):
    """Malformed concept, triple or allowlist file."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        self.path = path
        self.line = line
        details = {"path": path, "line": line} if path else None
        super().__init__(message, details)


class UnknownConceptError(DxPathError):
    """Triples or golds reference CUIs absent from the concept table."""

    def __init__(self, message: str, ids):
        self.ids = sorted(ids)
        super().__init__(message, {"ids": self.ids})


class ConceptNotFoundError(DxPathError):
    """A queried concept does not exist in the graph."""
    pass


# concept-extractor

class ExtractionError(DxPathError):
    pass


class DatasetError(DxPathError):
    """Malformed notes file or training example."""
    pass


# numerics

class ShapeError(DxPathError):
    """Operands of a primitive have incompatible shapes."""
    pass


class TapeError(DxPathError):
    """Backward requested for a value the tape never recorded."""
    pass


class NonFiniteError(DxPathError):
    """NaN or Inf met in checked mode."""
    pass


# model

class EncodingError(DxPathError):
    pass


class RankerError(DxPathError):
    pass


class TrainingError(DxPathError):
    pass


class CheckpointError(DxPathError):
    pass


class MetricError(DxPathError):
    pass


# prompt-kit

class PromptError(DxPathError):
    pass


class TemplateError(PromptError):
    """Template file is malformed or leaves a placeholder unresolved."""
    pass


class LLMError(DxPathError):
    """Completion endpoint failure."""

    def __init__(self, message: str, status_code: Optional[int] = None, response: Any = None):
        self.status_code = status_code
        self.response = response
        super().__init__(message, {"status_code": status_code})


class SynthError(DxPathError):
    pass
