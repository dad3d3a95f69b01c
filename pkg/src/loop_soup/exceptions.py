"""
Exception classes for the loop soup engine.

All exceptions inherit from LoopSoupError and provide structured
error information with codes, messages, and optional details.
"""

from typing import Optional


class LoopSoupError(Exception):
    """Base exception for all loop soup errors."""

    def __init__(
        self,
        code: str,
        message: str,
        details: Optional[dict] = None,
    ) -> None:
        self.code = code
        self.message = message
        self.details = details or {}
        super().__init__(message)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(code={self.code!r}, message={self.message!r})"

    def to_dict(self) -> dict:
        """Convert exception to dictionary for serialization."""
        return {
            "error_type": self.__class__.__name__,
            "code": self.code,
            "message": self.message,
            "details": self.details,
        }


class ValidationError(LoopSoupError):
    """Raised when user input (distribution, points, config fields) is invalid."""

    pass


class DomainError(LoopSoupError):
    """Raised when an argument lies outside the domain of an operation."""

    pass


class SingularityError(DomainError):
    """Raised at singular points (cross ratio 0 or 1, coincident insertions, Moebius poles)."""

    pass


class AccuracyError(LoopSoupError):
    """Raised when a requested tolerance cannot be reached; details carry the achieved bound."""

    pass


class DegeneracyError(LoopSoupError):
    """Raised for near-singular Gram matrices and degenerate intermediate dimensions."""

    pass


class ContractViolationError(LoopSoupError):
    """Raised when a pluggable component (weight provider, evaluator) breaks its contract."""

    pass


class UnsupportedLabelError(LoopSoupError):
    """Raised when no closed form is shipped for a block label."""

    pass


class MCInconclusiveError(LoopSoupError):
    """Raised when a Monte Carlo run cannot certify its estimate."""

    pass


class ConfigError(LoopSoupError):
    """Raised when a configuration file cannot be read or parsed."""

    pass
