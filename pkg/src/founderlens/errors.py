"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: input-format problems exit 2,
validation failures exit 3, anything else exits 1.
"""
from __future__ import annotations


class FounderLensError(Exception):
    """Base class for all package errors."""


class InputFormatError(FounderLensError):
    """A file does not conform to its documented wire format."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{prefix} {message}" if prefix else message)


class ValidationError(FounderLensError):
    """Well-formed input with semantically invalid content."""


class DegenerateTextError(FounderLensError):
    """An operation that needs tokens was given an empty text."""


class InsufficientCoverageError(FounderLensError):
    """Too few tokens matched the affect norms to compute statistics."""

    def __init__(self, matched: int, user_id: str | None = None):
        self.matched = matched
        self.user_id = user_id
        who = f"user {user_id!r}" if user_id else "text"
        super().__init__(
            f"{who}: only {matched} token(s) matched the affect norms; need at least 2"
        )


class UserExcluded(FounderLensError):
    """Signal that a user fails an inclusion criterion and is skipped."""

    def __init__(self, user_id: str, reason: str, detail: str = ""):
        self.user_id = user_id
        self.reason = reason
        msg = f"user {user_id!r} excluded: {reason}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SampleSizeError(FounderLensError):
    """Too few rows for the requested statistical operation."""


class ContractError(FounderLensError):
    """A caller violated an interface precondition."""


class EmptyCommunityError(FounderLensError):
    """A community has no active users in the founder window."""
