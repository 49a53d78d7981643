"""Task-level errors shared across modules and mapped to CLI exit codes."""

from __future__ import annotations


class DataError(Exception):
    """Invalid input data: files, records, predicates, or problem text."""


class TransportError(Exception):
    """The remote completion service could not be reached or answered badly."""


class ExtractionError(DataError):
    """No valid predicates could be extracted from the input after retries."""

    def __init__(self, message: str, raw_completion: str | None = None) -> None:
        super().__init__(message)
        self.raw_completion = raw_completion
