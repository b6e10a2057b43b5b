"""Exception hierarchy shared across the pipeline.

The CLI maps these onto process exit codes: input/config problems exit 2,
id/offset/marker problems exit 3, backend exhaustion exits 4.
"""

from __future__ import annotations

from dataclasses import dataclass


class TextseamError(Exception):
    """Base class for all errors raised by this package."""


@dataclass(frozen=True)
class LineProblem:
    """One malformed or invalid line in a JSONL file."""

    line_number: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line_number}: {self.message}"


class CorpusFormatError(TextseamError):
    """A JSONL file contained malformed or invalid lines.

    The whole file is scanned before this is raised, so ``problems`` lists
    every offending line, not just the first.
    """

    def __init__(self, problems: list[LineProblem]):
        self.problems = problems
        preview = "; ".join(str(p) for p in problems[:5])
        more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
        super().__init__(f"{len(problems)} invalid line(s): {preview}{more}")


class ConfigError(TextseamError):
    """Pipeline configuration is missing, malformed, or inconsistent."""


class MarkerError(TextseamError):
    """A break marker is absent, duplicated, or would be ambiguous."""


class OffsetAttributionError(TextseamError):
    """A labeled token's start offset could not be attributed to any word.

    Signals corrupted character offsets coming back from a backend.
    """


class IdMismatchError(TextseamError):
    """Prediction and gold files disagree on instance ids."""

    def __init__(self, message: str, offending_ids: list[object] | None = None):
        super().__init__(message)
        self.offending_ids = offending_ids or []


class BackendError(TextseamError):
    """Base class for backend transport and payload failures."""


class BackendRequestError(BackendError):
    """The service rejected a request (non-2xx, non-retryable)."""


class BackendPayloadError(BackendError):
    """The service answered with a malformed or invalid payload.

    Non-retryable: the same request would produce the same bad payload.
    """


class BackendExhaustedError(BackendError):
    """Transient transport failures persisted past the retry budget."""
