"""
Error handling for augtune.

This module provides the error hierarchy shared by the pipeline stages and the
HTTP error classes raised for remote generator/embedder/responder calls.
"""

import json
from typing import Any, Dict, List, NamedTuple, Optional

from .constants import RETRYABLE_STATUS_CODES


class AugtuneError(Exception):
    """Base error for everything augtune raises on purpose."""

    category = "error"


class InputError(AugtuneError, ValueError):
    """Raised when an operation's precondition on its inputs is violated."""

    category = "input"


class LineError(NamedTuple):
    """One malformed line of a JSON-lines input file."""

    line: int
    reason: str


class MalformedInputError(InputError):
    """Raised when too many lines of an input file cannot be parsed."""

    def __init__(self, path: str, report: List[LineError], total_lines: int):
        """
        Initialize a malformed input error.

        Args:
            path: The file being read
            report: Every malformed line with its 1-based line number
            total_lines: Number of non-blank lines in the file
        """
        self.path = path
        self.report = report
        self.total_lines = total_lines
        lines = ", ".join(str(item.line) for item in report[:10])
        super().__init__(
            f"{path}: {len(report)} of {total_lines} lines malformed (lines {lines})"
        )


class DuplicateIdError(InputError):
    """Raised when a record id appears twice in one file."""

    def __init__(self, record_id: str, line: int):
        self.record_id = record_id
        self.line = line
        super().__init__(f"duplicate record id {record_id!r} at line {line}")


class MissingCaptionError(InputError):
    """Raised when an image has no caption to build a target from."""

    def __init__(self, image_id: str):
        self.image_id = image_id
        super().__init__(f"no caption available for image {image_id!r}")


class ConfigError(AugtuneError):
    """Raised when a resolved run configuration is inconsistent."""

    category = "config"


class GenerationError(AugtuneError):
    """Raised when remote prompt augmentation fails after all retries."""

    category = "generation"

    def __init__(self, policy: str, message: str):
        self.policy = policy
        super().__init__(f"augmentation failed for policy {policy!r}: {message}")


class EmptyGenerationError(GenerationError):
    """Raised when a remote answer is empty or just repeats the instruction."""


class EmbeddingError(AugtuneError):
    """Raised when the remote embedder fails or answers with unusable vectors."""

    category = "embedding"


class APIError(AugtuneError):
    """
    A remote call answered with an error status or never got an answer.

    ``error`` is the decoded ``{"error": {...}}`` object of the response body
    when there was one.
    """

    category = "api"

    def __init__(
        self,
        status_code: Optional[int] = None,
        error: Optional[Dict[str, Any]] = None,
        message: Optional[str] = None,
        headers: Optional[Dict[str, str]] = None,
    ):
        self.status_code = status_code
        self.error = error
        self.headers = headers or {}
        self.request_id = self.headers.get("x-request-id")
        super().__init__(_error_message(status_code, error, message))


def _error_message(
    status_code: Optional[int],
    error: Optional[Dict[str, Any]],
    message: Optional[str],
) -> str:
    detail = message
    if isinstance(error, dict) and "message" in error:
        detail = error["message"]
        if not isinstance(detail, str):
            detail = json.dumps(detail)
    elif error:
        detail = json.dumps(error)

    if status_code:
        if detail:
            return f"{status_code} {detail}"
        return f"{status_code} status code (no body)"
    return detail or "API request failed"


class APIConnectionError(APIError):
    """Raised on timeouts and transport failures: no status code was received."""

    def __init__(
        self, message: str = "Connection error.", cause: Optional[Exception] = None
    ):
        super().__init__(message=message)
        if cause:
            self.__cause__ = cause


class BadRequestError(APIError):
    """400: the endpoint rejected the request body."""


class AuthenticationError(APIError):
    """401: missing or invalid API key."""


class PermissionDeniedError(APIError):
    """403"""


class NotFoundError(APIError):
    """404: usually a wrong base URL or model name."""


class ConflictError(APIError):
    """409"""


class UnprocessableEntityError(APIError):
    """422"""


class RateLimitError(APIError):
    """429: retried with backoff."""


class InternalServerError(APIError):
    """5xx: retried with backoff."""


_STATUS_ERRORS = {
    400: BadRequestError,
    401: AuthenticationError,
    403: PermissionDeniedError,
    404: NotFoundError,
    409: ConflictError,
    422: UnprocessableEntityError,
    429: RateLimitError,
}


def _error_body(response_text: Optional[str]) -> Optional[Dict[str, Any]]:
    if not response_text:
        return None
    try:
        data = json.loads(response_text)
    except json.JSONDecodeError:
        return None
    return data.get("error") if isinstance(data, dict) else None


def create_api_error(
    status_code: Optional[int] = None,
    response_text: Optional[str] = None,
    headers: Optional[Dict[str, str]] = None,
    message: Optional[str] = None,
) -> APIError:
    """
    Build the APIError subclass matching an HTTP status.

    Args:
        status_code: Response status; ``None`` when no response arrived
        response_text: Raw response body
        headers: Response headers
        message: Message used when the body carries none

    Returns:
        ``APIConnectionError`` without a status, the mapped subclass for known
        statuses, ``InternalServerError`` for 5xx and ``APIError`` otherwise
    """
    if not status_code:
        return APIConnectionError(message or "Connection error.")
    if status_code >= 500:
        error_class = InternalServerError
    else:
        error_class = _STATUS_ERRORS.get(status_code, APIError)
    return error_class(status_code, _error_body(response_text), message, headers)


def is_retryable(error: BaseException) -> bool:
    """Whether a failed remote call is worth another attempt."""
    if isinstance(error, APIConnectionError):
        return True
    if isinstance(error, APIError):
        return error.status_code in RETRYABLE_STATUS_CODES
    return False
