"""
HTTP transport for augtune.

One ``Request`` serves one OpenAI-compatible base URL. It POSTs JSON bodies,
turns non-2xx answers into the ``APIError`` family and connection failures into
``APIConnectionError``; retrying is left to ``Workflow``.
"""

import logging
from typing import Any, Dict, Optional

import requests

from .constants import DEFAULT_REQUEST_TIMEOUT
from .errors import APIConnectionError, create_api_error

logger = logging.getLogger(__name__)


class Request:
    """
    JSON-over-HTTP transport bound to a base URL.

    Holds no per-call state, so generator, embedder and responder workers may
    share one instance.
    """

    def __init__(self, config: Dict[str, Any]):
        """
        Initialize the transport.

        Args:
            config: Dictionary with
                - base_url: Endpoint root, e.g. ``https://host/v1``
                - api_key: Bearer token; omitted from headers when empty
                - timeout: Seconds before a call counts as a connection failure
        """
        self.config = config
        self.base_url = (config.get("base_url") or "").rstrip("/")
        self.api_key = config.get("api_key") or ""
        self.timeout = config.get("timeout") or DEFAULT_REQUEST_TIMEOUT

    def build_url(self, endpoint: str) -> str:
        return f"{self.base_url}/{endpoint.lstrip('/')}"

    def build_headers(self, extra: Optional[Dict[str, str]] = None) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        headers.update(extra or {})
        return headers

    def post(
        self,
        endpoint: str,
        body: Optional[Dict[str, Any]] = None,
        headers: Optional[Dict[str, str]] = None,
    ) -> Any:
        """
        POST a JSON body and return the decoded answer.

        Args:
            endpoint: Path below the base URL
            body: JSON body
            headers: Headers added to the defaults

        Returns:
            The decoded JSON, or ``{"text": ...}`` when the body isn't JSON

        Raises:
            APIConnectionError: On timeouts and transport failures
            APIError: The status-specific subclass for a non-2xx answer
        """
        url = self.build_url(endpoint)
        logger.debug("POST %s", url)
        try:
            response = requests.post(
                url,
                headers=self.build_headers(headers),
                json=body or None,
                timeout=self.timeout,
            )
        except requests.Timeout as e:
            raise APIConnectionError("Request timed out.", cause=e) from e
        except requests.RequestException as e:
            raise APIConnectionError(cause=e) from e

        if not response.ok:
            raise create_api_error(
                status_code=response.status_code,
                response_text=response.text,
                headers=dict(response.headers),
            )
        try:
            return response.json()
        except ValueError:
            return {"text": response.text}
