"""
Chat-completion client for augtune.

Shared by the remote prompt generator and the evaluation responder.
"""

from typing import Any, Optional

from augtune.constants import CHAT_COMPLETIONS_ENDPOINT, DEFAULT_TEMPERATURE
from augtune.errors import APIError
from augtune.request import Request
from augtune.types import ChatCompletionRequest
from augtune.workflow import Workflow


class ChatClient:
    """
    Client for an OpenAI-compatible ``/chat/completions`` endpoint.

    Each call sends a single user message and returns the first choice's
    message content, trimmed.
    """

    def __init__(
        self,
        request: Request,
        model: str,
        temperature: float = DEFAULT_TEMPERATURE,
        workflow: Optional[Workflow] = None,
    ):
        """
        Initialize the chat client.

        Args:
            request: Transport bound to the endpoint's base URL
            model: Model name sent with every request
            temperature: Sampling temperature
            workflow: Retry policy holder; a no-retry workflow when omitted
        """
        self.request = request
        self.model = model
        self.temperature = temperature
        self.workflow = workflow or Workflow()

    @property
    def parallelism(self) -> int:
        return self.workflow.parallelism

    def complete(self, content: str, step_id: str = "chat") -> str:
        """
        Send one user message and return the reply text.

        Args:
            content: The user message
            step_id: Name used in retry logs

        Returns:
            The first choice's message content with surrounding whitespace removed

        Raises:
            APIError: If the endpoint keeps failing or answers without a choice
        """
        body: ChatCompletionRequest = {
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": self.temperature,
        }
        response = self.workflow.step(
            {
                "id": step_id,
                "retries": None,
                "run": lambda: self.request.post(CHAT_COMPLETIONS_ENDPOINT, body),
            }
        )
        return extract_message_content(response)


def extract_message_content(response: Any) -> str:
    """
    Pull the first choice's message content out of a chat-completion response.

    Args:
        response: Parsed JSON response

    Returns:
        Trimmed content ("" when the content is null)

    Raises:
        APIError: If the response has no choices
    """
    try:
        content = response["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as e:
        raise APIError(message="malformed chat completion response") from e
    return (content or "").strip()
