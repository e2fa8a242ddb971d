"""
Step execution engine for remote calls.

This module runs remote steps (augmentation, embedding, response collection)
with:
- retries on transient failures
- configurable retry strategies (exponential, linear, fixed backoff)
- a bounded worker pool whose results come back in input order
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Generic, Iterable, List, Optional, TypeVar

from typing_extensions import Literal, TypedDict

from .errors import is_retryable

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


class RetryConfig(TypedDict):
    """Configuration for step retry behavior."""

    limit: int
    delay: int
    backoff: Literal["exponential", "linear", "fixed"]


class StepConfig(TypedDict, Generic[T]):
    """Configuration for a workflow step."""

    id: str
    retries: Optional[RetryConfig]
    run: Callable[[], T]


class Workflow:
    """
    Executes steps with retry logic, and maps steps over a bounded pool of
    worker threads.
    """

    def __init__(self, retries: Optional[RetryConfig] = None, parallelism: int = 1):
        """
        Initialize a new workflow.

        Args:
            retries: Default retry configuration for steps that don't set one
            parallelism: Upper bound on concurrently running steps
        """
        self.retries = retries
        self.parallelism = max(1, int(parallelism))

    def step(self, config: StepConfig[T]) -> T:
        """
        Execute a step with retry logic.

        Only retryable errors (connection failures, 429 and 5xx responses) are
        retried; anything else is raised immediately.

        Args:
            config: Step configuration including ID, retries, and execution function

        Returns:
            The result of the step execution

        Raises:
            Exception: The last error once all attempts are used up
        """
        retry_config = config.get("retries") or self.retries
        max_attempts = retry_config["limit"] + 1 if retry_config else 1
        start_time = time.monotonic()

        attempt = 1
        while True:
            try:
                result = config["run"]()
            except Exception as error:
                if attempt >= max_attempts or not is_retryable(error):
                    elapsed = (time.monotonic() - start_time) * 1000
                    logger.debug(
                        "step %s failed after %d attempt(s) in %.2fms: %s",
                        config["id"],
                        attempt,
                        elapsed,
                        error,
                    )
                    raise

                delay = self._calculate_delay(
                    retry_config["delay"], attempt, retry_config["backoff"]
                )
                logger.warning(
                    "step %s attempt %d failed, retrying in %dms: %s",
                    config["id"],
                    attempt,
                    delay,
                    error,
                )
                self._sleep(delay / 1000.0)
                attempt += 1
                continue

            logger.debug(
                "step %s: %.2fms",
                config["id"],
                (time.monotonic() - start_time) * 1000,
            )
            return result

    def map_ordered(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """
        Apply ``fn`` to every item using at most ``parallelism`` threads.

        Results are returned in input order regardless of completion order. The
        first exception raised by any call propagates.

        Args:
            fn: Function applied to each item
            items: Inputs

        Returns:
            List of results aligned with ``items``
        """
        items = list(items)
        if self.parallelism == 1 or len(items) <= 1:
            return [fn(item) for item in items]

        with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
            return list(pool.map(fn, items))

    def _calculate_delay(
        self,
        base_delay: int,
        attempt: int,
        strategy: Literal["exponential", "linear", "fixed"],
    ) -> int:
        """
        Calculate retry delay based on strategy.

        Args:
            base_delay: Base delay in milliseconds
            attempt: Current attempt number (1-based)
            strategy: Backoff strategy to use

        Returns:
            Calculated delay in milliseconds
        """
        if strategy == "exponential":
            return base_delay * (2 ** (attempt - 1))
        if strategy == "linear":
            return base_delay * attempt
        # fixed
        return base_delay

    def _sleep(self, seconds: float) -> None:
        time.sleep(seconds)
