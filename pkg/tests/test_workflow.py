"""
Tests for the Workflow execution engine.
"""

import threading
import time

import pytest

from augtune.errors import APIConnectionError, BadRequestError, RateLimitError
from augtune.workflow import RetryConfig, StepConfig, Workflow


class RecordingWorkflow(Workflow):
    """Workflow that records retry delays instead of sleeping."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.sleeps = []

    def _sleep(self, seconds):
        self.sleeps.append(seconds)


def flaky(failures, error_factory, result="success"):
    """A task that fails ``failures`` times, then returns ``result``."""
    calls = {"count": 0}

    def task():
        calls["count"] += 1
        if calls["count"] <= failures:
            raise error_factory()
        return result

    return task, calls


class TestWorkflow:
    """Test the Workflow execution engine."""

    def test_workflow_initialization(self):
        """Test workflow defaults."""
        workflow = Workflow()
        assert workflow.retries is None
        assert workflow.parallelism == 1

        assert Workflow(parallelism=0).parallelism == 1

    def test_basic_step_execution(self):
        """Test basic step execution without retries."""
        workflow = Workflow()
        config: StepConfig = {"id": "test_step", "retries": None, "run": lambda: 42}

        assert workflow.step(config) == 42

    def test_step_keeps_no_results(self):
        """Test a workflow shared by worker threads holds only its settings."""
        workflow = Workflow(parallelism=3)
        workflow.map_ordered(
            lambda n: workflow.step({"id": f"s{n}", "retries": None, "run": lambda: n}),
            range(6),
        )
        assert vars(workflow) == {"retries": None, "parallelism": 3}

    def test_step_retries_transient_errors(self):
        """Test a rate-limited step succeeds on a later attempt."""
        workflow = RecordingWorkflow()
        task, calls = flaky(2, lambda: RateLimitError(429))
        retries: RetryConfig = {"limit": 3, "delay": 100, "backoff": "exponential"}

        result = workflow.step({"id": "flaky", "retries": retries, "run": task})

        assert result == "success"
        assert calls["count"] == 3
        assert workflow.sleeps == [0.1, 0.2]

    def test_step_gives_up_after_limit(self):
        """Test the last error propagates once attempts are used up."""
        workflow = RecordingWorkflow()
        task, calls = flaky(10, APIConnectionError)
        retries: RetryConfig = {"limit": 2, "delay": 10, "backoff": "fixed"}

        with pytest.raises(APIConnectionError):
            workflow.step({"id": "down", "retries": retries, "run": task})
        assert calls["count"] == 3
        assert workflow.sleeps == [0.01, 0.01]

    def test_step_does_not_retry_client_errors(self):
        """Test a 400 is raised on the first attempt."""
        workflow = RecordingWorkflow()
        task, calls = flaky(1, lambda: BadRequestError(400))
        retries: RetryConfig = {"limit": 5, "delay": 10, "backoff": "fixed"}

        with pytest.raises(BadRequestError):
            workflow.step({"id": "bad", "retries": retries, "run": task})
        assert calls["count"] == 1
        assert workflow.sleeps == []

    def test_workflow_default_retries(self):
        """Test steps without their own retry config use the workflow's."""
        retries: RetryConfig = {"limit": 1, "delay": 5, "backoff": "linear"}
        workflow = RecordingWorkflow(retries=retries)
        task, calls = flaky(1, APIConnectionError)

        assert workflow.step({"id": "s", "retries": None, "run": task}) == "success"
        assert calls["count"] == 2

    def test_calculate_delay(self):
        """Test the three backoff strategies."""
        workflow = Workflow()

        def delays(strategy):
            return [workflow._calculate_delay(100, n, strategy) for n in (1, 2, 3)]

        assert delays("exponential") == [100, 200, 400]
        assert delays("linear") == [100, 200, 300]
        assert delays("fixed") == [100, 100, 100]


class TestMapOrdered:
    """Test the bounded worker pool."""

    def test_results_keep_input_order(self):
        """Test results come back in input order whatever the finish order."""

        def slow_for_small(n):
            time.sleep(0.001 * (10 - n))
            return n * n

        workflow = Workflow(parallelism=4)
        assert workflow.map_ordered(slow_for_small, range(10)) == [
            n * n for n in range(10)
        ]

    def test_parallelism_bound(self):
        """Test no more than ``parallelism`` calls run at once."""
        lock = threading.Lock()
        state = {"running": 0, "peak": 0}

        def task(n):
            with lock:
                state["running"] += 1
                state["peak"] = max(state["peak"], state["running"])
            time.sleep(0.005)
            with lock:
                state["running"] -= 1
            return n

        Workflow(parallelism=3).map_ordered(task, range(12))
        assert 1 <= state["peak"] <= 3

    def test_first_error_propagates(self):
        """Test an exception in any call reaches the caller."""

        def task(n):
            if n == 3:
                raise ValueError("boom")
            return n

        with pytest.raises(ValueError, match="boom"):
            Workflow(parallelism=2).map_ordered(task, range(6))

    def test_sequential_path(self):
        """Test parallelism 1 runs in the calling thread."""
        caller = threading.get_ident()
        threads = Workflow().map_ordered(lambda _: threading.get_ident(), range(3))
        assert threads == [caller] * 3
