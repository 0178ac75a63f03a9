"""
Unit tests for BaseStage.

Tests cover:
- run(): timing recorded under the stage name, current_stage set
- Metrics: call counters, success rate, averages
- Errors: package errors propagate unchanged, others wrapped in StageExecutionError;
  a failure is raised, never stored on the state or its runlog entry
- warn(): prefixed warning on the state
"""

import pytest

from src.core.base_stage import BaseStage
from src.models.manifest import ManifestRecord
from src.models.sequence_state import SequenceState
from src.utils.exceptions import DomainError, StageExecutionError


class EchoStage(BaseStage):
    def __init__(self):
        super().__init__(name="echo")

    def execute(self, state):
        self.warn(state, "echoed")
        return state


class BrokenStage(BaseStage):
    def __init__(self, error: Exception):
        super().__init__(name="broken")
        self.error = error

    def execute(self, state):
        raise self.error


@pytest.fixture
def state():
    return SequenceState(record=ManifestRecord(sequence_id="s1", container_id="c1", container_type="cup"))


# ========================================
# Test: Successful runs
# ========================================

class TestRun:

    def test_records_timing_and_stage(self, state):
        out = EchoStage().run(state)
        assert out.current_stage == "echo"
        assert "echo" in out.timing
        assert out.timing["echo"] >= 0.0

    def test_warn_prefixes_stage_name(self, state):
        EchoStage().run(state)
        assert state.warnings == ["[echo] echoed"]

    def test_metrics_count_calls(self, state):
        stage = EchoStage()
        stage.run(state)
        stage.run(state)
        metrics = stage.get_metrics()
        assert metrics["stage_name"] == "echo"
        assert metrics["total_calls"] == 2
        assert metrics["success_rate"] == 100.0

    def test_repr(self):
        assert repr(EchoStage()) == "EchoStage(name='echo', version='1.0.0', calls=0)"


# ========================================
# Test: Failures
# ========================================

class TestErrors:

    def test_package_error_passes_through(self, state):
        stage = BrokenStage(DomainError(component="x", message="bad value"))
        with pytest.raises(DomainError):
            stage.run(state)
        assert stage.metrics.failures == 1
        assert "broken" not in state.timing

    def test_unexpected_error_is_wrapped(self, state):
        stage = BrokenStage(ValueError("boom"))
        with pytest.raises(StageExecutionError) as exc:
            stage.run(state)
        assert exc.value.details["original_error"] == "ValueError"
        assert exc.value.details["sequence_id"] == "s1"
        assert isinstance(exc.value.__cause__, ValueError)

    def test_runlog_entry_carries_no_error_slot(self, state):
        with pytest.raises(DomainError):
            BrokenStage(DomainError(component="x", message="bad value")).run(state)
        assert state.current_stage == "broken"
        assert set(state.to_runlog()) == {"sequence_id", "timing", "used_prior", "capacity_failures", "models", "warnings"}

    def test_failure_metrics(self, state):
        stage = BrokenStage(ValueError("boom"))
        with pytest.raises(StageExecutionError):
            stage.run(state)
        metrics = stage.get_metrics()
        assert metrics["failed_calls"] == 1
        assert metrics["success_rate"] == 0.0
