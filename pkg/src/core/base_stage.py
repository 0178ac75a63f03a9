"""
BaseStage - common wrapper for the per-sequence pipeline stages.

A stage reads what earlier stages left on the SequenceState and writes its
own slot. Subclasses implement execute(); callers always go through run(),
which times the call, counts it and normalises failures.

Example:
    >>> class CapacityStage(BaseStage):
    ...     def __init__(self, prior_ml: float):
    ...         super().__init__(name="capacity")
    ...         self.prior_ml = prior_ml
    ...
    ...     def execute(self, state: SequenceState) -> SequenceState:
    ...         state.capacity = self._estimate(state.record)
    ...         return state
"""

import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any

from src.models.sequence_state import SequenceState
from src.utils.exceptions import FillMassError, StageExecutionError
from src.utils.logger import setup_logger


@dataclass
class StageMetrics:
    """Call counters for one stage; the pipeline's worker threads share it."""

    calls: int = 0
    failures: int = 0
    seconds: float = 0.0
    last_seconds: float | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, seconds: float, ok: bool) -> None:
        with self._lock:
            self.calls += 1
            self.failures += not ok
            self.seconds += seconds
            self.last_seconds = seconds

    def summary(self) -> dict[str, Any]:
        with self._lock:
            calls, failures, seconds = self.calls, self.failures, self.seconds
        return {
            "total_calls": calls,
            "successful_calls": calls - failures,
            "failed_calls": failures,
            "success_rate": round(100.0 * (calls - failures) / calls, 2) if calls else 0.0,
            "total_time_seconds": round(seconds, 3),
            "average_time_seconds": round(seconds / calls, 4) if calls else 0.0,
        }


class BaseStage(ABC):
    """
    Abstract pipeline stage.

    Attributes:
        name: short stage id; prefixes warnings, errors and timing keys
        version: reported alongside the metrics
        logger: 'stage.<name>' logger
        metrics: StageMetrics shared by every thread running this stage
    """

    def __init__(self, name: str, version: str = "1.0.0", log_level: str | None = None):
        self.name = name
        self.version = version
        self.logger = setup_logger(name=f"stage.{name}", level=log_level)
        self.metrics = StageMetrics()

    @abstractmethod
    def execute(self, state: SequenceState) -> SequenceState:
        """Stage logic: read inputs from state, write this stage's outputs, return it."""

    def run(self, state: SequenceState) -> SequenceState:
        """
        Execute with timing and error normalisation.

        Package errors (FillMassError subclasses) propagate unchanged so the
        CLI can map them to exit codes; anything else becomes a
        StageExecutionError carrying the sequence id.
        """
        state.current_stage = self.name
        started = time.perf_counter()
        try:
            state = self.execute(state)
        except Exception as e:
            elapsed = time.perf_counter() - started
            self.metrics.record(elapsed, ok=False)
            self.logger.error(f"[{self.name}] {state.sequence_id} failed: {e}", extra={"sequence_id": state.sequence_id})
            if isinstance(e, FillMassError):
                raise
            raise StageExecutionError(
                component=f"stage.{self.name}",
                message=str(e),
                details={"sequence_id": state.sequence_id, "execution_time": elapsed, "original_error": type(e).__name__},
            ) from e

        elapsed = time.perf_counter() - started
        self.metrics.record(elapsed, ok=True)
        state.add_timing(self.name, elapsed)
        self.logger.debug(f"[{self.name}] {state.sequence_id} in {elapsed:.4f}s")
        return state

    def warn(self, state: SequenceState, message: str) -> None:
        """Non-fatal problem: kept on the state and logged."""
        state.add_warning(f"[{self.name}] {message}")
        self.logger.warning(f"[{self.name}] {state.sequence_id}: {message}", extra={"sequence_id": state.sequence_id})

    def get_metrics(self) -> dict[str, Any]:
        return {"stage_name": self.name, "stage_version": self.version, **self.metrics.summary()}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name='{self.name}', version='{self.version}', calls={self.metrics.calls})"
