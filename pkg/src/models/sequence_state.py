"""
SequenceState - per-sequence state passed between pipeline stages.

One SequenceState flows through every stage for one manifest record; each
stage reads its inputs from it and writes its outputs back.

Example:
    >>> state = SequenceState(record=record, index=0)
    >>> state.current_stage = "audio_features"
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.features.audio_features import LongTermVector
from src.geometry.capacity import CapacityEstimate
from src.models.labels import ClassProbs, FillingLevel, FillingType
from src.models.manifest import ManifestRecord

TASKS = ("type", "level")


@dataclass
class SequenceState:
    """
    Shared state of one sequence.

    Attributes:
        record: Manifest record being processed
        index: Position of the record in the manifest (result ordering key)
        root: Directory the record's relative paths are anchored at
        features: 136-d classical audio vector
        model_probs: {task: {model name: ClassProbs}} from every model that ran
        fused: {task: averaged ClassProbs}
        filling_type, filling_level: decoded labels
        capacity: capacity estimate (with prior fallback flag)
        mass_g: composed filling mass
        warnings: non-fatal problems (e.g. a missing modality); stage failures raise instead
        timing: seconds spent per stage
    """

    record: ManifestRecord
    index: int = 0
    root: Path = Path(".")

    # Stage outputs
    features: Optional[LongTermVector] = None
    model_probs: Dict[str, Dict[str, ClassProbs]] = field(default_factory=lambda: {task: {} for task in TASKS})
    fused: Dict[str, ClassProbs] = field(default_factory=dict)
    filling_type: Optional[FillingType] = None
    filling_level: Optional[FillingLevel] = None
    capacity: Optional[CapacityEstimate] = None
    mass_g: Optional[float] = None

    # Tracking
    warnings: List[str] = field(default_factory=list)
    timing: Dict[str, float] = field(default_factory=dict)
    current_stage: Optional[str] = None

    @property
    def sequence_id(self) -> str:
        return self.record.sequence_id

    def add_warning(self, warning: str) -> None:
        self.warnings.append(warning)

    def add_timing(self, stage_name: str, elapsed_seconds: float) -> None:
        self.timing[stage_name] = elapsed_seconds

    def add_probs(self, task: str, model: str, probs: ClassProbs) -> None:
        self.model_probs[task][model] = probs

    def to_submission_row(self) -> Dict[str, Any]:
        return {
            "sequence_id": self.sequence_id,
            "container_capacity_ml": self.capacity.capacity,
            "filling_type": self.filling_type.label,
            "filling_level_percent": self.filling_level.percent,
            "filling_mass_g": self.mass_g,
        }

    def to_runlog(self) -> Dict[str, Any]:
        """Sidecar entry: timing, fallbacks and warnings of this sequence."""
        return {
            "sequence_id": self.sequence_id,
            "timing": {name: round(seconds, 6) for name, seconds in self.timing.items()},
            "used_prior": None if self.capacity is None else self.capacity.used_prior,
            "capacity_failures": [] if self.capacity is None else list(self.capacity.failures),
            "models": {task: sorted(models) for task, models in self.model_probs.items()},
            "warnings": list(self.warnings),
        }
