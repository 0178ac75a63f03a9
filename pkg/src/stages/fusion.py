"""
Stage: Fusion

Averages the distributions of the models that ran for each task, decodes the
labels and composes the filling mass.

Reads from state:
    - state.model_probs, state.capacity, state.record.container_type

Writes to state:
    - state.fused, state.filling_type, state.filling_level, state.mass_g
"""

from src.core.base_stage import BaseStage
from src.fusion.mass import DensityTable, apply_consistency, average_probs, decode_label, filling_mass
from src.models.labels import FillingLevel, FillingType
from src.models.pipeline_config import TaskModels
from src.models.sequence_state import TASKS, SequenceState
from src.utils.exceptions import DomainError


class FusionStage(BaseStage):
    def __init__(self, models: TaskModels, densities: DensityTable, consistency: bool = False):
        super().__init__(name="fusion", version="1.0.0")
        self.models = models
        self.densities = densities
        self.consistency = consistency

    def execute(self, state: SequenceState) -> SequenceState:
        for task in TASKS:
            enabled = getattr(self.models, task)
            probs = [state.model_probs[task][name] for name in enabled if name in state.model_probs[task]]
            if not probs:
                raise DomainError(
                    component="stage.fusion",
                    message=f"{state.sequence_id}: no enabled {task} model could run",
                    details={"enabled": list(enabled)},
                )
            state.fused[task] = average_probs(probs)

        if self.consistency:
            state.filling_type, state.filling_level = apply_consistency(
                state.fused["type"], state.fused["level"], state.record.container_type
            )
        else:
            state.filling_type = FillingType(decode_label(state.fused["type"]))
            state.filling_level = FillingLevel(decode_label(state.fused["level"]))

        state.mass_g = filling_mass(state.capacity.capacity, state.filling_level, state.filling_type, self.densities)
        return state
