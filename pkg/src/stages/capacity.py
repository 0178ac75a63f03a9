"""
Stage: Capacity

Estimates container capacity from the two selected frames of the first two
calibrated cameras. Frames whose masks are missing count as failed frames;
when no frame succeeds the training prior is used and flagged.

Reads from state:
    - state.record.calibrations, state.record.masks, state.record.frame_count

Writes to state:
    - state.capacity (CapacityEstimate)
"""

from dataclasses import replace

from src.core.base_stage import BaseStage
from src.geometry.capacity import CapacityEstimate, FitConfig, estimate_capacity_sequence
from src.media.record_inputs import selected_mask_pairs, stereo_calibrations
from src.models.sequence_state import SequenceState


class CapacityStage(BaseStage):
    def __init__(self, fit: FitConfig, prior_ml: float):
        super().__init__(name="capacity", version="1.0.0")
        self.fit = fit
        self.prior_ml = prior_ml

    def execute(self, state: SequenceState) -> SequenceState:
        stereo = stereo_calibrations(state.root, state.record)
        if stereo is None:
            self.warn(state, "fewer than two calibrated cameras; using the capacity prior")
            state.capacity = CapacityEstimate(
                capacity=self.prior_ml, used_prior=True, r_bar=0.0, h=0.0,
                failures=("fewer than two calibrated cameras",),
            )
            return state

        cam_a, cam_b, calibs = stereo
        pairs, missing = selected_mask_pairs(state.root, state.record, (cam_a, cam_b))
        estimate = estimate_capacity_sequence(pairs, calibs, self.prior_ml, self.fit)
        if missing:
            estimate = replace(estimate, failures=tuple(f"frame {f}: no mask pair" for f in missing) + estimate.failures)
        if estimate.used_prior:
            self.warn(state, f"no frame could be fitted; using the capacity prior {self.prior_ml:.1f} mL")
        state.capacity = estimate
        return state
