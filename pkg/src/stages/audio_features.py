"""
Stage: Audio Features

Computes the 136-d classical audio vector the forests classify.

Reads from state:
    - state.record.audio

Writes to state:
    - state.features (LongTermVector), None when the record has no audio
"""

from typing import Optional

from src.core.base_stage import BaseStage
from src.core.feature_cache import FeatureCache
from src.media.record_inputs import classical_vector
from src.models.sequence_state import SequenceState


class AudioFeatureStage(BaseStage):
    def __init__(self, window: float, hop: float, cache: Optional[FeatureCache] = None):
        super().__init__(name="audio_features", version="1.0.0")
        self.window = window
        self.hop = hop
        self.cache = cache

    def execute(self, state: SequenceState) -> SequenceState:
        state.features = classical_vector(state.root, state.record, self.window, self.hop, self.cache)
        if state.features is None:
            self.warn(state, "no audio file; forest models skipped")
        return state
