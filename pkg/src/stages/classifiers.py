"""
Stages: per-model classifiers

Each stage runs one trained model for one task and stores its class
distribution under the model's name. A record lacking the model's modality
gets a warning and no entry, which drops the model from that sequence's
average.

    ForestStage      reads state.features            writes model_probs[task]["forest"]
    AudioGruStage    reads record.embeddings.audio   writes model_probs[task]["audio_gru"]
    VideoGruStage    reads record.embeddings.video   writes model_probs["level"]["video_gru"]

The video stage classifies every camera stream with the same GRU, sums the
per-camera logits and applies one softmax.
"""

from src.classifiers.forest import RandomForestModel, predict_proba
from src.classifiers.seqnet import ClassifierHead, GruStack, classify, combine_streams
from src.core.base_stage import BaseStage
from src.media.record_inputs import audio_embeddings, video_embeddings
from src.models.sequence_state import SequenceState

FOREST = "forest"
AUDIO_GRU = "audio_gru"
VIDEO_GRU = "video_gru"


class ForestStage(BaseStage):
    def __init__(self, task: str, model: RandomForestModel):
        super().__init__(name=f"{FOREST}_{task}", version="1.0.0")
        self.task = task
        self.model = model

    def execute(self, state: SequenceState) -> SequenceState:
        if state.features is None:
            return state
        state.add_probs(self.task, FOREST, predict_proba(self.model, state.features.values))
        return state


class AudioGruStage(BaseStage):
    def __init__(self, task: str, stack: GruStack, head: ClassifierHead):
        super().__init__(name=f"{AUDIO_GRU}_{task}", version="1.0.0")
        self.task = task
        self.stack = stack
        self.head = head

    def execute(self, state: SequenceState) -> SequenceState:
        sequence = audio_embeddings(state.root, state.record)
        if sequence is None:
            self.warn(state, "no audio embeddings; audio GRU skipped")
            return state
        logits = classify(self.stack, self.head, sequence.data)
        state.add_probs(self.task, AUDIO_GRU, combine_streams([logits]))
        return state


class VideoGruStage(BaseStage):
    def __init__(self, stack: GruStack, head: ClassifierHead):
        super().__init__(name=f"{VIDEO_GRU}_level", version="1.0.0")
        self.stack = stack
        self.head = head

    def execute(self, state: SequenceState) -> SequenceState:
        streams = video_embeddings(state.root, state.record)
        if not streams:
            self.warn(state, "no video embeddings; video GRU skipped")
            return state
        logits = [classify(self.stack, self.head, stream.data) for stream in streams]
        state.add_probs("level", VIDEO_GRU, combine_streams(logits))
        return state
