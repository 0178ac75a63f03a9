"""
Unit tests for the per-sequence pipeline stages.

Tests cover:
- AudioFeatureStage: 136-d vector from a WAV, cache reuse, warning when audio is absent
- ForestStage: leaf distribution stored under "forest", skipped without features
- AudioGruStage / VideoGruStage: softmax of (summed) logits, warning when embeddings are absent
- CapacityStage: stereo fit from mask files, prior with a single camera, missing masks counted as failures
- FusionStage: mean of the models that ran, DomainError when none ran, consistency decoding, mass
"""

import numpy as np
import pytest

from src.classifiers.forest import DecisionTree, RandomForestModel
from src.classifiers.seqnet import ClassifierHead, GruLayerParams, GruStack
from src.core.feature_cache import FeatureCache
from src.features.audio_features import N_LONG_TERM, LongTermVector
from src.fusion.mass import DensityTable
from src.geometry.capacity import CapacityEstimate, FitConfig
from src.media.calibration import write_calibration
from src.media.embeddings import write_embedding_sequence
from src.media.pgm import write_pgm_mask
from src.media.wav import write_wav
from src.models.labels import ClassProbs, FillingLevel, FillingType
from src.models.manifest import EmbeddingPaths, ManifestRecord
from src.models.media import EmbeddingSequence
from src.models.pipeline_config import TaskModels
from src.models.sequence_state import SequenceState
from src.stages.audio_features import AudioFeatureStage
from src.stages.capacity import CapacityStage
from src.stages.classifiers import AudioGruStage, ForestStage, VideoGruStage
from src.stages.fusion import FusionStage
from src.synth.scene import render_cylinder_masks
from src.utils.exceptions import DomainError

FAST_FIT = FitConfig(n_angles=36, refine_steps=3)


def _state(tmp_path, **fields) -> SequenceState:
    record = ManifestRecord(sequence_id="s1", container_id="cup_1", container_type=fields.pop("container_type", "cup"), **fields)
    return SequenceState(record=record, root=tmp_path)


def _stub_forest(counts) -> RandomForestModel:
    """Single-leaf forest: every input lands on the root."""
    tree = DecisionTree(
        feature=np.array([-1]),
        threshold=np.array([0.0]),
        left=np.array([-1]),
        right=np.array([-1]),
        counts=np.array([counts]),
        n_features=N_LONG_TERM,
    )
    return RandomForestModel(trees=[tree], n_classes=len(counts), n_features=N_LONG_TERM, seed=0)


def _constant_gru(input_size: int, bias) -> tuple[GruStack, ClassifierHead]:
    """Zero GRU keeps h at 0, so the logits equal the head bias."""
    bias = np.asarray(bias, dtype=np.float64)
    stack = GruStack(layers=[GruLayerParams.zeros(input_size, 4)])
    return stack, ClassifierHead(W=np.zeros((bias.size, 4)), b=bias)


# ========================================
# Test: AudioFeatureStage
# ========================================

class TestAudioFeatureStage:

    def test_vector_from_wav(self, tmp_path, rice_clip):
        write_wav(tmp_path / "a.wav", rice_clip)
        state = AudioFeatureStage(0.05, 0.025).run(_state(tmp_path, audio="a.wav"))
        assert state.features.values.shape == (N_LONG_TERM,)
        assert np.all(np.isfinite(state.features.values))

    def test_cache_is_reused(self, tmp_path, rice_clip):
        write_wav(tmp_path / "a.wav", rice_clip)
        cache = FeatureCache()
        stage = AudioFeatureStage(0.05, 0.025, cache)
        first = stage.run(_state(tmp_path, audio="a.wav")).features
        second = stage.run(_state(tmp_path, audio="a.wav")).features
        assert first is second
        assert cache.hits == 1

    def test_missing_audio_warns(self, tmp_path):
        state = AudioFeatureStage(0.05, 0.025).run(_state(tmp_path))
        assert state.features is None
        assert state.warnings == ["[audio_features] no audio file; forest models skipped"]


# ========================================
# Test: Classifier stages
# ========================================

class TestForestStage:

    def test_leaf_distribution(self, tmp_path):
        state = _state(tmp_path)
        state.features = LongTermVector(values=np.zeros(N_LONG_TERM))
        ForestStage("type", _stub_forest([1, 0, 0, 3])).run(state)
        assert np.allclose(state.model_probs["type"]["forest"].p, [0.25, 0.0, 0.0, 0.75])

    def test_skipped_without_features(self, tmp_path):
        state = ForestStage("level", _stub_forest([1, 1, 1])).run(_state(tmp_path))
        assert state.model_probs["level"] == {}

    def test_stage_name_carries_task(self):
        assert ForestStage("level", _stub_forest([1, 1, 1])).name == "forest_level"


class TestAudioGruStage:

    def test_softmax_of_logits(self, tmp_path):
        write_embedding_sequence(tmp_path / "a.csv", EmbeddingSequence(data=np.ones((3, 128))))
        stack, head = _constant_gru(128, np.log([0.1, 0.2, 0.3, 0.4]))
        state = _state(tmp_path, embeddings=EmbeddingPaths(audio="a.csv"))
        AudioGruStage("type", stack, head).run(state)
        assert np.allclose(state.model_probs["type"]["audio_gru"].p, [0.1, 0.2, 0.3, 0.4])

    def test_missing_embeddings_warn(self, tmp_path):
        stack, head = _constant_gru(128, [0.0, 0.0, 0.0])
        state = AudioGruStage("level", stack, head).run(_state(tmp_path))
        assert state.model_probs["level"] == {}
        assert "no audio embeddings" in state.warnings[0]


class TestVideoGruStage:

    def test_camera_logits_are_summed(self, tmp_path):
        for camera in (1, 2):
            write_embedding_sequence(tmp_path / f"v{camera}.csv", EmbeddingSequence(data=np.ones((2, 512))))
        stack, head = _constant_gru(512, [0.0, np.log(2.0), 0.0])
        state = _state(tmp_path, embeddings=EmbeddingPaths(video={1: "v1.csv", 2: "v2.csv"}))
        VideoGruStage(stack, head).run(state)
        # softmax([0, 2 ln 2, 0]) = [1, 4, 1] / 6
        assert np.allclose(state.model_probs["level"]["video_gru"].p, np.array([1.0, 4.0, 1.0]) / 6.0)

    def test_missing_video_warns(self, tmp_path):
        stack, head = _constant_gru(512, [0.0, 0.0, 0.0])
        state = VideoGruStage(stack, head).run(_state(tmp_path))
        assert "video_gru" not in state.model_probs["level"]
        assert state.warnings == ["[video_gru_level] no video embeddings; video GRU skipped"]


# ========================================
# Test: CapacityStage
# ========================================

class TestCapacityStage:

    def _write_rig(self, tmp_path, scene):
        for camera, calib in zip((1, 2), scene.calibs):
            write_calibration(tmp_path / f"c{camera}.json", calib)
        return {1: "c1.json", 2: "c2.json"}

    def test_fit_from_mask_files(self, tmp_path, cup_scene):
        calibrations = self._write_rig(tmp_path, cup_scene)
        for camera, mask in zip((1, 2), render_cylinder_masks(cup_scene)):
            write_pgm_mask(tmp_path / f"m{camera}.pgm", mask)
        masks = {1: {0: "m1.pgm"}, 2: {0: "m2.pgm"}}
        state = _state(tmp_path, calibrations=calibrations, masks=masks, frame_count=1)
        CapacityStage(FAST_FIT, prior_ml=500.0).run(state)
        assert not state.capacity.used_prior
        assert state.capacity.frames_used == 1
        assert state.capacity.capacity == pytest.approx(cup_scene.capacity_ml, rel=0.15)

    def test_single_camera_uses_prior(self, tmp_path, cup_scene):
        write_calibration(tmp_path / "c1.json", cup_scene.calibs[0])
        state = CapacityStage(FAST_FIT, prior_ml=420.0).run(_state(tmp_path, calibrations={1: "c1.json"}))
        assert state.capacity.capacity == 420.0
        assert state.capacity.used_prior
        assert state.capacity.failures == ("fewer than two calibrated cameras",)
        assert len(state.warnings) == 1

    def test_missing_masks_are_failures(self, tmp_path, cup_scene):
        calibrations = self._write_rig(tmp_path, cup_scene)
        state = _state(tmp_path, calibrations=calibrations, frame_count=100)
        CapacityStage(FAST_FIT, prior_ml=300.0).run(state)
        assert state.capacity.used_prior
        assert state.capacity.failures == ("frame 0: no mask pair", "frame 80: no mask pair")
        assert "capacity prior 300.0 mL" in state.warnings[0]


# ========================================
# Test: FusionStage
# ========================================

def _fusion_state(tmp_path, container_type="cup") -> SequenceState:
    state = _state(tmp_path, container_type=container_type)
    state.capacity = CapacityEstimate(capacity=400.0, used_prior=False, r_bar=0.04, h=0.1, frames_used=2)
    return state


class TestFusionStage:

    def test_mean_of_models_that_ran(self, tmp_path):
        state = _fusion_state(tmp_path)
        state.add_probs("type", "forest", ClassProbs(p=np.array([0.0, 0.2, 0.8, 0.0])))
        state.add_probs("type", "audio_gru", ClassProbs(p=np.array([0.0, 0.6, 0.4, 0.0])))
        state.add_probs("level", "forest", ClassProbs(p=np.array([0.1, 0.7, 0.2])))
        FusionStage(TaskModels(), DensityTable()).run(state)
        assert np.allclose(state.fused["type"].p, [0.0, 0.4, 0.6, 0.0])
        assert state.filling_type == FillingType.RICE
        assert state.filling_level == FillingLevel.HALF
        assert state.mass_g == pytest.approx(400.0 * 0.5 * DensityTable().rice)
        assert state.to_submission_row()["filling_type"] == FillingType.RICE.label

    def test_disabled_model_is_ignored(self, tmp_path):
        state = _fusion_state(tmp_path)
        state.add_probs("type", "forest", ClassProbs(p=np.array([0.0, 0.0, 1.0, 0.0])))
        state.add_probs("type", "audio_gru", ClassProbs(p=np.array([1.0, 0.0, 0.0, 0.0])))
        state.add_probs("level", "forest", ClassProbs(p=np.array([0.0, 0.0, 1.0])))
        FusionStage(TaskModels(type=("forest",), level=("forest",)), DensityTable()).run(state)
        assert state.filling_type == FillingType.RICE

    def test_no_model_ran(self, tmp_path):
        state = _fusion_state(tmp_path)
        state.add_probs("type", "forest", ClassProbs(p=np.array([1.0, 0.0, 0.0, 0.0])))
        with pytest.raises(DomainError, match="no enabled level model"):
            FusionStage(TaskModels(), DensityTable()).run(state)
        assert state.mass_g is None

    def test_consistency_moves_water_out_of_a_box(self, tmp_path):
        state = _fusion_state(tmp_path, container_type="box")
        state.add_probs("type", "forest", ClassProbs(p=np.array([0.0, 0.3, 0.1, 0.6])))
        state.add_probs("level", "forest", ClassProbs(p=np.array([0.0, 0.0, 1.0])))
        FusionStage(TaskModels(type=("forest",), level=("forest",)), DensityTable(), consistency=True).run(state)
        assert state.filling_type == FillingType.PASTA
        assert state.filling_level == FillingLevel.NINETY

    def test_empty_has_zero_mass(self, tmp_path):
        state = _fusion_state(tmp_path)
        state.add_probs("type", "forest", ClassProbs(p=np.array([1.0, 0.0, 0.0, 0.0])))
        state.add_probs("level", "forest", ClassProbs(p=np.array([0.0, 1.0, 0.0])))
        FusionStage(TaskModels(type=("forest",), level=("forest",)), DensityTable()).run(state)
        assert state.mass_g == 0.0
