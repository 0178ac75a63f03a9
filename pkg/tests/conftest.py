"""
conftest.py - Shared fixtures for all tests.

Fixtures defined here are automatically available to all test files
without needing to import them.
"""

import numpy as np
import pytest

from src.classifiers.seqnet import TrainingConfig
from src.models.labels import FillingType
from src.models.manifest import ManifestRecord, RecordLabels
from src.models.media import AudioClip, CameraCalibration
from src.models.pipeline_config import PipelineConfig
from src.synth.audio import AudioSpec, synth_audio
from src.synth.dataset import generate_dataset
from src.synth.scene import SceneSpec, make_rig

# ========================================
# Audio Fixtures
# ========================================

@pytest.fixture
def sine_clip():
    """One second of a 440 Hz sine at 16 kHz, amplitude 0.5."""
    t = np.arange(16000) / 16000
    return AudioClip(samples=0.5 * np.sin(2 * np.pi * 440 * t), sample_rate=16000)


@pytest.fixture
def rice_clip():
    return synth_audio(AudioSpec(filling_type=FillingType.RICE, duration=1.0, seed=3))


@pytest.fixture
def water_clip():
    return synth_audio(AudioSpec(filling_type=FillingType.WATER, duration=1.0, seed=3))


# ========================================
# Geometry Fixtures
# ========================================

@pytest.fixture
def identity_camera():
    """Camera at the origin looking down +z, 640×480, f = 800."""
    return CameraCalibration(fx=800, fy=800, cx=320, cy=240, R=np.eye(3), t=np.zeros(3))


@pytest.fixture
def stereo_rig():
    """Two horizontal cameras 75° apart, 1 m from a point 5 cm above the floor."""
    return make_rig((0.0, 0.0, 0.05), 1.0, (0.0, 75.0))


@pytest.fixture
def cup_scene(stereo_rig):
    """r = 4 cm, h = 10 cm cylinder standing on the floor, centred under the rig target."""
    return SceneSpec(radius=0.04, height=0.10, center=np.array([0.0, 0.0, 0.05]), calibs=stereo_rig)


# ========================================
# Manifest / Config Fixtures
# ========================================

@pytest.fixture
def labelled_record():
    return ManifestRecord(
        sequence_id="s0001",
        container_id="cup_1",
        container_type="cup",
        labels=RecordLabels(filling_type="rice", filling_level=50, capacity_ml=400.0, mass_g=170.0),
    )


@pytest.fixture
def tiny_config():
    """Small enough to train every model in seconds."""
    return PipelineConfig.model_validate(
        {
            "seed": 0,
            "workers": 2,
            "forest": {"tree_grid": [5, 15]},
            "audio_gru": {"hidden": 8, "layers": 1},
            "video_gru": {"hidden": 8, "layers": 1},
            "training": TrainingConfig(batch_size=8, lr=0.01, max_epochs=4).model_dump(),
            "fit": {"n_angles": 24, "refine_steps": 2},
        }
    )


@pytest.fixture(scope="session")
def synth_dataset(tmp_path_factory):
    """12-sequence synthetic dataset (one per type × level), shared by the whole session."""
    out = tmp_path_factory.mktemp("synth")
    return generate_dataset(out, n_per_class=1, seed=7, workers=2)
