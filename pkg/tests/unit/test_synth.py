"""
Unit tests for the synthetic data generators.

Tests cover:
- synth_audio: sample count, empty-class noise floor, determinism per seed, level-dependent pour length
- Grain impacts: sparse spike train, unit-peak decaying ring, rice and pasta clips heavy-tailed unlike water
- synth_embedding_sequence: exact class mean without noise, width tags, seed dependence, sample mean
- Scenes: vanishing radius gives at most a sliver, mirrored cameras see equal areas, cylinder behind camera
- plan_sequences: 12 plans for n = 1, empty → level 0, water never in a box
- generate_dataset: manifest contents, byte-identical regeneration for any worker count
"""

import numpy as np
import pytest
import scipy.stats

from src.media.manifest import load_manifest
from src.models.labels import FillingLevel, FillingType
from src.models.media import EmbeddingSource
from src.synth.audio import FLOOR_AMPLITUDE, IMPACT_PARAMS, AudioSpec, impact_kernel, impact_train, synth_audio
from src.synth.dataset import audio_class, generate_dataset, make_containers, plan_sequences
from src.synth.embeddings import class_means, synth_embedding_sequence
from src.synth.scene import SceneSpec, look_at_calibration, make_rig, render_cylinder_masks
from src.utils.exceptions import DimensionError, DomainError, SynthesisError

# ========================================
# Test: Audio
# ========================================

class TestSynthAudio:

    def test_length(self):
        clip = synth_audio(AudioSpec(filling_type=FillingType.WATER, duration=2.0, sample_rate=16000))
        assert len(clip.samples) == 32000

    def test_empty_is_a_noise_floor(self):
        clip = synth_audio(AudioSpec(filling_type=FillingType.EMPTY, duration=1.0))
        assert np.sqrt(np.mean(clip.samples ** 2)) <= 2e-4

    def test_same_seed_same_samples(self):
        spec = AudioSpec(filling_type=FillingType.RICE, duration=1.0, seed=11)
        assert np.array_equal(synth_audio(spec).samples, synth_audio(spec).samples)

    def test_different_seed_different_samples(self):
        a = synth_audio(AudioSpec(filling_type=FillingType.PASTA, duration=1.0, seed=1))
        b = synth_audio(AudioSpec(filling_type=FillingType.PASTA, duration=1.0, seed=2))
        assert not np.array_equal(a.samples, b.samples)

    def test_water_rms(self):
        clip = synth_audio(AudioSpec(filling_type=FillingType.WATER, duration=1.0, seed=4))
        assert np.sqrt(np.mean(clip.samples ** 2)) == pytest.approx(0.1, rel=0.05)

    def test_level_bounds_the_pour(self):
        clip = synth_audio(AudioSpec(filling_type=FillingType.WATER, duration=1.0, level_percent=0))
        tail = clip.samples[int(0.3 * 16000) + 1:]
        assert np.max(np.abs(tail)) <= FLOOR_AMPLITUDE

    def test_too_short(self):
        with pytest.raises(DomainError):
            AudioSpec(filling_type=FillingType.RICE, duration=0.1)

    @pytest.mark.parametrize("filling_type", [FillingType.RICE, FillingType.PASTA])
    def test_impact_train_is_sparse(self, filling_type):
        rate, _, _, amplitude = IMPACT_PARAMS[filling_type]
        train = impact_train(32000, 16000, np.random.default_rng(5), rate, amplitude)
        hits = np.count_nonzero(train)
        assert 0 < hits <= 3 * rate * 2.0
        assert hits / train.size < 0.05
        assert np.max(np.abs(train)) <= 2 * amplitude

    def test_impact_kernel_decays_from_unit_peak(self):
        kernel = impact_kernel(16000, 0.010, 1500.0)
        assert kernel[0] == pytest.approx(1.0)
        assert len(kernel) == 800
        assert np.max(np.abs(kernel[-80:])) < np.exp(-4.4)

    def test_grains_are_heavy_tailed_and_water_is_not(self):
        excess = {
            t: scipy.stats.kurtosis(synth_audio(AudioSpec(filling_type=t, duration=4.0, seed=9)).samples)
            for t in (FillingType.WATER, FillingType.RICE, FillingType.PASTA)
        }
        assert excess[FillingType.WATER] < 2.0
        assert excess[FillingType.RICE] > 2.0
        assert excess[FillingType.PASTA] > excess[FillingType.RICE]


# ========================================
# Test: Embeddings
# ========================================

class TestSynthEmbeddings:

    def test_no_noise_gives_class_mean(self):
        seq = synth_embedding_sequence(3, 1, 128, seed=0, noise_scale=0.0)
        assert np.array_equal(seq.data[0], class_means(128)[3])

    def test_video_width_is_tagged(self):
        seq = synth_embedding_sequence(0, 4, 512, seed=0, camera_id=1)
        assert seq.source is EmbeddingSource.VIDEO
        assert seq.data.shape == (4, 512)

    def test_seeds_differ_but_share_the_mean(self):
        a = synth_embedding_sequence(5, 1000, 128, seed=1)
        b = synth_embedding_sequence(5, 1000, 128, seed=2)
        assert not np.array_equal(a.data, b.data)
        assert np.max(np.abs(a.data.mean(axis=0) - class_means(128)[5])) < 0.1
        assert np.max(np.abs(b.data.mean(axis=0) - class_means(128)[5])) < 0.1

    def test_class_means_are_orthogonal(self):
        means = class_means(128)
        assert np.allclose(means @ means.T, 4.0 * np.eye(means.shape[0]))

    def test_unsupported_width(self):
        with pytest.raises(DimensionError):
            synth_embedding_sequence(0, 2, 100, seed=0)

    def test_class_out_of_range(self):
        with pytest.raises(DomainError):
            synth_embedding_sequence(12, 2, 128, seed=0)


# ========================================
# Test: Scenes
# ========================================

class TestScenes:

    def test_vanishing_radius(self, stereo_rig):
        scene = SceneSpec(radius=1e-6, height=0.1, center=np.array([0.0, 0.0, 0.05]), calibs=stereo_rig)
        for mask in render_cylinder_masks(scene):
            assert mask.foreground.sum(axis=1).max() <= 1

    def test_mirrored_cameras_see_equal_areas(self):
        calibs = make_rig((0.0, 0.0, 0.05), 1.0, (-40.0, 40.0))
        scene = SceneSpec(radius=0.04, height=0.1, center=np.array([0.0, 0.0, 0.05]), calibs=calibs)
        a, b = render_cylinder_masks(scene)
        assert a.area == pytest.approx(b.area, rel=0.02)
        assert a.area > 0

    def test_silhouette_width_matches_diameter(self, cup_scene):
        mask = render_cylinder_masks(cup_scene)[0]
        widest = mask.foreground.sum(axis=1).max()
        # 8 cm at 1 m with f = 800 px
        assert widest == pytest.approx(64, abs=3)

    def test_cylinder_behind_camera(self):
        away = look_at_calibration((1.0, 0.0, 0.05), (2.0, 0.0, 0.05))
        scene = SceneSpec(radius=0.04, height=0.1, center=np.array([0.0, 0.0, 0.05]), calibs=(away, away))
        with pytest.raises(SynthesisError):
            render_cylinder_masks(scene)

    def test_camera_cannot_look_straight_down(self):
        with pytest.raises(SynthesisError):
            look_at_calibration((0.0, 0.0, 1.0), (0.0, 0.0, 0.0))

    def test_capacity_of_scene(self, cup_scene):
        assert cup_scene.capacity_ml == pytest.approx(np.pi * 0.04 ** 2 * 0.1 * 1e6)


# ========================================
# Test: Dataset
# ========================================

class TestPlanSequences:

    def test_twelve_plans(self):
        plans = plan_sequences(make_containers(0), 1)
        assert len(plans) == 12
        assert [p.sequence_id for p in plans[:2]] == ["s0000", "s0001"]

    def test_empty_means_level_zero(self):
        for plan in plan_sequences(make_containers(0), 2):
            if plan.filling_type == FillingType.EMPTY:
                assert plan.level == FillingLevel.EMPTY

    def test_no_water_in_boxes(self):
        for plan in plan_sequences(make_containers(0), 3):
            if plan.filling_type == FillingType.WATER:
                assert plan.container.container_type != "box"

    def test_audio_classes_are_distinct(self):
        classes = {audio_class(t, lv) for t in FillingType for lv in FillingLevel}
        assert len(classes) == 12


class TestGenerateDataset:

    def test_manifest_contents(self, synth_dataset):
        assert len(synth_dataset) == 12
        assert synth_dataset.has_labels()
        assert len({r.container_id for r in synth_dataset.records}) == 9
        loaded = load_manifest(synth_dataset.root / "manifest.json")
        assert [r.sequence_id for r in loaded.records] == [r.sequence_id for r in synth_dataset.records]

    def test_labels_are_consistent(self, synth_dataset):
        for record in synth_dataset.records:
            labels = record.labels
            if labels.filling_type == "empty":
                assert labels.mass_g == 0.0
                assert labels.filling_level == 0
            assert labels.capacity_ml > 0

    def test_regeneration_is_byte_identical(self, tmp_path, synth_dataset):
        generate_dataset(tmp_path, n_per_class=1, seed=7, workers=1)
        original = sorted(p.relative_to(synth_dataset.root) for p in synth_dataset.root.rglob("*") if p.is_file())
        again = sorted(p.relative_to(tmp_path) for p in tmp_path.rglob("*") if p.is_file())
        assert original == again
        for rel in original:
            assert (synth_dataset.root / rel).read_bytes() == (tmp_path / rel).read_bytes(), str(rel)

    def test_zero_per_class(self, tmp_path):
        with pytest.raises(DomainError):
            generate_dataset(tmp_path, n_per_class=0, seed=0)
