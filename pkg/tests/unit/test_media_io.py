"""
Unit tests for the media readers and writers.

Tests cover:
- read_wav: 16-bit full scale → 1.0, 8-bit centring, stereo downmix, float32
- read_wav: non-RIFF bytes → MediaFormatError, 64-bit float → UnsupportedEncodingError
- read_pgm_mask: P5 and P2 payloads, comments, default and custom thresholds, 16-bit maxval
- read_pgm_mask: bad magic, truncated payload, threshold outside (0, maxval)
- read_calibration: valid document, missing key (format) vs bad value (validation)
- read_embedding_sequence: width tags, short and long ragged rows, empty file, non-numeric field,
  blank lines, unsupported width, NaN rows
- mask_pairs_from_directory: frames both cameras share, select_frames with a frame count, one camera
- expected_sequence_lengths: 9.6 s → 10 windows, 120 frames → 7 clips
- load_manifest: relative path resolution, duplicate ids, every missing path reported
"""

import json

import numpy as np
import pytest
from scipy.io import wavfile

from src.media.calibration import read_calibration, write_calibration
from src.media.embeddings import expected_sequence_lengths, read_embedding_sequence, write_embedding_sequence
from src.media.manifest import load_manifest, write_manifest
from src.media.pgm import read_pgm_mask, write_pgm_mask
from src.media.record_inputs import mask_pairs_from_directory
from src.media.wav import read_wav, write_wav
from src.models.manifest import ManifestRecord
from src.models.media import AudioClip, EmbeddingSequence, EmbeddingSource, MaskImage
from src.utils.exceptions import (
    DimensionError,
    DomainError,
    MediaFormatError,
    MediaValidationError,
    UnsupportedEncodingError,
)

# ========================================
# Test: WAV
# ========================================

class TestReadWav:

    def test_int16_full_scale_maps_to_one(self, tmp_path):
        path = tmp_path / "a.wav"
        wavfile.write(path, 16000, np.array([0, 32767, -32767, 16384], dtype=np.int16))
        clip = read_wav(path)
        assert clip.sample_rate == 16000
        assert clip.samples[1] == 1.0
        assert clip.samples[2] == -1.0
        assert clip.samples[3] == pytest.approx(16384 / 32767)

    def test_int16_minimum_is_clipped(self, tmp_path):
        path = tmp_path / "a.wav"
        wavfile.write(path, 8000, np.array([-32768], dtype=np.int16))
        assert read_wav(path).samples[0] == -1.0

    def test_uint8_is_centred(self, tmp_path):
        path = tmp_path / "a.wav"
        wavfile.write(path, 8000, np.array([128, 255, 1], dtype=np.uint8))
        samples = read_wav(path).samples
        assert samples[0] == 0.0
        assert samples[1] == 1.0
        assert samples[2] == -1.0

    def test_stereo_is_downmixed_by_mean(self, tmp_path):
        path = tmp_path / "a.wav"
        wavfile.write(path, 16000, np.array([[32767, 0], [0, -32767]], dtype=np.int16))
        assert read_wav(path).samples.tolist() == [0.5, -0.5]

    def test_float32_passes_through(self, tmp_path):
        path = tmp_path / "a.wav"
        wavfile.write(path, 16000, np.array([0.25, -0.5], dtype=np.float32))
        assert read_wav(path).samples.tolist() == [0.25, -0.5]

    def test_not_riff_raises_format_error(self, tmp_path):
        path = tmp_path / "a.wav"
        path.write_bytes(b"definitely not a wave file")
        with pytest.raises(MediaFormatError):
            read_wav(path)

    def test_float64_is_unsupported(self, tmp_path):
        path = tmp_path / "a.wav"
        wavfile.write(path, 16000, np.array([0.1, 0.2], dtype=np.float64))
        with pytest.raises(UnsupportedEncodingError):
            read_wav(path)

    def test_written_clip_reads_back_within_one_code(self, tmp_path, rice_clip):
        path = tmp_path / "rice.wav"
        write_wav(path, rice_clip)
        back = read_wav(path)
        assert back.sample_rate == rice_clip.sample_rate
        assert np.max(np.abs(back.samples - rice_clip.samples)) <= 0.5 / 32767 + 1e-12


# ========================================
# Test: PGM masks
# ========================================

class TestReadPgm:

    def test_p5_default_threshold(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n3 2\n255\n" + bytes([0, 127, 128, 255, 10, 200]))
        mask = read_pgm_mask(path)
        assert mask.foreground.tolist() == [[False, False, True], [True, False, True]]

    def test_p2_with_comments(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_text("P2\n# made by hand\n2 2\n# maxval next\n10\n0 10\n6 4\n")
        assert read_pgm_mask(path).foreground.tolist() == [[False, True], [True, False]]

    def test_custom_threshold(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 1\n255\n" + bytes([50, 100]))
        assert read_pgm_mask(path, threshold=60).foreground.tolist() == [[False, True]]

    def test_sixteen_bit_payload_is_big_endian(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 1\n65535\n" + np.array([1, 65000], dtype=">u2").tobytes())
        assert read_pgm_mask(path).foreground.tolist() == [[False, True]]

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(MediaFormatError):
            read_pgm_mask(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(10))
        with pytest.raises(MediaFormatError, match="Truncated"):
            read_pgm_mask(path)

    @pytest.mark.parametrize("threshold", [0, 255, 300])
    def test_threshold_outside_range(self, tmp_path, threshold):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n1 1\n255\n\x80")
        with pytest.raises(MediaValidationError):
            read_pgm_mask(path, threshold=threshold)

    def test_written_mask_reads_back(self, tmp_path):
        mask = MaskImage(foreground=np.eye(4, 5, dtype=bool))
        write_pgm_mask(tmp_path / "m.pgm", mask)
        assert np.array_equal(read_pgm_mask(tmp_path / "m.pgm").foreground, mask.foreground)


# ========================================
# Test: Calibration
# ========================================

class TestCalibration:

    def _doc(self, **overrides):
        doc = {"fx": 800, "fy": 800, "cx": 320, "cy": 240, "R": [1, 0, 0, 0, 1, 0, 0, 0, 1], "t": [0, 0, 1]}
        doc.update(overrides)
        return doc

    def test_valid_document(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(self._doc()))
        calib = read_calibration(path)
        assert calib.fx == 800
        assert np.allclose(calib.center, [0, 0, -1])

    def test_missing_key_is_format_error(self, tmp_path):
        doc = self._doc()
        del doc["t"]
        path = tmp_path / "c.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(MediaFormatError, match="t"):
            read_calibration(path)

    def test_negative_focal_is_validation_error(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(self._doc(fx=-1)))
        with pytest.raises(MediaValidationError):
            read_calibration(path)

    def test_reflection_is_validation_error(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(self._doc(R=[-1, 0, 0, 0, 1, 0, 0, 0, 1])))
        with pytest.raises(MediaValidationError, match="det"):
            read_calibration(path)

    def test_write_then_read_preserves_values(self, tmp_path, stereo_rig):
        write_calibration(tmp_path / "c.json", stereo_rig[1])
        back = read_calibration(tmp_path / "c.json")
        assert np.allclose(back.R, stereo_rig[1].R)
        assert np.allclose(back.t, stereo_rig[1].t)


# ========================================
# Test: Embedding sequences
# ========================================

class TestEmbeddings:

    def test_width_128_is_audio(self, tmp_path):
        path = tmp_path / "e.csv"
        np.savetxt(path, np.ones((3, 128)), delimiter=",")
        seq = read_embedding_sequence(path)
        assert seq.source is EmbeddingSource.AUDIO
        assert seq.length == 3

    def test_width_512_is_video_with_camera(self, tmp_path):
        path = tmp_path / "e.csv"
        np.savetxt(path, np.zeros((2, 512)), delimiter=",")
        seq = read_embedding_sequence(path, camera_id=2)
        assert seq.source is EmbeddingSource.VIDEO
        assert seq.camera_id == 2

    def test_unsupported_width(self, tmp_path):
        path = tmp_path / "e.csv"
        np.savetxt(path, np.zeros((2, 100)), delimiter=",")
        with pytest.raises(DimensionError):
            read_embedding_sequence(path)

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text(",".join(["1"] * 128) + "\n" + ",".join(["1"] * 127) + "\n")
        with pytest.raises(MediaFormatError, match="Ragged"):
            read_embedding_sequence(path)

    def test_longer_second_row_is_ragged(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text(",".join(["1"] * 128) + "\n" + ",".join(["1"] * 129) + "\n")
        with pytest.raises(MediaFormatError, match="Ragged"):
            read_embedding_sequence(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        with pytest.raises(MediaFormatError, match="Empty"):
            read_embedding_sequence(path)

    def test_non_numeric_field(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text(",".join(["1"] * 127 + ["x"]) + "\n")
        with pytest.raises(MediaFormatError, match="Non-numeric"):
            read_embedding_sequence(path)

    def test_blank_lines_are_skipped(self, tmp_path):
        path = tmp_path / "e.csv"
        row = ",".join(["0.5"] * 128)
        path.write_text(f"{row}\n\n{row}\n")
        assert read_embedding_sequence(path).length == 2

    def test_nan_rows_are_reported(self, tmp_path):
        data = np.zeros((3, 128))
        data[1, 5] = np.nan
        path = tmp_path / "e.csv"
        np.savetxt(path, data, delimiter=",")
        with pytest.raises(MediaValidationError) as exc:
            read_embedding_sequence(path)
        assert exc.value.details["bad_rows"] == [1]

    def test_written_values_read_back_exactly(self, tmp_path):
        data = np.random.default_rng(0).standard_normal((4, 128))
        write_embedding_sequence(tmp_path / "e.csv", EmbeddingSequence(data=data))
        assert np.array_equal(read_embedding_sequence(tmp_path / "e.csv").data, data)

    def test_audio_with_camera_id_is_rejected(self):
        with pytest.raises(MediaValidationError):
            EmbeddingSequence(data=np.zeros((1, 128)), camera_id=1)


class TestExpectedLengths:

    def test_nine_point_six_seconds_gives_ten_windows(self):
        assert expected_sequence_lengths(9.6, 0)[0] == 10

    def test_frames_floor_by_sixteen(self):
        assert expected_sequence_lengths(0.0, 120)[1] == 7

    def test_negative_duration(self):
        with pytest.raises(DomainError):
            expected_sequence_lengths(-1.0, 10)


# ========================================
# Test: Mask directories
# ========================================

class TestMaskPairsFromDirectory:

    @pytest.fixture
    def mask_dir(self, tmp_path):
        """cam1 has frames 0, 5, 10; cam2 has frames 0, 10; cam3 is ignored."""
        for camera, frames in ((1, (0, 5, 10)), (2, (0, 10)), (3, (0,))):
            for frame in frames:
                grid = np.zeros((4, 6), dtype=bool)
                grid[camera, frame % 6] = True
                write_pgm_mask(tmp_path / f"cam{camera}_frame{frame:05d}.pgm", MaskImage(grid))
        (tmp_path / "notes.txt").write_text("not a mask")
        return tmp_path

    def test_frames_both_cameras_share(self, mask_dir):
        pairs, missing = mask_pairs_from_directory(mask_dir)
        assert len(pairs) == 2
        assert missing == []
        assert all(first.foreground[1].any() and second.foreground[2].any() for first, second in pairs)

    def test_frame_count_selects_first_and_late_frame(self, mask_dir):
        pairs, missing = mask_pairs_from_directory(mask_dir, frame_count=30)
        assert len(pairs) == 2
        assert missing == []

    def test_selected_frame_without_pair_is_missing(self, mask_dir):
        pairs, missing = mask_pairs_from_directory(mask_dir, frame_count=25)
        assert len(pairs) == 1
        assert missing == [5]

    def test_one_camera_is_a_format_error(self, tmp_path):
        write_pgm_mask(tmp_path / "cam1_frame00000.pgm", MaskImage(np.ones((4, 6), dtype=bool)))
        with pytest.raises(MediaFormatError, match="two cameras"):
            mask_pairs_from_directory(tmp_path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(MediaFormatError):
            mask_pairs_from_directory(tmp_path / "absent")


# ========================================
# Test: Manifest
# ========================================

class TestManifest:

    def _write_clip(self, path):
        write_wav(path, AudioClip(samples=np.zeros(800), sample_rate=16000))

    def test_paths_resolve_relative_to_manifest(self, tmp_path):
        (tmp_path / "s1").mkdir()
        self._write_clip(tmp_path / "s1" / "audio.wav")
        write_manifest(
            tmp_path / "manifest.json",
            [ManifestRecord(sequence_id="s1", container_id="cup_1", container_type="cup", audio="s1/audio.wav")],
        )
        manifest = load_manifest(tmp_path / "manifest.json")
        assert manifest.resolve(manifest.records[0].audio) == tmp_path / "s1" / "audio.wav"
        assert not manifest.has_labels()

    def test_duplicate_ids(self, tmp_path):
        record = {"sequence_id": "s1", "container_id": "cup_1", "container_type": "cup"}
        (tmp_path / "manifest.json").write_text(json.dumps([record, record]))
        with pytest.raises(MediaValidationError, match="duplicate"):
            load_manifest(tmp_path / "manifest.json")

    def test_every_missing_path_reported(self, tmp_path):
        records = [
            {"sequence_id": "s1", "container_id": "cup_1", "container_type": "cup", "audio": "a.wav"},
            {"sequence_id": "s2", "container_id": "cup_1", "container_type": "cup", "audio": "b.wav"},
        ]
        (tmp_path / "manifest.json").write_text(json.dumps(records))
        with pytest.raises(MediaValidationError) as exc:
            load_manifest(tmp_path / "manifest.json")
        assert exc.value.details["missing"] == ["s1: a.wav", "s2: b.wav"]

    def test_not_an_array(self, tmp_path):
        (tmp_path / "manifest.json").write_text("{}")
        with pytest.raises(MediaFormatError):
            load_manifest(tmp_path / "manifest.json")

    def test_unknown_container_type(self, tmp_path):
        (tmp_path / "manifest.json").write_text(
            json.dumps([{"sequence_id": "s1", "container_id": "x", "container_type": "bottle"}])
        )
        with pytest.raises(MediaFormatError):
            load_manifest(tmp_path / "manifest.json")
