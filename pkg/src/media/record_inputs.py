"""
Per-record input loading shared by training and the prediction stages.

Every loader returns None (or an empty list) when the record does not name
the modality, so callers can skip the model that needs it; a named file that
cannot be parsed still raises the reader's MediaError.
"""

import re
from pathlib import Path
from typing import Optional

from src.core.feature_cache import FeatureCache
from src.features.audio_features import LongTermVector, aggregate_long_term, short_term_features
from src.geometry.capacity import select_frames
from src.media.calibration import read_calibration
from src.media.embeddings import read_embedding_sequence
from src.media.pgm import read_pgm_mask
from src.media.wav import read_wav
from src.models.labels import FillingLevel, FillingType
from src.models.manifest import ManifestRecord
from src.models.media import CameraCalibration, EmbeddingSequence, MaskImage
from src.utils.exceptions import MediaFormatError

MASK_NAME = re.compile(r"cam(\d+)_frame(\d+)\.pgm")


def classical_vector(
    root: Path,
    record: ManifestRecord,
    window: float,
    hop: float,
    cache: Optional[FeatureCache] = None,
) -> Optional[LongTermVector]:
    """136-d long-term audio vector of the record, memoised when a cache is given."""
    if not record.audio:
        return None
    path = root / record.audio

    def compute() -> LongTermVector:
        return aggregate_long_term(short_term_features(read_wav(path), window, hop))

    return cache.get_or_compute(path, window, hop, compute) if cache is not None else compute()


def audio_embeddings(root: Path, record: ManifestRecord) -> Optional[EmbeddingSequence]:
    if not record.embeddings.audio:
        return None
    return read_embedding_sequence(root / record.embeddings.audio)


def video_embeddings(root: Path, record: ManifestRecord) -> list[EmbeddingSequence]:
    """One sequence per camera, ordered by camera id."""
    return [
        read_embedding_sequence(root / record.embeddings.video[camera], camera_id=camera)
        for camera in sorted(record.embeddings.video)
    ]


def stereo_calibrations(root: Path, record: ManifestRecord) -> Optional[tuple[int, int, list[CameraCalibration]]]:
    """The two lowest camera ids with a calibration, and their calibrations."""
    cameras = sorted(record.calibrations)[:2]
    if len(cameras) < 2:
        return None
    return cameras[0], cameras[1], [read_calibration(root / record.calibrations[c]) for c in cameras]


def selected_mask_pairs(
    root: Path,
    record: ManifestRecord,
    cameras: tuple[int, int],
) -> tuple[list[list[MaskImage]], list[int]]:
    """
    Mask pairs of the frames capacity estimation uses.

    Returns:
        (pairs, missing_frames): one [mask, mask] per selected frame that has a
        mask in both cameras, and the selected frames that do not
    """
    pairs: list[list[MaskImage]] = []
    missing: list[int] = []
    for frame in dict.fromkeys(select_frames(record.frame_count)):
        paths = [record.masks.get(camera, {}).get(frame) for camera in cameras]
        if any(p is None for p in paths):
            missing.append(frame)
            continue
        pairs.append([read_pgm_mask(root / p) for p in paths])
    return pairs, missing


def mask_pairs_from_directory(
    directory: str | Path,
    frame_count: Optional[int] = None,
) -> tuple[list[list[MaskImage]], list[int]]:
    """
    Mask pairs from a directory of cam<id>_frame<index>.pgm files.

    The two lowest camera ids are paired, in id order. With frame_count the
    frames come from select_frames; without it every frame both cameras have.

    Returns:
        (pairs, missing_frames) as in selected_mask_pairs

    Raises:
        MediaFormatError: Not a directory, or fewer than two cameras in it
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise MediaFormatError(component="media.record_inputs", message=f"Mask directory not found: {directory}")

    by_camera: dict[int, dict[int, Path]] = {}
    for path in sorted(directory.glob("cam*_frame*.pgm")):
        match = MASK_NAME.fullmatch(path.name)
        if match:
            by_camera.setdefault(int(match.group(1)), {})[int(match.group(2))] = path
    cameras = sorted(by_camera)[:2]
    if len(cameras) < 2:
        raise MediaFormatError(
            component="media.record_inputs",
            message=f"Need masks from two cameras in {directory}",
            details={"cameras": cameras},
        )

    first, second = (by_camera[c] for c in cameras)
    frames = dict.fromkeys(select_frames(frame_count)) if frame_count is not None else sorted(first.keys() & second.keys())
    pairs: list[list[MaskImage]] = []
    missing: list[int] = []
    for frame in frames:
        if frame in first and frame in second:
            pairs.append([read_pgm_mask(first[frame]), read_pgm_mask(second[frame])])
        else:
            missing.append(frame)
    return pairs, missing


def type_index(record: ManifestRecord) -> int:
    return int(FillingType.from_label(record.labels.filling_type))


def level_index(record: ManifestRecord) -> int:
    return int(FillingLevel.from_percent(record.labels.filling_level))
