"""
Embedding sequences stored as CSV.

One row per timestep, D comma-separated values, no header row. D = 128 marks an
audio embedding (one row per 0.96 s of audio), D = 512 a video embedding (one
row per 16 frames). Values are written with 17 significant digits so a
write/read cycle reproduces every float64 exactly.
"""

import math
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from src.models.media import EmbeddingSequence, source_for_dim
from src.utils.exceptions import DomainError, MediaFormatError, MediaValidationError

AUDIO_WINDOW_SECONDS = 0.96
VIDEO_CLIP_FRAMES = 16


def read_embedding_sequence(path: str | Path, camera_id: Optional[int] = None) -> EmbeddingSequence:
    """
    Load a T×D embedding CSV.

    Cells are read as text first: a short row then shows up as empty cells,
    while a written "nan" stays a value for the finiteness check.

    Raises:
        MediaFormatError: Empty file, ragged rows or non-numeric fields
        DimensionError: D not in {128, 512}
        MediaValidationError: NaN or inf entries
    """
    path = Path(path)
    try:
        table = pd.read_csv(path, header=None, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise MediaFormatError(component="media.embedding", message="Empty embedding file", details={"path": str(path)}) from e
    except pd.errors.ParserError as e:
        raise MediaFormatError(component="media.embedding", message=f"Ragged rows: {e}", details={"path": str(path)}) from e

    short_rows = table.index[(table.isna() | table.eq("")).any(axis=1)].tolist()
    if short_rows:
        raise MediaFormatError(
            component="media.embedding",
            message=f"Ragged rows: {len(short_rows)} row(s) missing some of {table.shape[1]} fields",
            details={"path": str(path), "rows": short_rows},
        )
    source_for_dim(table.shape[1])

    try:
        data = table.to_numpy(float)
    except ValueError as e:
        raise MediaFormatError(component="media.embedding", message=f"Non-numeric field: {e}", details={"path": str(path)}) from e
    if not np.all(np.isfinite(data)):
        raise MediaValidationError(
            component="media.embedding",
            message="Embedding contains NaN or inf",
            details={"path": str(path), "bad_rows": np.unique(np.nonzero(~np.isfinite(data))[0]).tolist()},
        )
    return EmbeddingSequence(data=data, camera_id=camera_id)


def write_embedding_sequence(path: str | Path, sequence: EmbeddingSequence) -> None:
    np.savetxt(Path(path), sequence.data, delimiter=",", fmt="%.17g")


def expected_sequence_lengths(duration_seconds: float, frame_count: int) -> tuple[int, int]:
    """
    Sequence lengths the pretrained extractors produce.

    T_vgg = floor(T_sec / 0.96); T_r21d = floor(T_f / 16). The audio ratio is
    rounded to 9 decimals before flooring so 9.6 s gives exactly 10 windows.

    Raises:
        DomainError: Negative inputs
    """
    if duration_seconds < 0 or frame_count < 0:
        raise DomainError(
            component="media.embedding",
            message="Duration and frame count must be non-negative",
            details={"duration_seconds": duration_seconds, "frame_count": frame_count},
        )
    t_vgg = math.floor(round(duration_seconds / AUDIO_WINDOW_SECONDS, 9))
    t_r21d = int(frame_count) // VIDEO_CLIP_FRAMES
    return t_vgg, t_r21d
