"""
DatasetManifest - the list of recorded (or synthesised) sequences.

A manifest file is a JSON array of records. Paths inside a record are
relative to the manifest file's directory; `DatasetManifest.resolve()`
turns them into absolute paths.

Example record:
    {
      "sequence_id": "s0001", "container_id": "cup_1", "container_type": "cup",
      "audio": "s0001/audio.wav", "frame_count": 120,
      "masks": {"1": {"0": "s0001/masks/cam1_frame00000.pgm", "100": "..."}, "2": {...}},
      "calibrations": {"1": "calib_cam1.json", "2": "calib_cam2.json"},
      "embeddings": {"audio": "s0001/audio_vggish.csv", "video": {"1": "...", "2": "..."}},
      "labels": {"filling_type": "rice", "filling_level": 50, "capacity_ml": 310.2, "mass_g": 131.8}
    }
"""

from collections import Counter
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class RecordLabels(BaseModel):
    """Ground truth of one sequence."""

    filling_type: Literal["empty", "pasta", "rice", "water"]
    filling_level: Literal[0, 50, 90]
    capacity_ml: float = Field(ge=0)
    mass_g: float = Field(ge=0)


class EmbeddingPaths(BaseModel):
    audio: Optional[str] = None
    video: dict[int, str] = Field(default_factory=dict)


class ManifestRecord(BaseModel):
    """One sequence: a container being filled, seen by two cameras and a microphone."""

    sequence_id: str = Field(min_length=1)
    container_id: str = Field(min_length=1)
    container_type: Literal["cup", "glass", "box"]
    audio: Optional[str] = None
    frame_count: int = Field(default=1, ge=1)
    masks: dict[int, dict[int, str]] = Field(default_factory=dict)
    calibrations: dict[int, str] = Field(default_factory=dict)
    embeddings: EmbeddingPaths = Field(default_factory=EmbeddingPaths)
    labels: Optional[RecordLabels] = None

    def referenced_paths(self) -> list[str]:
        """Every relative path the record points at, in a stable order."""
        paths: list[str] = []
        if self.audio:
            paths.append(self.audio)
        for camera in sorted(self.masks):
            paths.extend(self.masks[camera][frame] for frame in sorted(self.masks[camera]))
        paths.extend(self.calibrations[camera] for camera in sorted(self.calibrations))
        if self.embeddings.audio:
            paths.append(self.embeddings.audio)
        paths.extend(self.embeddings.video[camera] for camera in sorted(self.embeddings.video))
        return paths


class DatasetManifest(BaseModel):
    """
    Records plus the directory their relative paths are anchored at.

    Attributes:
        records: sequences in file order; sequence_ids are unique
        root: directory of the manifest file
    """

    records: list[ManifestRecord]
    root: Path = Path(".")

    @field_validator("records")
    @classmethod
    def sequence_ids_unique(cls, records: list[ManifestRecord]) -> list[ManifestRecord]:
        counts = Counter(r.sequence_id for r in records)
        duplicates = sorted(seq_id for seq_id, n in counts.items() if n > 1)
        if duplicates:
            raise ValueError(f"duplicate sequence_id(s): {', '.join(duplicates)}")
        return records

    @model_validator(mode="after")
    def root_is_path(self) -> "DatasetManifest":
        self.root = Path(self.root)
        return self

    def resolve(self, relative: str) -> Path:
        return self.root / relative

    def by_id(self) -> dict[str, ManifestRecord]:
        return {r.sequence_id: r for r in self.records}

    def has_labels(self) -> bool:
        return bool(self.records) and all(r.labels is not None for r in self.records)

    def subset(self, container_ids: set[str]) -> "DatasetManifest":
        """Records whose container is in container_ids, order preserved."""
        return DatasetManifest(
            records=[r for r in self.records if r.container_id in container_ids],
            root=self.root,
        )

    def __len__(self) -> int:
        return len(self.records)
