"""
Media domain types: raw sensory inputs and camera geometry.

All types are frozen dataclasses validated on construction; array fields are
made read-only so values handed out by the readers are immutable.

Example:
    >>> clip = AudioClip(samples=np.zeros(16000), sample_rate=16000)
    >>> clip.duration
    1.0
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from src.utils.exceptions import DimensionError, MediaValidationError

AUDIO_EMBEDDING_DIM = 128
VIDEO_EMBEDDING_DIM = 512


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class AudioClip:
    """
    Mono audio clip.

    Attributes:
        samples: float64 samples in [-1, 1]
        sample_rate: Hz, positive integer
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise MediaValidationError(
                component="media.audio",
                message="AudioClip must be mono (1-D samples)",
                details={"shape": samples.shape},
            )
        if int(self.sample_rate) <= 0:
            raise MediaValidationError(
                component="media.audio",
                message="sample_rate must be positive",
                details={"sample_rate": self.sample_rate},
            )
        if not np.all(np.isfinite(samples)):
            raise MediaValidationError(component="media.audio", message="AudioClip contains non-finite samples")
        if samples.size and np.max(np.abs(samples)) > 1.0:
            raise MediaValidationError(
                component="media.audio",
                message="AudioClip samples must lie in [-1, 1]",
                details={"peak": float(np.max(np.abs(samples)))},
            )
        object.__setattr__(self, "samples", _frozen(samples))
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        """T_sec = len / sample_rate."""
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class MaskImage:
    """
    Binary segmentation mask of one camera view.

    Attributes:
        foreground: bool grid of shape (height, width), row-major like the image
    """

    foreground: np.ndarray

    def __post_init__(self) -> None:
        fg = np.array(self.foreground, dtype=bool)
        if fg.ndim != 2 or fg.shape[0] == 0 or fg.shape[1] == 0:
            raise MediaValidationError(
                component="media.mask",
                message="MaskImage needs a non-empty 2-D grid",
                details={"shape": fg.shape},
            )
        object.__setattr__(self, "foreground", _frozen(fg))

    @property
    def height(self) -> int:
        return int(self.foreground.shape[0])

    @property
    def width(self) -> int:
        return int(self.foreground.shape[1])

    @property
    def area(self) -> int:
        """Foreground pixel count."""
        return int(self.foreground.sum())

    def is_empty(self) -> bool:
        return self.area == 0


@dataclass(frozen=True)
class CameraCalibration:
    """
    Pinhole camera with world→camera extrinsics: x_cam = R · x_world + t.

    Attributes:
        fx, fy, cx, cy: intrinsics in pixels
        R: 3×3 rotation, world→camera
        t: translation in metres
    """

    fx: float
    fy: float
    cx: float
    cy: float
    R: np.ndarray
    t: np.ndarray
    tolerance: float = 1e-9

    def __post_init__(self) -> None:
        R = np.array(self.R, dtype=np.float64).reshape(3, 3)
        t = np.array(self.t, dtype=np.float64).reshape(3)
        problems: list[str] = []
        if not self.fx > 0 or not self.fy > 0:
            problems.append(f"focal lengths must be positive (fx={self.fx}, fy={self.fy})")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            problems.append("R and t must be finite")
        elif np.max(np.abs(R.T @ R - np.eye(3))) > self.tolerance:
            problems.append("R is not orthonormal")
        elif abs(np.linalg.det(R) - 1.0) > self.tolerance:
            problems.append(f"det(R) must be +1, got {np.linalg.det(R):.6f}")
        if problems:
            raise MediaValidationError(
                component="media.calibration",
                message="; ".join(problems),
                details={"fx": self.fx, "fy": self.fy},
            )
        object.__setattr__(self, "fx", float(self.fx))
        object.__setattr__(self, "fy", float(self.fy))
        object.__setattr__(self, "cx", float(self.cx))
        object.__setattr__(self, "cy", float(self.cy))
        object.__setattr__(self, "R", _frozen(R))
        object.__setattr__(self, "t", _frozen(t))

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates, −Rᵀt."""
        return -self.R.T @ self.t


class EmbeddingSource(str, Enum):
    AUDIO = "audio-embedding"
    VIDEO = "video-embedding"


_DIM_TO_SOURCE = {
    AUDIO_EMBEDDING_DIM: EmbeddingSource.AUDIO,
    VIDEO_EMBEDDING_DIM: EmbeddingSource.VIDEO,
}


def source_for_dim(dim: int) -> EmbeddingSource:
    """Map an embedding width to its source tag (128 → audio, 512 → video)."""
    try:
        return _DIM_TO_SOURCE[dim]
    except KeyError:
        raise DimensionError(
            component="media.embedding",
            message=f"Embedding width must be 128 or 512, got {dim}",
            details={"dim": dim},
        ) from None


@dataclass(frozen=True)
class EmbeddingSequence:
    """
    T×D feature sequence standing in for pretrained-network outputs.

    Attributes:
        data: T×D float64 matrix
        source: audio (D=128) or video (D=512)
        camera_id: camera the video stream came from, None for audio
    """

    data: np.ndarray
    source: Optional[EmbeddingSource] = None
    camera_id: Optional[int] = None

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1:
            raise MediaValidationError(
                component="media.embedding",
                message="EmbeddingSequence needs T ≥ 1 rows",
                details={"shape": data.shape},
            )
        if not np.all(np.isfinite(data)):
            raise MediaValidationError(component="media.embedding", message="EmbeddingSequence contains NaN or inf")
        inferred = source_for_dim(data.shape[1])
        if self.source is not None and EmbeddingSource(self.source) is not inferred:
            raise DimensionError(
                component="media.embedding",
                message=f"{self.source} does not match width {data.shape[1]}",
                details={"dim": data.shape[1]},
            )
        if inferred is EmbeddingSource.AUDIO and self.camera_id is not None:
            raise MediaValidationError(component="media.embedding", message="camera_id is only valid for video embeddings")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "source", inferred)

    @property
    def length(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])
