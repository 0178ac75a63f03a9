"""
Stand-in embedding sequences: class mean plus Gaussian noise per row.

Class means are orthonormal directions (QR of a fixed-seed Gaussian matrix)
scaled to norm 2, one set per width D, identical on every platform.
"""

import functools
from typing import Optional

import numpy as np

from src.models.media import EmbeddingSequence, source_for_dim
from src.utils.exceptions import DomainError

MAX_CLASSES = 12
MEAN_NORM = 2.0
DEFAULT_NOISE_SCALE = 0.5
_MEANS_SEED = 20210131


@functools.lru_cache(maxsize=4)
def class_means(dim: int) -> np.ndarray:
    """MAX_CLASSES × dim matrix of orthogonal class means, each of norm 2."""
    source_for_dim(dim)
    rng = np.random.default_rng([_MEANS_SEED, dim])
    q, _ = np.linalg.qr(rng.standard_normal((dim, MAX_CLASSES)))
    means = MEAN_NORM * q.T
    means.setflags(write=False)
    return means


def synth_embedding_sequence(
    class_index: int,
    length: int,
    dim: int,
    seed: int,
    noise_scale: float = DEFAULT_NOISE_SCALE,
    camera_id: Optional[int] = None,
) -> EmbeddingSequence:
    """
    length × dim rows of μ_class + N(0, noise_scale²).

    Raises:
        DomainError: length < 1 or class_index outside [0, 12)
        DimensionError: dim not in {128, 512}
    """
    if length < 1:
        raise DomainError(component="synth.embeddings", message=f"length must be ≥ 1, got {length}")
    if not 0 <= class_index < MAX_CLASSES:
        raise DomainError(component="synth.embeddings", message=f"class_index must lie in [0, {MAX_CLASSES})")
    mean = class_means(dim)[class_index]
    noise = np.random.default_rng(seed).standard_normal((length, dim)) * noise_scale
    return EmbeddingSequence(data=mean + noise, camera_id=camera_id)
