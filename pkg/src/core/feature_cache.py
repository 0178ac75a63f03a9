"""
In-memory cache of classical audio feature vectors.

Feature extraction is the most expensive per-sequence step of the forest path
and every cross-validation fold needs the same vectors, so they are memoised
keyed by (resolved audio path, window, hop).

Thread-safety: a lock guards the store; two threads missing on the same key
may both compute, the second write wins with an identical value.
"""

import threading
from pathlib import Path
from typing import Callable

from src.features.audio_features import LongTermVector

CacheKey = tuple[str, float, float]


class FeatureCache:
    """Memoised LongTermVector per audio file and analysis window."""

    def __init__(self) -> None:
        self._store: dict[CacheKey, LongTermVector] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    # ─────────────────────────────────────────────
    # PUBLIC API
    # ─────────────────────────────────────────────

    def get(self, path: str | Path, window: float, hop: float) -> LongTermVector | None:
        """Return the cached vector or None."""
        with self._lock:
            vector = self._store.get(self._key(path, window, hop))
            if vector is None:
                self.misses += 1
            else:
                self.hits += 1
            return vector

    def put(self, path: str | Path, window: float, hop: float, vector: LongTermVector) -> None:
        with self._lock:
            self._store[self._key(path, window, hop)] = vector

    def get_or_compute(
        self,
        path: str | Path,
        window: float,
        hop: float,
        compute: Callable[[], LongTermVector],
    ) -> LongTermVector:
        """Cached vector, computing and storing it on a miss."""
        vector = self.get(path, window, hop)
        if vector is None:
            vector = compute()
            self.put(path, window, hop, vector)
        return vector

    def clear(self) -> None:
        with self._lock:
            self._store.clear()
            self.hits = 0
            self.misses = 0

    def size(self) -> int:
        with self._lock:
            return len(self._store)

    # ─────────────────────────────────────────────
    # HELPERS
    # ─────────────────────────────────────────────

    @staticmethod
    def _key(path: str | Path, window: float, hop: float) -> CacheKey:
        return (str(Path(path).resolve()), float(window), float(hop))
