"""
Label vocabularies and class-probability vectors.

Index ↔ meaning bijections are fixed here and used everywhere else:
    FillingType:  0 empty, 1 pasta, 2 rice, 3 water
    FillingLevel: 0 → 0 %, 1 → 50 %, 2 → 90 %
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from src.utils.exceptions import DomainError

PROB_TOLERANCE = 1e-9


class FillingType(IntEnum):
    EMPTY = 0
    PASTA = 1
    RICE = 2
    WATER = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, name: str) -> "FillingType":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise DomainError(component="labels", message=f"Unknown filling type '{name}'") from None


class FillingLevel(IntEnum):
    EMPTY = 0
    HALF = 1
    NINETY = 2

    @property
    def percent(self) -> int:
        return _LEVEL_PERCENT[self]

    @classmethod
    def from_percent(cls, percent: float) -> "FillingLevel":
        for level, value in _LEVEL_PERCENT.items():
            if abs(value - float(percent)) < 1e-9:
                return level
        raise DomainError(component="labels", message=f"Filling level must be 0, 50 or 90 percent, got {percent}")


_LEVEL_PERCENT = {FillingLevel.EMPTY: 0, FillingLevel.HALF: 50, FillingLevel.NINETY: 90}

CONTAINER_TYPES = ("cup", "glass", "box")


@dataclass(frozen=True)
class ClassProbs:
    """
    Probability distribution over C classes (3 for level, 4 for type).

    Attributes:
        p: C-vector (C ≥ 2), non-negative, sums to 1 within 1e-9
    """

    p: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.p, dtype=np.float64).reshape(-1)
        if p.size < 2:
            raise DomainError(component="labels", message=f"ClassProbs needs at least 2 classes, got {p.size}")
        if np.any(p < 0) or not np.all(np.isfinite(p)) or abs(p.sum() - 1.0) > PROB_TOLERANCE:
            raise DomainError(
                component="labels",
                message="ClassProbs must be a probability distribution",
                details={"p": p.tolist()},
            )
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n_classes(self) -> int:
        return int(self.p.size)

    def __len__(self) -> int:
        return self.n_classes
