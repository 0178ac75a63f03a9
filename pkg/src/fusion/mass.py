"""
Late fusion of classifier outputs and filling-mass composition.

    type  probs = mean(forest, audio GRU)
    level probs = mean(forest, audio GRU, video GRU)
    mass        = capacity · level% / 100 · density(type)   (0 for empty)
"""

from typing import Any, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.labels import ClassProbs, FillingLevel, FillingType
from src.utils.densities import get_default_densities
from src.utils.exceptions import DomainError


class DensityTable(BaseModel):
    """Grams per millilitre of every non-empty filling; omitted keys come from config/densities.yaml."""

    model_config = ConfigDict(frozen=True)

    pasta: float = Field(gt=0)
    rice: float = Field(gt=0)
    water: float = Field(gt=0)

    @model_validator(mode="before")
    @classmethod
    def _fill_defaults(cls, data: Any) -> Any:
        if isinstance(data, dict):
            return {**get_default_densities(), **{k: v for k, v in data.items() if v is not None}}
        return data

    def density(self, filling_type: FillingType) -> float:
        if filling_type == FillingType.EMPTY:
            return 0.0
        return float(getattr(self, FillingType(filling_type).label))


def average_probs(probs: Sequence[ClassProbs]) -> ClassProbs:
    """
    Element-wise mean of several distributions.

    Raises:
        DomainError: Empty list or mixed class counts
    """
    if len(probs) == 0:
        raise DomainError(component="fusion.mass", message="average_probs needs at least one distribution")
    sizes = {p.n_classes for p in probs}
    if len(sizes) != 1:
        raise DomainError(component="fusion.mass", message=f"Cannot average distributions over {sorted(sizes)} classes")
    mean = np.mean(np.stack([p.p for p in probs]), axis=0)
    return ClassProbs(p=mean / mean.sum())


def decode_label(probs: ClassProbs) -> int:
    """Argmax; ties go to the lowest index."""
    return int(np.argmax(probs.p))


def filling_mass(
    capacity_ml: float,
    level: Union[FillingLevel, int],
    filling_type: Union[FillingType, int],
    densities: DensityTable,
) -> float:
    """Grams of content; 0 for an empty container."""
    if capacity_ml < 0:
        raise DomainError(component="fusion.mass", message=f"capacity must be ≥ 0, got {capacity_ml}")
    filling_type = FillingType(filling_type)
    if filling_type == FillingType.EMPTY:
        return 0.0
    return capacity_ml * FillingLevel(level).percent / 100.0 * densities.density(filling_type)


def apply_consistency(type_probs: ClassProbs, level_probs: ClassProbs, container_type: str) -> tuple[FillingType, FillingLevel]:
    """
    Decode type and level with two physical constraints: a box never holds
    water (next-best type instead) and an empty container has level 0 %.
    """
    order = np.argsort(-type_probs.p, kind="stable")
    filling_type = FillingType(int(order[0]))
    if container_type == "box" and filling_type == FillingType.WATER:
        filling_type = FillingType(int(order[1]))
    level = FillingLevel(decode_label(level_probs))
    if filling_type == FillingType.EMPTY:
        level = FillingLevel.EMPTY
    return filling_type, level
