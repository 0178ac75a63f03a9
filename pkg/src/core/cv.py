"""
Per-type k-fold splits over container objects.

Every container type must contribute exactly k objects. Within each type the
ids are sorted, shuffled with the run seed and dealt one per fold, so fold i
validates on the i-th object of every type and trains on the rest: with
three types of three objects each, every fold is 6 train : 3 validation and
every object is validated exactly once.

Example:
    >>> split = make_cv_splits([CvObject("cup_1", "cup"), ...], k=3, seed=0)
    >>> [len(fold.train_ids) for fold in split.folds], len(split.folds[0].val_ids)
    ([6, 6, 6], 3)
"""

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from src.models.manifest import DatasetManifest
from src.utils.exceptions import DomainError, SplitError


@dataclass(frozen=True)
class CvObject:
    object_id: str
    object_type: str


@dataclass(frozen=True)
class CvFold:
    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]


@dataclass(frozen=True)
class CvSplit:
    folds: tuple[CvFold, ...]

    def __len__(self) -> int:
        return len(self.folds)


def manifest_objects(manifest: DatasetManifest) -> list[CvObject]:
    """Distinct containers of a manifest."""
    return [CvObject(r.container_id, r.container_type) for r in manifest.records]


def make_cv_splits(objects: Iterable[CvObject], k: int = 3, seed: int = 0) -> CvSplit:
    """
    Build k folds with one validation object per type per fold.

    The result depends only on the set of objects and the seed, not on the
    order they are given in.

    Raises:
        DomainError: k < 2
        SplitError: An object listed with two types, or a type without exactly k objects
    """
    if k < 2:
        raise DomainError(component="core.cv", message=f"k must be ≥ 2, got {k}")

    type_of: dict[str, str] = {}
    for obj in objects:
        known = type_of.setdefault(obj.object_id, obj.object_type)
        if known != obj.object_type:
            raise SplitError(
                component="core.cv",
                message=f"Object '{obj.object_id}' is listed as both '{known}' and '{obj.object_type}'",
            )

    by_type: dict[str, list[str]] = defaultdict(list)
    for object_id, object_type in type_of.items():
        by_type[object_type].append(object_id)
    if not by_type:
        raise SplitError(component="core.cv", message="No objects to split")

    rng = np.random.default_rng(seed)
    dealt: dict[str, list[str]] = {}
    for object_type in sorted(by_type):
        ids = sorted(by_type[object_type])
        if len(ids) != k:
            raise SplitError(
                component="core.cv",
                message=f"Type '{object_type}' has {len(ids)} object(s); {k}-fold splitting needs exactly {k}",
                details={"type": object_type, "objects": ids},
            )
        dealt[object_type] = [ids[i] for i in rng.permutation(k)]

    all_ids = set(type_of)
    folds = []
    for i in range(k):
        val = {dealt[t][i] for t in dealt}
        folds.append(CvFold(train_ids=tuple(sorted(all_ids - val)), val_ids=tuple(sorted(val))))
    return CvSplit(folds=tuple(folds))
