"""
Random forest classifier over 136-d classical audio vectors.

CART trees with the Gini criterion: every node draws a fresh random subset of
features, candidate thresholds are midpoints between consecutive distinct
values, and samples with x[f] ≤ threshold go left. Each tree of a forest is
grown on a bootstrap resample using its own RNG stream spawned from the
forest seed, so (data, seed) fixes the model byte for byte.

Ties in weighted Gini impurity go to the lowest feature index, then the
lowest threshold.

Example:
    >>> model = train_forest(X, y, n_trees=100, seed=0)
    >>> predict_proba(model, X[0]).p
    array([0.93, 0.07, 0.  , 0.  ])
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from src.models.labels import ClassProbs
from src.utils.exceptions import DomainError, MediaFormatError

DEFAULT_MAX_DEPTH = 25
DEFAULT_MIN_SAMPLES_SPLIT = 2
DEFAULT_TREE_GRID: tuple[int, ...] = (10, 50, 100, 200, 500)
FORMAT_VERSION = 1

_TIE_EPS = 1e-12
_LEAF = -1


@dataclass
class DecisionTree:
    """
    Array-encoded binary tree; node 0 is the root.

    Attributes:
        feature: split feature per node, -1 for leaves
        threshold: split threshold per node (unused for leaves)
        left, right: child node indices, -1 for leaves
        counts: per-node class counts of the training samples reaching it
        n_features: input width the tree was grown on
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def n_classes(self) -> int:
        return int(self.counts.shape[1])

    def is_leaf(self, node: int) -> bool:
        return bool(self.feature[node] == _LEAF)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[nodes] != _LEAF
        while np.any(active):
            idx = rows[active]
            current = nodes[idx]
            go_left = X[idx, self.feature[current]] <= self.threshold[current]
            nodes[idx] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[nodes] != _LEAF
        return nodes

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        leaf_counts = self.counts[self.apply(X)].astype(np.float64)
        return leaf_counts / leaf_counts.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(v) for v in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DecisionTree":
        return cls(
            feature=np.array(data["feature"], dtype=np.int64),
            threshold=np.array(data["threshold"], dtype=np.float64),
            left=np.array(data["left"], dtype=np.int64),
            right=np.array(data["right"], dtype=np.int64),
            counts=np.array(data["counts"], dtype=np.int64),
            n_features=int(data["n_features"]),
        )


@dataclass
class RandomForestModel:
    trees: list[DecisionTree]
    n_classes: int
    n_features: int
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "random_forest",
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "seed": self.seed,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RandomForestModel":
        if data.get("kind") != "random_forest" or data.get("format_version") != FORMAT_VERSION:
            raise MediaFormatError(
                component="classifiers.forest",
                message="Not a version-1 random forest document",
                details={"kind": data.get("kind"), "format_version": data.get("format_version")},
            )
        return cls(
            trees=[DecisionTree.from_dict(t) for t in data["trees"]],
            n_classes=int(data["n_classes"]),
            n_features=int(data["n_features"]),
            seed=int(data["seed"]),
        )


@dataclass
class TuningResult:
    grid: list[int]
    val_accuracy: list[float]
    chosen: int
    model: Optional[RandomForestModel] = field(default=None, repr=False)


# ─────────────────────────────────────────────
# TREE GROWTH
# ─────────────────────────────────────────────

def _check_training_data(X: np.ndarray, y: np.ndarray, n_classes: Optional[int]) -> tuple[np.ndarray, np.ndarray, int]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise DomainError(component="classifiers.forest", message="X must be an n×d matrix with d ≥ 1", details={"shape": X.shape})
    if X.shape[0] == 0 or y.shape != (X.shape[0],):
        raise DomainError(component="classifiers.forest", message="Need n ≥ 1 rows and one label per row")
    n_classes = int(n_classes if n_classes is not None else y.max() + 1)
    if y.min() < 0 or y.max() >= n_classes:
        raise DomainError(component="classifiers.forest", message=f"Labels must lie in [0, {n_classes})")
    return X, y, n_classes


def _weighted_gini(left_counts: np.ndarray, total: np.ndarray) -> np.ndarray:
    """Weighted child Gini impurity for every split position (rows of left_counts)."""
    n = total.sum()
    n_left = left_counts.sum(axis=1)
    n_right = n - n_left
    right_counts = total - left_counts
    gini_left = 1.0 - ((left_counts / n_left[:, None]) ** 2).sum(axis=1)
    gini_right = 1.0 - ((right_counts / n_right[:, None]) ** 2).sum(axis=1)
    return (n_left * gini_left + n_right * gini_right) / n


def _best_split(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    subset_size: int,
    rng: np.random.Generator,
) -> Optional[tuple[int, float]]:
    """Best (feature, threshold) over a random subset of non-constant features, or None."""
    chosen: list[int] = []
    for f in rng.permutation(X.shape[1]):
        if len(chosen) == subset_size:
            break
        if X[:, f].max() > X[:, f].min():
            chosen.append(int(f))
    if not chosen:
        return None

    onehot = np.eye(n_classes, dtype=np.int64)
    total = np.bincount(y, minlength=n_classes)
    best_score = np.inf
    best: Optional[tuple[int, float]] = None
    for f in sorted(chosen):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        left_counts = np.cumsum(onehot[y[order]], axis=0)[:-1]
        positions = np.nonzero(xs[:-1] < xs[1:])[0]
        scores = _weighted_gini(left_counts[positions], total)
        lowest = scores.min()
        j = positions[np.argmax(scores <= lowest + _TIE_EPS)]
        if lowest < best_score - _TIE_EPS:
            threshold = (xs[j] + xs[j + 1]) / 2.0
            if threshold >= xs[j + 1]:
                threshold = xs[j]
            best_score = lowest
            best = (f, float(threshold))
    return best


def train_tree(
    X: np.ndarray,
    y: np.ndarray,
    feature_subset_size: int,
    rng: np.random.Generator,
    n_classes: Optional[int] = None,
    max_depth: int = DEFAULT_MAX_DEPTH,
    min_samples_split: int = DEFAULT_MIN_SAMPLES_SPLIT,
) -> DecisionTree:
    """
    Grow one CART tree.

    A node becomes a leaf when it is pure, holds fewer than min_samples_split
    samples, sits at max_depth, or every feature is constant on it.

    Raises:
        DomainError: Empty X, zero features, or labels outside [0, n_classes)
    """
    X, y, n_classes = _check_training_data(X, y, n_classes)
    subset_size = max(1, min(int(feature_subset_size), X.shape[1]))

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[np.ndarray] = []

    def grow(indices: np.ndarray, depth: int) -> int:
        node = len(feature)
        node_counts = np.bincount(y[indices], minlength=n_classes)
        feature.append(_LEAF)
        threshold.append(0.0)
        left.append(_LEAF)
        right.append(_LEAF)
        counts.append(node_counts)

        if depth >= max_depth or indices.size < min_samples_split or node_counts.max() == indices.size:
            return node
        split = _best_split(X[indices], y[indices], n_classes, subset_size, rng)
        if split is None:
            return node

        f, thr = split
        goes_left = X[indices, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(indices[goes_left], depth + 1)
        right[node] = grow(indices[~goes_left], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return DecisionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        counts=np.stack(counts).astype(np.int64),
        n_features=X.shape[1],
    )


# ─────────────────────────────────────────────
# FOREST
# ─────────────────────────────────────────────

def default_subset_size(n_features: int) -> int:
    """round(sqrt(d)), at least 1."""
    return max(1, int(round(math.sqrt(n_features))))


def tree_rngs(seed: int, n_trees: int) -> list[np.random.Generator]:
    """Independent RNG stream per tree, spawned from the forest seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_trees)]


def train_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int,
    seed: int,
    n_classes: Optional[int] = None,
    bootstrap: bool = True,
    max_depth: int = DEFAULT_MAX_DEPTH,
    min_samples_split: int = DEFAULT_MIN_SAMPLES_SPLIT,
) -> RandomForestModel:
    """
    Train a random forest.

    Args:
        X: n×d training matrix
        y: labels in [0, n_classes)
        n_trees: number of trees (≥ 1)
        seed: forest seed; fully determines the model
        n_classes: class count (defaults to max(y) + 1)
        bootstrap: resample n rows with replacement per tree (tests switch it off)

    Raises:
        DomainError: n_trees < 1 or invalid training data
    """
    if n_trees < 1:
        raise DomainError(component="classifiers.forest", message=f"n_trees must be ≥ 1, got {n_trees}")
    X, y, n_classes = _check_training_data(X, y, n_classes)
    n = X.shape[0]
    subset_size = default_subset_size(X.shape[1])

    trees = []
    for rng in tree_rngs(seed, n_trees):
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(
            train_tree(
                X[rows], y[rows], subset_size, rng,
                n_classes=n_classes, max_depth=max_depth, min_samples_split=min_samples_split,
            )
        )
    return RandomForestModel(trees=trees, n_classes=n_classes, n_features=X.shape[1], seed=int(seed))


def predict_proba_batch(model: RandomForestModel, X: np.ndarray) -> np.ndarray:
    """n×C matrix of averaged leaf distributions."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise DomainError(
            component="classifiers.forest",
            message=f"Expected {model.n_features} features, got {X.shape[1]}",
        )
    return np.mean([tree.predict_proba(X) for tree in model.trees], axis=0)


def predict_proba(model: RandomForestModel, x: np.ndarray) -> ClassProbs:
    """
    Class distribution for one feature vector: mean over trees of the
    normalised class counts of the leaf reached.

    Raises:
        DomainError: x does not have model.n_features entries
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise DomainError(
            component="classifiers.forest",
            message=f"Expected a vector of {model.n_features} features, got shape {x.shape}",
        )
    probs = predict_proba_batch(model, x[None, :])[0]
    return ClassProbs(p=probs / probs.sum())


def accuracy(model: RandomForestModel, X: np.ndarray, y: np.ndarray) -> float:
    predicted = np.argmax(predict_proba_batch(model, X), axis=1)
    return float(np.mean(predicted == np.asarray(y)))


def tune_n_trees(
    train: tuple[np.ndarray, np.ndarray],
    val: tuple[np.ndarray, np.ndarray],
    grid: Sequence[int] = DEFAULT_TREE_GRID,
    seed: int = 0,
    n_classes: Optional[int] = None,
    **tree_kwargs: Any,
) -> TuningResult:
    """
    Retrain with every tree count in grid and keep the best on validation.

    Ties in validation accuracy go to the smallest tree count.

    Raises:
        DomainError: Empty grid or empty validation set
    """
    grid = [int(g) for g in grid]
    if not grid:
        raise DomainError(component="classifiers.forest", message="Tuning grid is empty")
    X_val, y_val = np.asarray(val[0]), np.asarray(val[1])
    if len(y_val) == 0:
        raise DomainError(component="classifiers.forest", message="Validation set is empty")

    models: dict[int, RandomForestModel] = {}
    scores: list[float] = []
    for n_trees in grid:
        model = train_forest(train[0], train[1], n_trees, seed, n_classes=n_classes, **tree_kwargs)
        models[n_trees] = model
        scores.append(accuracy(model, X_val, y_val))

    best = max(scores)
    chosen = min(g for g, s in zip(grid, scores) if s == best)
    return TuningResult(grid=grid, val_accuracy=scores, chosen=chosen, model=models[chosen])


def save_forest(path: str | Path, model: RandomForestModel) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), sort_keys=True), encoding="utf-8")


def load_forest(path: str | Path) -> RandomForestModel:
    return RandomForestModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
