"""
Trainer - fits every enabled model of a pipeline config on a labelled manifest.

Training phases run serially, one model after another:

    forest (type)      ← classical audio vectors
    forest (level)     ← classical audio vectors
    audio GRU (type)   ← audio embedding sequences
    audio GRU (level)  ← audio embedding sequences
    video GRU (level)  ← every camera's video sequence as its own example

Model selection (forest tree count, GRU best epoch) uses the validation
manifest when one is given. Without one, the first fold of the per-type split
of the training containers is held out; when the containers cannot be split
that way, the training set itself selects and a warning is logged.

Usage:
    >>> models = train_models(train_manifest, config)
    >>> save_models("models/", models)
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from src.classifiers.forest import RandomForestModel, load_forest, save_forest, train_forest, tune_n_trees
from src.classifiers.seqnet import (
    ClassifierHead,
    GruStack,
    init_head,
    init_stack,
    load_seqnet,
    save_seqnet,
    train,
)
from src.core.config import Config
from src.core.cv import make_cv_splits, manifest_objects
from src.core.feature_cache import FeatureCache
from src.core.startup import BUNDLE_FILE
from src.geometry.capacity import capacity_prior
from src.media.record_inputs import audio_embeddings, classical_vector, level_index, type_index, video_embeddings
from src.models.labels import FillingLevel, FillingType
from src.models.manifest import DatasetManifest
from src.models.media import AUDIO_EMBEDDING_DIM, VIDEO_EMBEDDING_DIM
from src.models.pipeline_config import GruArchitecture, PipelineConfig
from src.utils.exceptions import MediaFormatError, SplitError, TrainingError

logger = logging.getLogger(__name__)

GruModel = tuple[GruStack, ClassifierHead]

# Model slot → file name inside a model directory
_FOREST_FILES = {"forest_type": "forest_type.json", "forest_level": "forest_level.json"}
_GRU_FILES = {
    "audio_gru_type": "gru_audio_type.json",
    "audio_gru_level": "gru_audio_level.json",
    "video_gru_level": "gru_video_level.json",
}

# Fixed offsets so every model draws from its own seed stream
_SEED_STREAMS = {
    "forest_type": 1,
    "forest_level": 2,
    "audio_gru_type": 3,
    "audio_gru_level": 4,
    "video_gru_level": 5,
}


@dataclass
class TrainedModels:
    """Every fitted model of a run plus the capacity prior; disabled models stay None."""

    prior_ml: float
    forest_type: Optional[RandomForestModel] = None
    forest_level: Optional[RandomForestModel] = None
    audio_gru_type: Optional[GruModel] = None
    audio_gru_level: Optional[GruModel] = None
    video_gru_level: Optional[GruModel] = None
    selection: dict[str, Any] = field(default_factory=dict)

    def forest(self, task: str) -> Optional[RandomForestModel]:
        return getattr(self, f"forest_{task}")

    def audio_gru(self, task: str) -> Optional[GruModel]:
        return getattr(self, f"audio_gru_{task}")


def derived_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


# ─────────────────────────────────────────────
# DATA ASSEMBLY
# ─────────────────────────────────────────────

def _forest_data(
    manifest: DatasetManifest,
    config: PipelineConfig,
    cache: Optional[FeatureCache],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Feature matrix with type and level label vectors; records without audio are skipped."""
    rows, types, levels = [], [], []
    for record in manifest.records:
        vector = classical_vector(manifest.root, record, config.audio_window, config.audio_hop, cache)
        if vector is None:
            logger.warning("%s has no audio; left out of forest training", record.sequence_id)
            continue
        rows.append(vector.values)
        types.append(type_index(record))
        levels.append(level_index(record))
    if not rows:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.stack(rows), np.array(types, dtype=np.int64), np.array(levels, dtype=np.int64)


def _audio_items(manifest: DatasetManifest, task: str) -> list[tuple[np.ndarray, int]]:
    label_of = type_index if task == "type" else level_index
    items = []
    for record in manifest.records:
        sequence = audio_embeddings(manifest.root, record)
        if sequence is None:
            logger.warning("%s has no audio embeddings; left out of audio GRU training", record.sequence_id)
            continue
        items.append((sequence.data, label_of(record)))
    return items


def _video_items(manifest: DatasetManifest) -> list[tuple[np.ndarray, int]]:
    items = []
    for record in manifest.records:
        streams = video_embeddings(manifest.root, record)
        if not streams:
            logger.warning("%s has no video embeddings; left out of video GRU training", record.sequence_id)
        items.extend((stream.data, level_index(record)) for stream in streams)
    return items


def _selection_split(
    manifest: DatasetManifest,
    config: PipelineConfig,
) -> tuple[DatasetManifest, DatasetManifest]:
    try:
        fold = make_cv_splits(manifest_objects(manifest), k=config.cv_folds, seed=config.seed).folds[0]
    except SplitError as e:
        logger.warning("No validation split (%s); model selection uses the training set", e.message)
        return manifest, manifest
    return manifest.subset(set(fold.train_ids)), manifest.subset(set(fold.val_ids))


# ─────────────────────────────────────────────
# PER-MODEL TRAINING
# ─────────────────────────────────────────────

def _fit_forest(
    slot: str,
    train_xy: tuple[np.ndarray, np.ndarray],
    val_xy: tuple[np.ndarray, np.ndarray],
    n_classes: int,
    config: PipelineConfig,
    selection: dict[str, Any],
) -> RandomForestModel:
    if len(train_xy[1]) == 0:
        raise TrainingError(component="core.trainer", message=f"No training examples for {slot}")
    seed = derived_seed(config.seed, _SEED_STREAMS[slot])
    tree_kwargs = {"max_depth": config.forest.max_depth, "min_samples_split": config.forest.min_samples_split}
    if config.forest.n_trees is not None or len(val_xy[1]) == 0:
        n_trees = config.forest.n_trees or max(config.forest.tree_grid)
        selection[slot] = {"n_trees": n_trees}
        return train_forest(train_xy[0], train_xy[1], n_trees, seed, n_classes=n_classes, **tree_kwargs)

    result = tune_n_trees(train_xy, val_xy, config.forest.tree_grid, seed, n_classes=n_classes, **tree_kwargs)
    selection[slot] = {"n_trees": result.chosen, "val_accuracy": dict(zip(result.grid, result.val_accuracy))}
    logger.info("%s: %d trees (val accuracy %.3f)", slot, result.chosen, max(result.val_accuracy))
    return result.model


def _fit_gru(
    slot: str,
    train_items: list[tuple[np.ndarray, int]],
    val_items: list[tuple[np.ndarray, int]],
    input_size: int,
    n_classes: int,
    architecture: GruArchitecture,
    config: PipelineConfig,
    selection: dict[str, Any],
) -> GruModel:
    if not train_items:
        raise TrainingError(component="core.trainer", message=f"No training examples for {slot}")
    seed = derived_seed(config.seed, _SEED_STREAMS[slot])
    rng = np.random.default_rng(seed)
    stack = init_stack(input_size, architecture.hidden, architecture.layers, rng)
    head = init_head(architecture.hidden, n_classes, rng)
    result = train(stack, head, train_items, config.training.model_copy(update={"seed": seed}), val_items or None)
    best = result.history[result.best_epoch - 1]
    selection[slot] = {"best_epoch": result.best_epoch, "val_accuracy": best.val_accuracy}
    logger.info(
        "%s: best epoch %d/%d (train acc %.3f, val acc %s)",
        slot, result.best_epoch, len(result.history), best.train_accuracy,
        "n/a" if best.val_accuracy is None else f"{best.val_accuracy:.3f}",
    )
    return result.stack, result.head


def train_models(
    train_manifest: DatasetManifest,
    config: PipelineConfig,
    val_manifest: Optional[DatasetManifest] = None,
    cache: Optional[FeatureCache] = None,
) -> TrainedModels:
    """
    Fit every model the config enables on a labelled manifest.

    Args:
        train_manifest: labelled training sequences
        config: validated pipeline config
        val_manifest: labelled sequences for model selection (see module docstring)
        cache: classical feature cache shared across calls

    Raises:
        TrainingError: An enabled model has no training examples, or diverged
        MediaError: A referenced input file is unreadable
    """
    if val_manifest is None:
        fit_manifest, val_manifest = _selection_split(train_manifest, config)
    else:
        fit_manifest = train_manifest

    enabled_type, enabled_level = set(config.models.type), set(config.models.level)
    models = TrainedModels(prior_ml=capacity_prior(train_manifest.records, config.prior_ml))
    logger.info(
        "Training on %d sequence(s), selecting on %d; capacity prior %.1f mL",
        len(fit_manifest), len(val_manifest), models.prior_ml,
    )

    if "forest" in enabled_type | enabled_level:
        X, y_type, y_level = _forest_data(fit_manifest, config, cache)
        X_val, y_val_type, y_val_level = _forest_data(val_manifest, config, cache)
        if "forest" in enabled_type:
            models.forest_type = _fit_forest(
                "forest_type", (X, y_type), (X_val, y_val_type), len(FillingType), config, models.selection
            )
        if "forest" in enabled_level:
            models.forest_level = _fit_forest(
                "forest_level", (X, y_level), (X_val, y_val_level), len(FillingLevel), config, models.selection
            )

    for task, n_classes, enabled in (("type", len(FillingType), enabled_type), ("level", len(FillingLevel), enabled_level)):
        if "audio_gru" in enabled:
            slot = f"audio_gru_{task}"
            setattr(models, slot, _fit_gru(
                slot, _audio_items(fit_manifest, task), _audio_items(val_manifest, task),
                AUDIO_EMBEDDING_DIM, n_classes, config.audio_gru, config, models.selection,
            ))

    if "video_gru" in enabled_level:
        models.video_gru_level = _fit_gru(
            "video_gru_level", _video_items(fit_manifest), _video_items(val_manifest),
            VIDEO_EMBEDDING_DIM, len(FillingLevel), config.video_gru, config, models.selection,
        )

    return models


# ─────────────────────────────────────────────
# MODEL DIRECTORY
# ─────────────────────────────────────────────

def save_models(models_dir: str | Path, models: TrainedModels) -> None:
    """Write every trained model plus bundle.json (prior and selection record)."""
    models_dir = Path(models_dir)
    models_dir.mkdir(parents=True, exist_ok=True)
    present = []
    for slot, name in _FOREST_FILES.items():
        model = getattr(models, slot)
        if model is not None:
            save_forest(models_dir / name, model)
            present.append(slot)
    for slot, name in _GRU_FILES.items():
        model = getattr(models, slot)
        if model is not None:
            save_seqnet(models_dir / name, *model)
            present.append(slot)

    bundle = {
        "format_version": Config.MODEL_FORMAT_VERSION,
        "kind": "filling_mass_models",
        "prior_ml": models.prior_ml,
        "models": present,
        "selection": models.selection,
    }
    (models_dir / BUNDLE_FILE).write_text(json.dumps(bundle, indent=2, sort_keys=True), encoding="utf-8")
    logger.info("Saved %d model(s) to %s", len(present), models_dir)


def load_models(models_dir: str | Path) -> TrainedModels:
    """
    Read a directory written by save_models.

    Raises:
        MediaFormatError: Missing or foreign bundle.json
    """
    models_dir = Path(models_dir)
    try:
        bundle = json.loads((models_dir / BUNDLE_FILE).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise MediaFormatError(component="core.trainer", message=f"Cannot read {models_dir / BUNDLE_FILE}: {e}") from e
    if bundle.get("kind") != "filling_mass_models" or bundle.get("format_version") != Config.MODEL_FORMAT_VERSION:
        raise MediaFormatError(
            component="core.trainer",
            message=f"{models_dir / BUNDLE_FILE} is not a version-{Config.MODEL_FORMAT_VERSION} model bundle",
        )

    models = TrainedModels(prior_ml=float(bundle["prior_ml"]), selection=bundle.get("selection", {}))
    for slot in bundle["models"]:
        if slot in _FOREST_FILES:
            setattr(models, slot, load_forest(models_dir / _FOREST_FILES[slot]))
        elif slot in _GRU_FILES:
            setattr(models, slot, load_seqnet(models_dir / _GRU_FILES[slot]))
    return models
