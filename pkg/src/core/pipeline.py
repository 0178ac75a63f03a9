"""
FillingMassPipeline - Orchestrator for the per-sequence stages.

Separates stage sequencing from the CLI. The pipeline owns the stages, runs
them in order for every manifest record and gathers the results in manifest
order whatever the worker count.

Stage order (models disabled in the config are not built):
    AudioFeatures → Forest(type) → Forest(level) → AudioGru(type)
    → AudioGru(level) → VideoGru(level) → Capacity → Fusion

Usage:
    >>> pipeline = FillingMassPipeline(models=load_models("models/"), config=config)
    >>> states = pipeline.run(manifest)
    >>> write_submission("submission.csv", states)
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Optional, Sequence

import pandas as pd

from src.core.base_stage import BaseStage
from src.core.config import Config
from src.core.cv import make_cv_splits, manifest_objects
from src.core.feature_cache import FeatureCache
from src.core.trainer import TrainedModels, train_models
from src.fusion.metrics import MetricReport, evaluate_submission, weighted_f1
from src.fusion.mass import decode_label
from src.media.record_inputs import level_index, type_index
from src.models.labels import FillingLevel, FillingType
from src.models.manifest import DatasetManifest
from src.models.pipeline_config import PipelineConfig
from src.models.sequence_state import TASKS, SequenceState
from src.stages.audio_features import AudioFeatureStage
from src.stages.capacity import CapacityStage
from src.stages.classifiers import AudioGruStage, ForestStage, VideoGruStage
from src.stages.fusion import FusionStage
from src.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)


class FillingMassPipeline:
    """
    Runs every stage over every sequence of a manifest.

    Sequences are independent: each gets its own SequenceState and runs on a
    worker thread; stages are shared and only read their models.
    """

    def __init__(
        self,
        models: TrainedModels,
        config: PipelineConfig,
        cache: Optional[FeatureCache] = None,
    ) -> None:
        self.models = models
        self.config = config
        self.cache = cache if cache is not None else FeatureCache()
        self._stages = self._build_stages()

    def _build_stages(self) -> list[BaseStage]:
        enabled = {"type": set(self.config.models.type), "level": set(self.config.models.level)}
        stages: list[BaseStage] = []

        if "forest" in enabled["type"] | enabled["level"]:
            stages.append(AudioFeatureStage(self.config.audio_window, self.config.audio_hop, self.cache))
        for task in TASKS:
            if "forest" in enabled[task]:
                stages.append(ForestStage(task, self._require(self.models.forest(task), f"forest_{task}")))
        for task in TASKS:
            if "audio_gru" in enabled[task]:
                stages.append(AudioGruStage(task, *self._require(self.models.audio_gru(task), f"audio_gru_{task}")))
        if "video_gru" in enabled["level"]:
            stages.append(VideoGruStage(*self._require(self.models.video_gru_level, "video_gru_level")))

        stages.append(CapacityStage(self.config.fit, self.models.prior_ml))
        stages.append(FusionStage(self.config.models, self.config.densities, self.config.consistency))
        return stages

    @staticmethod
    def _require(model: Any, slot: str) -> Any:
        if model is None:
            raise ConfigError(component="core.pipeline", message=f"Model '{slot}' is enabled but was not trained")
        return model

    @property
    def stages(self) -> list[BaseStage]:
        """All stages in pipeline order."""
        return list(self._stages)

    # ─────────────────────────────────────────────
    # CORE
    # ─────────────────────────────────────────────

    def run_sequence(self, state: SequenceState) -> SequenceState:
        for stage in self._stages:
            state = stage.run(state)
        return state

    def run(self, manifest: DatasetManifest) -> list[SequenceState]:
        """
        Process every record; results come back in manifest order.

        Raises:
            FillMassError: The first failing sequence's error (by manifest order)
        """
        states = [SequenceState(record=r, index=i, root=manifest.root) for i, r in enumerate(manifest.records)]
        logger.info("Running %d stage(s) over %d sequence(s)", len(self._stages), len(states))
        with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
            results = list(executor.map(self.run_sequence, states))

        fallbacks = sum(1 for s in results if s.capacity is not None and s.capacity.used_prior)
        if fallbacks:
            logger.warning("Capacity prior used for %d of %d sequence(s)", fallbacks, len(results))
        return results

    # ─────────────────────────────────────────────
    # HEALTH
    # ─────────────────────────────────────────────

    def get_metrics(self) -> list[dict[str, Any]]:
        return [stage.get_metrics() for stage in self._stages]


def run_capacity(manifest: DatasetManifest, config: PipelineConfig, prior_ml: float) -> list[SequenceState]:
    """Capacity stage alone over a manifest, in manifest order."""
    stage = CapacityStage(config.fit, prior_ml)
    states = [SequenceState(record=r, index=i, root=manifest.root) for i, r in enumerate(manifest.records)]
    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        return list(executor.map(stage.run, states))


# ─────────────────────────────────────────────
# OUTPUTS
# ─────────────────────────────────────────────

def submission_frame(states: Sequence[SequenceState]) -> pd.DataFrame:
    """One submission row per sequence, in the order given."""
    return pd.DataFrame([s.to_submission_row() for s in states], columns=list(Config.SUBMISSION_COLUMNS))


def write_submission(path: str | Path, states: Sequence[SequenceState]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    submission_frame(states).to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
    return path


def runlog_path(submission_path: str | Path) -> Path:
    submission_path = Path(submission_path)
    return submission_path.with_name(submission_path.name + ".runlog.json")


def write_runlog(path: str | Path, states: Sequence[SequenceState], extra: Optional[dict[str, Any]] = None) -> Path:
    """Sidecar with per-sequence timing, prior fallbacks and skipped-model warnings."""
    path = Path(path)
    payload = {
        "sequences": [s.to_runlog() for s in states],
        "used_prior": sum(1 for s in states if s.capacity is not None and s.capacity.used_prior),
        **(extra or {}),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    return path


# ─────────────────────────────────────────────
# CROSS-VALIDATION
# ─────────────────────────────────────────────

def per_model_f1(states: Sequence[SequenceState]) -> dict[str, dict[str, float]]:
    """
    Weighted F1 of each individual model and of the fused output, per task,
    over the labelled sequences the model ran on.
    """
    n_classes = {"type": len(FillingType), "level": len(FillingLevel)}
    truth = {"type": type_index, "level": level_index}
    table: dict[str, dict[str, float]] = {}
    for task in TASKS:
        models = sorted({name for s in states for name in s.model_probs[task]})
        for name in models:
            ran = [s for s in states if name in s.model_probs[task]]
            table.setdefault(name, {})[task] = weighted_f1(
                [decode_label(s.model_probs[task][name]) for s in ran],
                [truth[task](s.record) for s in ran],
                n_classes[task],
            )
        fused = [s for s in states if task in s.fused]
        if fused:
            table.setdefault("fused", {})[task] = weighted_f1(
                [decode_label(s.fused[task]) for s in fused],
                [truth[task](s.record) for s in fused],
                n_classes[task],
            )
    return table


def cross_validate(
    manifest: DatasetManifest,
    config: PipelineConfig,
    cache: Optional[FeatureCache] = None,
) -> tuple[MetricReport, list[SequenceState]]:
    """
    Per-type k-fold cross-validation over the manifest's containers.

    Each fold trains on its train containers, selects on and predicts its
    validation containers; every sequence is predicted exactly once.

    Returns:
        (report over all validation predictions with per-model F1, states in manifest order)

    Raises:
        SplitError: Container types without exactly cv_folds objects
    """
    cache = cache if cache is not None else FeatureCache()
    split = make_cv_splits(manifest_objects(manifest), k=config.cv_folds, seed=config.seed)
    by_index: dict[str, SequenceState] = {}
    for fold_number, fold in enumerate(split.folds, start=1):
        logger.info("Fold %d/%d: %d train / %d val object(s)", fold_number, len(split), len(fold.train_ids), len(fold.val_ids))
        train_part = manifest.subset(set(fold.train_ids))
        val_part = manifest.subset(set(fold.val_ids))
        models = train_models(train_part, config, val_manifest=val_part, cache=cache)
        for state in FillingMassPipeline(models, config, cache).run(val_part):
            by_index[state.sequence_id] = state

    states = [by_index[r.sequence_id] for r in manifest.records]
    for i, state in enumerate(states):
        state.index = i
    report = evaluate_submission(submission_frame(states), manifest)
    report.per_model_f1 = per_model_f1(states)
    return report, states
