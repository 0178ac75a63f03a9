"""
Startup Validation

Validates a run's inputs before any stage is built or any model trained.

Fail-fast: every problem is collected first and raised as one ConfigError, so
a bad manifest or model directory is reported in full rather than buried in a
stage traceback halfway through a batch. Gaps the pipeline tolerates (a
missing modality for an enabled model) are logged as warnings only.

Usage:
    >>> from src.core.startup import validate_run_inputs
    >>> validate_run_inputs(manifest, config, models_dir="models/")
"""

import logging
from pathlib import Path
from typing import Optional

from src.models.manifest import DatasetManifest
from src.models.pipeline_config import PipelineConfig
from src.utils.exceptions import ConfigError

logger = logging.getLogger("startup")

# Files a trained model directory must hold, by the model that needs them
MODEL_FILES: dict[str, tuple[str, ...]] = {
    "forest": ("forest_type.json", "forest_level.json"),
    "audio_gru": ("gru_audio_type.json", "gru_audio_level.json"),
    "video_gru": ("gru_video_level.json",),
}
BUNDLE_FILE = "bundle.json"


def _missing_modalities(manifest: DatasetManifest, config: PipelineConfig) -> list[str]:
    enabled = config.models.enabled()
    gaps: list[str] = []
    for record in manifest.records:
        if "forest" in enabled and not record.audio:
            gaps.append(f"  - {record.sequence_id}: no audio, forest skipped")
        if "audio_gru" in enabled and not record.embeddings.audio:
            gaps.append(f"  - {record.sequence_id}: no audio embeddings, audio GRU skipped")
        if "video_gru" in enabled and not record.embeddings.video:
            gaps.append(f"  - {record.sequence_id}: no video embeddings, video GRU skipped")
        if len(record.calibrations) < 2:
            gaps.append(f"  - {record.sequence_id}: fewer than two calibrations, capacity falls back to the prior")
    return gaps


def validate_run_inputs(
    manifest: DatasetManifest,
    config: PipelineConfig,
    models_dir: Optional[str | Path] = None,
    need_labels: bool = False,
) -> None:
    """
    Validate a manifest (and optionally a model directory) against the config.

    Args:
        manifest: loaded dataset manifest
        config: validated pipeline config
        models_dir: trained model directory to check, None when training in-process
        need_labels: training and evaluation require every record to be labelled

    Raises:
        ConfigError: If anything critical is missing; details["errors"] lists all of it.
    """
    errors: list[str] = []

    if len(manifest) == 0:
        errors.append("  - Manifest holds no records")
    if need_labels and not manifest.has_labels():
        unlabelled = [r.sequence_id for r in manifest.records if r.labels is None]
        errors.append(f"  - {len(unlabelled)} record(s) have no labels: {', '.join(unlabelled[:10])}")

    if models_dir is not None:
        models_dir = Path(models_dir)
        if not models_dir.is_dir():
            errors.append(f"  - Model directory {models_dir} does not exist")
        else:
            needed = [BUNDLE_FILE] + [f for model in sorted(config.models.enabled()) for f in MODEL_FILES[model]]
            for name in needed:
                if not (models_dir / name).is_file():
                    errors.append(f"  - {models_dir / name} is missing (train first, or pass --train)")

    warnings = _missing_modalities(manifest, config)
    if warnings:
        logger.warning("Startup warnings:\n%s", "\n".join(warnings))

    if errors:
        logger.critical("Startup failed:\n%s", "\n".join(errors))
        raise ConfigError(
            component="startup",
            message=f"{len(errors)} problem(s) with run inputs. See log output above for details.",
            details={"errors": [e.strip(" -") for e in errors]},
        )

    logger.info(
        "Run inputs OK: %d sequence(s) | models: [%s]",
        len(manifest),
        ", ".join(sorted(config.models.enabled())),
    )
