"""
PipelineConfig - every tunable of a run in one validated document.

Loaded from YAML (JSON is valid YAML) and then overridden by CLI flags; flags
always win. Nested blocks reuse the domain config models:

    training   → src.classifiers.seqnet.TrainingConfig
    fit        → src.geometry.capacity.FitConfig
    densities  → src.fusion.mass.DensityTable

Example:
    >>> cfg = load_pipeline_config("config/desk.yaml", {"training": {"max_epochs": 5}})
    >>> cfg.audio_gru.layers
    2
"""

from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator

from src.classifiers.forest import DEFAULT_MAX_DEPTH, DEFAULT_MIN_SAMPLES_SPLIT, DEFAULT_TREE_GRID
from src.classifiers.seqnet import TrainingConfig
from src.core.config import Config
from src.fusion.mass import DensityTable
from src.geometry.capacity import FitConfig
from src.utils.exceptions import ConfigError

TypeModel = Literal["forest", "audio_gru"]
LevelModel = Literal["forest", "audio_gru", "video_gru"]

# layers when a config block (or a flag) gives only the hidden size
DEFAULT_GRU_LAYERS = {"audio_gru": 5, "video_gru": 3}


class ForestConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    tree_grid: tuple[int, ...] = DEFAULT_TREE_GRID
    # fixed tree count; skips validation tuning when set
    n_trees: Optional[int] = Field(default=None, ge=1)
    max_depth: int = Field(default=DEFAULT_MAX_DEPTH, ge=1)
    min_samples_split: int = Field(default=DEFAULT_MIN_SAMPLES_SPLIT, ge=2)

    @field_validator("tree_grid")
    @classmethod
    def grid_positive(cls, grid: tuple[int, ...]) -> tuple[int, ...]:
        if not grid or any(n < 1 for n in grid):
            raise ValueError("tree_grid must be a non-empty list of positive tree counts")
        return grid


class GruArchitecture(BaseModel):
    model_config = ConfigDict(frozen=True)

    hidden: int = Field(default=512, ge=1)
    layers: int = Field(ge=1)


class TaskModels(BaseModel):
    """Models fused per task; the type task has no video stream."""

    model_config = ConfigDict(frozen=True)

    type: tuple[TypeModel, ...] = ("forest", "audio_gru")
    level: tuple[LevelModel, ...] = ("forest", "audio_gru", "video_gru")

    @field_validator("type", "level")
    @classmethod
    def non_empty(cls, models: tuple[str, ...]) -> tuple[str, ...]:
        if not models:
            raise ValueError("every task needs at least one model")
        return tuple(dict.fromkeys(models))

    def enabled(self) -> set[str]:
        return set(self.type) | set(self.level)


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Config.DEFAULT_SEED
    workers: int = Field(default=Config.WORKERS, ge=1)
    audio_window: float = Field(default=0.050, gt=0)
    audio_hop: float = Field(default=0.025, gt=0)
    forest: ForestConfig = Field(default_factory=ForestConfig)
    audio_gru: GruArchitecture = Field(default_factory=lambda: GruArchitecture(layers=DEFAULT_GRU_LAYERS["audio_gru"]))
    video_gru: GruArchitecture = Field(default_factory=lambda: GruArchitecture(layers=DEFAULT_GRU_LAYERS["video_gru"]))
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    fit: FitConfig = Field(default_factory=FitConfig)
    densities: DensityTable = Field(default_factory=DensityTable)
    # capacity used when no training labels exist (or for `capacity` runs)
    prior_ml: float = Field(default=500.0, gt=0)
    models: TaskModels = Field(default_factory=TaskModels)
    consistency: bool = False
    cv_folds: int = Field(default=3, ge=2)

    @field_validator("audio_gru", "video_gru", mode="before")
    @classmethod
    def _default_layers(cls, value: Any, info: ValidationInfo) -> Any:
        if isinstance(value, dict) and "layers" not in value:
            return {**value, "layers": DEFAULT_GRU_LAYERS[info.field_name]}
        return value


def _merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Recursive dict merge; None values and override blocks left empty by them are ignored."""
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict):
            current = merged.get(key)
            value = _merge(current if isinstance(current, dict) else {}, value)
            if not value:
                continue
        if value is None:
            continue
        merged[key] = value
    return merged


def load_pipeline_config(
    path: Optional[str | Path] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> PipelineConfig:
    """
    Parse a YAML/JSON config file and apply flag overrides on top.

    Args:
        path: config file; Config.PIPELINE_CONFIG_PATH when None
        overrides: nested dict of flag values (None entries are skipped)

    Raises:
        ConfigError: Unreadable file or invalid values (all problems listed)
    """
    path = Path(path or Config.PIPELINE_CONFIG_PATH)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(component="config", message=f"Cannot read {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(component="config", message=f"{path} must hold a mapping at top level")

    try:
        return PipelineConfig.model_validate(_merge(raw, overrides or {}))
    except ValidationError as e:
        raise ConfigError(
            component="config",
            message=f"Invalid pipeline config {path.name}: {e.error_count()} error(s)",
            details={"errors": [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]},
        ) from e
