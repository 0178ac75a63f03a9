"""
Filling densities: single source of truth loader.

Loads config/densities.yaml once per process and caches the result.
Restart the process to pick up YAML changes (lru_cache is process-scoped);
tests call _load.cache_clear() after pointing Config.DENSITIES_PATH elsewhere.
"""
import functools
from pathlib import Path

import yaml

from src.core.config import Config


@functools.lru_cache(maxsize=1)
def _load() -> dict:
    with Path(Config.DENSITIES_PATH).open(encoding="utf-8") as fh:
        return yaml.safe_load(fh)


def get_default_densities() -> dict[str, float]:
    """Return {filling type name: g/mL} for the non-empty filling types.

    Defaults to pasta 0.41, rice 0.85, water 1.00 if the YAML lacks a key.
    """
    data = (_load() or {}).get("densities", {})
    return {
        "pasta": float(data.get("pasta", 0.41)),
        "rice": float(data.get("rice", 0.85)),
        "water": float(data.get("water", 1.00)),
    }
