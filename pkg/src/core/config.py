"""
Centralized Configuration

Process-level settings read once from the environment. Components read from
Config, never from os.getenv() directly (except this module and the logger).
Model hyper-parameters live in the YAML pipeline configs, see
src/models/pipeline_config.py.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Project root is two levels above this file (src/core/config.py → project root)
_ROOT = Path(__file__).parent.parent.parent


class Config:
    # ── Logging ───────────────────────────────────────────────────
    # "text" for human-readable, "json" for structured run logs.
    LOG_FORMAT = os.getenv("LOG_FORMAT", "text")
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    # ── Execution ─────────────────────────────────────────────────
    # Thread pool size for per-sequence work. Results are always gathered
    # in sequence order, so this never changes the output.
    WORKERS = int(os.getenv("FILLMASS_WORKERS", "4"))
    DEFAULT_SEED = int(os.getenv("FILLMASS_SEED", "0"))

    # ── Config files ──────────────────────────────────────────────
    # Env-var overrides take precedence; defaults are resolved relative to the
    # project root so the CLI works regardless of the working directory.
    PIPELINE_CONFIG_PATH = os.getenv("FILLMASS_PIPELINE_CONFIG") or str(_ROOT / "config" / "pipeline.yaml")
    DENSITIES_PATH = os.getenv("FILLMASS_DENSITIES") or str(_ROOT / "config" / "densities.yaml")

    # ── Output schemas ────────────────────────────────────────────
    MODEL_FORMAT_VERSION = 1
    REPORT_SCHEMA_VERSION = 1
    SUBMISSION_COLUMNS = (
        "sequence_id",
        "container_capacity_ml",
        "filling_type",
        "filling_level_percent",
        "filling_mass_g",
    )
