"""
Command-line entry point.

    python -m src.main synth-gen       --out data/synth --n-per-class 10 --seed 0
    python -m src.main extract-features --manifest data/synth/manifest.json --out features.csv
    python -m src.main train           --manifest train.json --models-dir models/ --hidden 64 --layers 2 --epochs 50
    python -m src.main predict         --manifest test.json --models-dir models/ --out submission.csv
    python -m src.main capacity        --manifest test.json --out capacity.csv
    python -m src.main capacity        --masks seq/masks --calib c1.json c2.json --prior-ml 500 --out cap.csv
    python -m src.main evaluate        --submission submission.csv --manifest test.json
    python -m src.main cross-validate  --manifest train.json --report cv.json

Configuration comes from one YAML/JSON file (--config, default
config/pipeline.yaml) with flag overrides on top; flags win.

Exit codes: 0 success, 2 invalid input or configuration, 3 evaluation error,
1 anything else.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import pandas as pd

from src.core.config import Config
from src.core.feature_cache import FeatureCache
from src.core.pipeline import (
    FillingMassPipeline,
    cross_validate,
    run_capacity,
    runlog_path,
    write_runlog,
    write_submission,
)
from src.core.startup import validate_run_inputs
from src.core.trainer import load_models, save_models, train_models
from src.features.audio_features import LONG_TERM_COLUMNS, aggregate_long_term, short_term_features, write_frame_table
from src.fusion.metrics import MetricReport, evaluate_submission
from src.geometry.capacity import CapacityEstimate, estimate_capacity_sequence
from src.media.calibration import read_calibration
from src.media.manifest import load_manifest
from src.media.record_inputs import mask_pairs_from_directory
from src.media.wav import read_wav
from src.models.pipeline_config import PipelineConfig, load_pipeline_config
from src.synth.dataset import generate_dataset
from src.utils.exceptions import ConfigError, DomainError, EvaluationError, FillMassError, MediaError, SplitError
from src.utils.logger import setup_logger

logger = setup_logger(name="main")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID_INPUT = 2
EXIT_EVALUATION = 3

CAPACITY_COLUMNS = ("sequence_id", "container_capacity_ml", "used_prior", "frames_used")


# ─────────────────────────────────────────────
# HELPERS
# ─────────────────────────────────────────────

def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    """Config file named by --config with every given flag applied on top."""
    flag = vars(args).get

    def layers(stream: str) -> Optional[int]:
        own = flag(f"{stream}_layers", None)
        return own if own is not None else flag("layers", None)

    overrides: dict[str, Any] = {
        "seed": flag("seed", None),
        "workers": flag("workers", None),
        "prior_ml": flag("prior_ml", None),
        "consistency": True if flag("consistency", False) else None,
        "forest": {
            "n_trees": flag("n_trees", None),
            "tree_grid": tuple(flag("tune_grid", None) or ()) or None,
        },
        "audio_gru": {"hidden": flag("hidden", None), "layers": layers("audio")},
        "video_gru": {"hidden": flag("hidden", None), "layers": layers("video")},
        "training": {
            "max_epochs": flag("max_epochs", None),
            "lr": flag("lr", None),
            "batch_size": flag("batch", None),
        },
    }
    return load_pipeline_config(args.config, overrides)


def _write_report(report: MetricReport, path: Optional[str]) -> None:
    print(report.to_table())
    if path:
        Path(path).write_text(report.to_json(), encoding="utf-8")
        logger.info("Metric report written to %s", path)


# ─────────────────────────────────────────────
# SUBCOMMANDS
# ─────────────────────────────────────────────

def cmd_synth_gen(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    manifest = generate_dataset(
        args.out, args.n_per_class, config.seed, densities=config.densities, workers=config.workers
    )
    logger.info("Wrote %d synthetic sequence(s) to %s", len(manifest), args.out)
    return EXIT_OK


def cmd_extract_features(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    manifest = load_manifest(args.manifest)
    if args.frames_dir:
        Path(args.frames_dir).mkdir(parents=True, exist_ok=True)

    rows, ids = [], []
    for record in manifest.records:
        if not record.audio:
            logger.warning("%s has no audio; skipped", record.sequence_id)
            continue
        frames = short_term_features(read_wav(manifest.resolve(record.audio)), config.audio_window, config.audio_hop)
        if args.frames_dir:
            write_frame_table(frames, Path(args.frames_dir) / f"{record.sequence_id}.csv")
        rows.append(aggregate_long_term(frames).values)
        ids.append(record.sequence_id)

    table = pd.DataFrame(rows, columns=list(LONG_TERM_COLUMNS))
    table.insert(0, "sequence_id", ids)
    table.to_csv(args.out, index=False, float_format="%.10g", lineterminator="\n")
    logger.info("Features of %d sequence(s) written to %s", len(ids), args.out)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    manifest = load_manifest(args.manifest)
    validate_run_inputs(manifest, config, need_labels=True)
    val_manifest = load_manifest(args.val_manifest) if args.val_manifest else None
    models = train_models(manifest, config, val_manifest=val_manifest)
    save_models(args.models_dir, models)
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    manifest = load_manifest(args.manifest)
    cache = FeatureCache()

    if args.train:
        train_manifest = load_manifest(args.train)
        validate_run_inputs(train_manifest, config, need_labels=True)
        validate_run_inputs(manifest, config)
        models = train_models(train_manifest, config, cache=cache)
        if args.models_dir:
            save_models(args.models_dir, models)
    else:
        if not args.models_dir:
            raise ConfigError(component="cli", message="predict needs --models-dir or --train")
        validate_run_inputs(manifest, config, models_dir=args.models_dir)
        models = load_models(args.models_dir)

    pipeline = FillingMassPipeline(models, config, cache)
    states = pipeline.run(manifest)
    out = write_submission(args.out, states)
    write_runlog(runlog_path(out), states, {"stages": pipeline.get_metrics()})
    logger.info("Submission with %d row(s) written to %s", len(states), out)

    if manifest.has_labels():
        _write_report(evaluate_submission(pd.read_csv(out), manifest), args.report)
    return EXIT_OK


def _capacity_row(sequence_id: str, estimate: CapacityEstimate) -> dict[str, Any]:
    return {
        "sequence_id": sequence_id,
        "container_capacity_ml": estimate.capacity,
        "used_prior": estimate.used_prior,
        "frames_used": estimate.frames_used,
    }


def _write_capacity_table(path: str, rows: list[dict[str, Any]]) -> None:
    pd.DataFrame(rows, columns=list(CAPACITY_COLUMNS)).to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
    logger.info("Capacities of %d sequence(s) written to %s", len(rows), path)


def _capacity_from_masks(args: argparse.Namespace, config: PipelineConfig, prior_ml: float) -> int:
    masks_dir = Path(args.masks)
    pairs, missing = mask_pairs_from_directory(masks_dir, args.frame_count)
    calibs = [read_calibration(path) for path in args.calib]
    estimate = estimate_capacity_sequence(pairs, calibs, prior_ml, config.fit)

    sequence_id = args.sequence_id or (masks_dir.parent.name if masks_dir.name == "masks" else masks_dir.name)
    if missing:
        logger.warning("%s: no mask pair for frame(s) %s", sequence_id, missing, extra={"sequence_id": sequence_id})
    for failure in estimate.failures:
        logger.warning("%s: %s", sequence_id, failure, extra={"sequence_id": sequence_id})
    if estimate.used_prior:
        logger.warning("%s: capacity prior used", sequence_id, extra={"sequence_id": sequence_id, "used_prior": True})

    _write_capacity_table(args.out, [_capacity_row(sequence_id, estimate)])
    return EXIT_OK


def cmd_capacity(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    prior_ml = load_models(args.models_dir).prior_ml if args.models_dir else config.prior_ml
    if args.masks:
        if not args.calib:
            raise ConfigError(component="cli", message="capacity --masks needs --calib C1 C2")
        return _capacity_from_masks(args, config, prior_ml)
    if args.calib or args.frame_count is not None or args.sequence_id:
        raise ConfigError(component="cli", message="--calib, --frame-count and --sequence-id go with --masks")

    manifest = load_manifest(args.manifest)
    states = run_capacity(manifest, config, prior_ml)
    _write_capacity_table(args.out, [_capacity_row(s.sequence_id, s.capacity) for s in states])
    write_runlog(runlog_path(args.out), states)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest, check_paths=False)
    try:
        submission = pd.read_csv(args.submission)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise EvaluationError(component="cli", message=f"Cannot read submission {args.submission}: {e}") from e
    _write_report(evaluate_submission(submission, manifest), args.report)
    return EXIT_OK


def cmd_cross_validate(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    manifest = load_manifest(args.manifest)
    validate_run_inputs(manifest, config, need_labels=True)
    report, states = cross_validate(manifest, config)
    if args.out:
        out = write_submission(args.out, states)
        write_runlog(runlog_path(out), states)
    _write_report(report, args.report)
    return EXIT_OK


# ─────────────────────────────────────────────
# PARSER
# ─────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fillmass", description="Filling type, level, capacity and mass estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help=f"pipeline config (default: {Config.PIPELINE_CONFIG_PATH})")
    common.add_argument("--seed", type=int, default=None, help="overrides config seed")
    common.add_argument("--workers", type=int, default=None, help="sequence-level worker threads")

    p = sub.add_parser("synth-gen", parents=[common], help="generate a labelled synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", type=int, required=True)
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("extract-features", parents=[common], help="classical 136-d audio features per sequence")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frames-dir", default=None, help="also dump per-frame tables here")
    p.set_defaults(func=cmd_extract_features)

    model_flags = argparse.ArgumentParser(add_help=False)
    model_flags.add_argument("--n-trees", type=int, default=None, help="random-forest size")
    model_flags.add_argument("--tune-grid", type=int, nargs="+", default=None, metavar="N", help="tree counts to tune over")
    model_flags.add_argument("--hidden", type=int, default=None, help="GRU hidden size (both streams)")
    model_flags.add_argument("--layers", type=int, default=None, help="GRU layers (both streams)")
    model_flags.add_argument("--audio-layers", type=int, default=None, help="audio GRU layers; wins over --layers")
    model_flags.add_argument("--video-layers", type=int, default=None, help="video GRU layers; wins over --layers")
    model_flags.add_argument("--epochs", "--max-epochs", dest="max_epochs", type=int, default=None)
    model_flags.add_argument("--lr", type=float, default=None, help="GRU learning rate")
    model_flags.add_argument("--batch", type=int, default=None, help="GRU batch size")

    p = sub.add_parser("train", parents=[common, model_flags], help="train every enabled model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--val-manifest", default=None)
    p.add_argument("--models-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common, model_flags], help="write a submission CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--models-dir", default=None)
    p.add_argument("--train", default=None, metavar="TRAIN_MANIFEST", help="train in-process on this manifest first")
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None, help="metric report JSON when the manifest is labelled")
    p.add_argument("--prior-ml", type=float, default=None)
    p.add_argument("--consistency", action="store_true", help="box cannot hold water; empty forces level 0")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("capacity", parents=[common], help="container capacity only")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--manifest", default=None)
    source.add_argument("--masks", default=None, metavar="DIR", help="one sequence's cam<c>_frame<i>.pgm mask directory")
    p.add_argument("--calib", nargs=2, default=None, metavar=("C1", "C2"), help="calibration JSON per camera (with --masks)")
    p.add_argument("--frame-count", type=int, default=None, help="select frames as for a clip this long (with --masks)")
    p.add_argument("--sequence-id", default=None, help="row id (with --masks; default: directory name)")
    p.add_argument("--out", required=True)
    p.add_argument("--models-dir", default=None, help="take the capacity prior from a trained bundle")
    p.add_argument("--prior-ml", type=float, default=None)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("evaluate", help="score a submission against a labelled manifest")
    p.add_argument("--submission", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cross-validate", parents=[common, model_flags], help="per-type k-fold validation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--out", default=None, help="validation predictions as a submission CSV")
    p.add_argument("--consistency", action="store_true")
    p.set_defaults(func=cmd_cross_validate)

    return parser


def exit_code_for(error: Exception) -> int:
    if isinstance(error, EvaluationError):
        return EXIT_EVALUATION
    if isinstance(error, (MediaError, ConfigError, SplitError, DomainError)):
        return EXIT_INVALID_INPUT
    return EXIT_FAILURE


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FillMassError as e:
        logger.error("%s", e, extra={"details": e.details} if e.details else None)
        return exit_code_for(e)
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
