"""
Scoring of predictions against ground truth.

    filling type / level : support-weighted F1
    capacity / mass      : 1 − |pred − true| / true, clamped at 0, averaged over
                           sequences; a true value of 0 scores 1 when |pred| ≤ 1

The relative-error formula lives in relative_score() only, so an official
scoring rule can replace it in one place. overall_score() aggregates the
sub-task scores with a pluggable function (minimum by default, so the weakest
sub-task dominates).
"""

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import pandas as pd

from src.core.config import Config
from src.models.labels import FillingLevel, FillingType
from src.models.manifest import DatasetManifest
from src.utils.exceptions import DomainError, EvaluationError

ZERO_TOLERANCE = 1.0


def weighted_f1(predictions: Sequence[int], ground_truth: Sequence[int], n_classes: int) -> float:
    """
    Per-class F1 (0 when P + R = 0) averaged with true-class support as weights.

    Raises:
        DomainError: Empty or unequal-length lists, labels outside [0, n_classes)
    """
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(ground_truth, dtype=np.int64)
    if pred.size == 0 or pred.shape != true.shape:
        raise DomainError(component="fusion.metrics", message="Need equal-length, non-empty label lists")
    if min(pred.min(), true.min()) < 0 or max(pred.max(), true.max()) >= n_classes:
        raise DomainError(component="fusion.metrics", message=f"Labels must lie in [0, {n_classes})")

    confusion = np.zeros((n_classes, n_classes))
    np.add.at(confusion, (true, pred), 1)
    tp = np.diag(confusion)
    predicted = confusion.sum(axis=0)
    support = confusion.sum(axis=1)

    precision = np.divide(tp, predicted, out=np.zeros(n_classes), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros(n_classes), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(n_classes), where=denom > 0)
    return float((f1 * support).sum() / support.sum())


def relative_score(pred: float, true: float) -> float:
    if true < 0:
        raise DomainError(component="fusion.metrics", message=f"True value must be ≥ 0, got {true}")
    if true == 0:
        return 1.0 if abs(pred) <= ZERO_TOLERANCE else 0.0
    return max(0.0, 1.0 - abs(pred - true) / true)


def capacity_score(pred_ml: float, true_ml: float) -> float:
    return relative_score(pred_ml, true_ml)


def mass_score(pred_g: float, true_g: float) -> float:
    return relative_score(pred_g, true_g)


def mean_score(scorer: Callable[[float, float], float], preds: Sequence[float], trues: Sequence[float]) -> float:
    if len(preds) == 0 or len(preds) != len(trues):
        raise DomainError(component="fusion.metrics", message="Need equal-length, non-empty value lists")
    return float(np.mean([scorer(p, t) for p, t in zip(preds, trues)]))


@dataclass
class MetricReport:
    """
    Scores of one submission, all in [0, 1].

    per_model_f1 optionally holds {model name: {task: F1}} from cross-validation.
    """

    filling_level_f1: float
    filling_type_f1: float
    capacity_score: float
    mass_score: float
    n_sequences: int
    rows: list[dict[str, Any]] = field(default_factory=list)
    per_model_f1: dict[str, dict[str, float]] = field(default_factory=dict)
    schema_version: int = Config.REPORT_SCHEMA_VERSION

    @property
    def overall(self) -> float:
        return overall_score(self)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["overall"] = self.overall
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        """Scores ×100, one row per sub-task, plus the per-model F1 table when present."""
        summary = pd.DataFrame(
            {
                "score": [
                    self.filling_level_f1,
                    self.filling_type_f1,
                    self.capacity_score,
                    self.mass_score,
                    self.overall,
                ]
            },
            index=["filling level (F1)", "filling type (F1)", "capacity", "mass", "overall"],
        )
        text = (summary * 100).to_string(float_format=lambda v: f"{v:.2f}")
        if self.per_model_f1:
            per_model = pd.DataFrame(self.per_model_f1).T * 100
            text += "\n\nvalidation F1 per model\n" + per_model.to_string(float_format=lambda v: f"{v:.2f}", na_rep="-")
        return text


def overall_score(report: MetricReport, aggregate: Callable[[Sequence[float]], float] = min) -> float:
    return float(aggregate([report.filling_level_f1, report.filling_type_f1, report.capacity_score, report.mass_score]))


def evaluate_submission(submission: pd.DataFrame, manifest: DatasetManifest) -> MetricReport:
    """
    Score a submission table against the labelled manifest.

    Rows are matched by sequence_id, so row order does not matter; ids not in
    the manifest are ignored.

    Raises:
        EvaluationError: Missing columns, unlabelled manifest, sequences absent
            from the submission or unreadable predicted labels
    """
    missing_columns = [c for c in Config.SUBMISSION_COLUMNS if c not in submission.columns]
    if missing_columns:
        raise EvaluationError(component="fusion.metrics", message=f"Submission lacks column(s): {', '.join(missing_columns)}")
    if not manifest.has_labels():
        raise EvaluationError(component="fusion.metrics", message="Manifest has unlabelled records; nothing to score against")

    table = submission.assign(sequence_id=submission["sequence_id"].astype(str)).set_index("sequence_id")
    duplicated = sorted(set(table.index[table.index.duplicated()]))
    if duplicated:
        raise EvaluationError(
            component="fusion.metrics",
            message=f"Submission repeats {len(duplicated)} sequence id(s)",
            details={"duplicated": duplicated},
        )
    records = sorted(manifest.records, key=lambda r: r.sequence_id)
    missing = [r.sequence_id for r in records if r.sequence_id not in table.index]
    if missing:
        raise EvaluationError(
            component="fusion.metrics",
            message=f"{len(missing)} sequence(s) missing from submission",
            details={"missing": missing},
        )

    rows: list[dict[str, Any]] = []
    for record in records:
        row = table.loc[record.sequence_id]
        try:
            pred_type = FillingType.from_label(str(row["filling_type"]))
            pred_level = FillingLevel.from_percent(float(row["filling_level_percent"]))
        except DomainError as e:
            raise EvaluationError(component="fusion.metrics", message=f"{record.sequence_id}: {e.message}") from e
        labels = record.labels
        rows.append(
            {
                "sequence_id": record.sequence_id,
                "pred_type": int(pred_type),
                "true_type": int(FillingType.from_label(labels.filling_type)),
                "pred_level": int(pred_level),
                "true_level": int(FillingLevel.from_percent(labels.filling_level)),
                "pred_capacity_ml": float(row["container_capacity_ml"]),
                "true_capacity_ml": labels.capacity_ml,
                "pred_mass_g": float(row["filling_mass_g"]),
                "true_mass_g": labels.mass_g,
            }
        )

    def column(name: str) -> list:
        return [r[name] for r in rows]

    return MetricReport(
        filling_level_f1=weighted_f1(column("pred_level"), column("true_level"), len(FillingLevel)),
        filling_type_f1=weighted_f1(column("pred_type"), column("true_type"), len(FillingType)),
        capacity_score=mean_score(capacity_score, column("pred_capacity_ml"), column("true_capacity_ml")),
        mass_score=mean_score(mass_score, column("pred_mass_g"), column("true_mass_g")),
        n_sequences=len(rows),
        rows=rows,
    )

