"""Binary-classification evaluation over scored items.

Confusion tallies, precision/recall/F1/accuracy, threshold tables, and
PR curves sampled at every distinct score plus both endpoints. The
prediction rule is score >= cutoff (closed boundary), matching the
classifier and document-triage modules. Zero-denominator conventions
are pinned: precision, recall and F1 are 0.0 when their denominators
vanish, so every metric is a total function.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigError, MissingLabelError, UndefinedRecallError, ValidationError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for field in ("tp", "fp", "fn", "tn"):
            if getattr(self, field) < 0:
                raise ValidationError(f"confusion count {field} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsRow:
    cutoff: float
    precision: float
    recall: float
    f1: float
    accuracy: float

    def to_json_object(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
        }


@dataclass(frozen=True)
class PRPoint:
    cutoff: float
    precision: float
    recall: float

    def to_json_object(self) -> dict:
        return {"cutoff": self.cutoff, "precision": self.precision, "recall": self.recall}


def _check_cutoff(cutoff: float) -> None:
    if not 0.0 <= cutoff <= 1.0:
        raise ConfigError(f"cutoff must be in [0, 1], got {cutoff}")


def confusion_at(
    scores: Mapping[str, float], truth: Mapping[str, int], cutoff: float
) -> ConfusionMatrix:
    """Tally predictions (score >= cutoff) against 0/1 truth labels.

    Every scored id must carry a truth label; extra truth entries are
    ignored. Empty inputs produce the all-zero matrix.
    """
    _check_cutoff(cutoff)
    tp = fp = fn = tn = 0
    for item_id, score in scores.items():
        if item_id not in truth:
            raise MissingLabelError(f"scored id {item_id!r} has no truth label")
        label = truth[item_id]
        if label not in (0, 1):
            raise ValidationError(f"truth label for {item_id!r} must be 0 or 1, got {label!r}")
        predicted = score >= cutoff
        if predicted and label == 1:
            tp += 1
        elif predicted:
            fp += 1
        elif label == 1:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def metrics_from(cm: ConfusionMatrix, cutoff: float) -> MetricsRow:
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = (cm.tp + cm.tn) / cm.total if cm.total else 0.0
    return MetricsRow(cutoff=cutoff, precision=precision, recall=recall, f1=f1, accuracy=accuracy)


def f1_from(precision: float, recall: float) -> float:
    """Harmonic mean with the same zero convention as metrics_from."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def threshold_table(
    scores: Mapping[str, float], truth: Mapping[str, int], cutoffs: Sequence[float]
) -> list[MetricsRow]:
    """One MetricsRow per cutoff, in the given order."""
    if not cutoffs:
        raise ConfigError("cutoffs must be nonempty")
    for cutoff in cutoffs:
        _check_cutoff(cutoff)
    return [metrics_from(confusion_at(scores, truth, cutoff), cutoff) for cutoff in cutoffs]


def pr_curve(scores: Mapping[str, float], truth: Mapping[str, int]) -> list[PRPoint]:
    """Precision/recall at every distinct score plus the 0 and 1 endpoints.

    Requires at least one positive among the scored ids, otherwise
    recall is undefined everywhere.
    """
    positives = 0
    for item_id in scores:
        if item_id not in truth:
            raise MissingLabelError(f"scored id {item_id!r} has no truth label")
        if truth[item_id] == 1:
            positives += 1
    if positives == 0:
        raise UndefinedRecallError("PR curve needs at least one positive truth label")
    cutoffs = sorted(set(scores.values()) | {0.0, 1.0})
    points = []
    for cutoff in cutoffs:
        row = metrics_from(confusion_at(scores, truth, cutoff), cutoff)
        points.append(PRPoint(cutoff=cutoff, precision=row.precision, recall=row.recall))
    return points


def report_json_object(
    rows: Sequence[MetricsRow],
    curve: Sequence[PRPoint],
    dataset: str = "",
    n: int = 0,
    positives: int = 0,
) -> dict:
    return {
        "dataset": dataset,
        "n": n,
        "positives": positives,
        "table": [row.to_json_object() for row in rows],
        "pr_curve": [point.to_json_object() for point in curve],
    }


def emit_report(
    rows: Sequence[MetricsRow],
    curve: Sequence[PRPoint],
    format: str,
    dataset: str = "",
    n: int = 0,
    positives: int = 0,
    path: str | Path | None = None,
) -> str:
    """Serialize an evaluation report deterministically.

    json: the full report object. csv: the threshold table only, header
    cutoff,precision,recall,f1,accuracy, every value 6-decimal fixed.
    """
    if format == "json":
        text = json.dumps(report_json_object(rows, curve, dataset, n, positives), indent=2) + "\n"
    elif format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cutoff", "precision", "recall", "f1", "accuracy"])
        for row in rows:
            writer.writerow(
                [f"{value:.6f}" for value in
                 (row.cutoff, row.precision, row.recall, row.f1, row.accuracy)]
            )
        text = buf.getvalue()
    else:
        raise ConfigError(f"report format must be 'json' or 'csv', got {format!r}")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
