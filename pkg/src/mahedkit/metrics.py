"""Confusion matrices and macro-averaged precision / recall / F1 / F2.

Rows of a confusion matrix are gold labels, columns predictions. Any 0/0
rate is reported as 0. Macro values are unweighted means over the class
list, including classes absent from both gold and predictions.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import UNDEFINED
from .corpus import EMOTION_LABELS, HATE_TEXT_LABELS, OFFENSIVE_LABELS


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["gold\\pred", *self.classes])
        for c, row in zip(self.classes, self.counts):
            writer.writerow([c, *[int(v) for v in row]])
        return buf.getvalue()


def confusion(gold: Sequence, pred: Sequence, classes: Sequence) -> ConfusionMatrix:
    if len(gold) != len(pred):
        raise ValueError(f"gold has {len(gold)} labels, predictions {len(pred)}")
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for g, p in zip(gold, pred):
        try:
            counts[index[g], index[p]] += 1
        except KeyError as exc:
            raise ValueError(f"label {exc.args[0]!r} is not in the class list {classes}") from None
    return ConfusionMatrix(classes, counts)


def _div(a, b):
    return a / b if b else 0.0


def f_beta(precision: float, recall: float, beta: float) -> float:
    b2 = beta * beta
    return _div((1 + b2) * precision * recall, b2 * precision + recall)


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float
    f2: float
    support: int


@dataclass
class EvaluationReport:
    classes: tuple
    per_class: dict
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    macro_f2: float
    n_scored: int
    excluded_count: int = 0
    failed_count: int = 0
    empty: bool = False
    confusion: ConfusionMatrix | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {
            "classes": list(self.classes),
            "per_class": {c: asdict(s) for c, s in self.per_class.items()},
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "macro_f2": self.macro_f2,
            "n_scored": self.n_scored,
            "excluded_count": self.excluded_count,
            "failed_count": self.failed_count,
            "empty": self.empty,
        }
        if self.confusion is not None:
            d["confusion"] = self.confusion.counts.tolist()
        return d


def macro_report(cm: ConfusionMatrix) -> EvaluationReport:
    counts = cm.counts
    per_class = {}
    tp = np.diag(counts)
    pred_tot = counts.sum(0)
    gold_tot = counts.sum(1)
    for k, c in enumerate(cm.classes):
        p = _div(float(tp[k]), float(pred_tot[k]))
        r = _div(float(tp[k]), float(gold_tot[k]))
        per_class[c] = ClassScores(p, r, f_beta(p, r, 1.0), f_beta(p, r, 2.0), int(gold_tot[k]))
    k = len(cm.classes)

    def mean(attr):
        return sum(getattr(s, attr) for s in per_class.values()) / k if k else 0.0

    total = cm.total
    return EvaluationReport(
        classes=cm.classes,
        per_class=per_class,
        accuracy=_div(float(np.trace(counts)), float(total)),
        macro_precision=mean("precision"),
        macro_recall=mean("recall"),
        macro_f1=mean("f1"),
        macro_f2=mean("f2"),
        n_scored=total,
        empty=total == 0,
        confusion=cm,
    )


def evaluate(gold: Sequence, pred: Sequence, classes: Sequence, failed_count: int = 0) -> EvaluationReport:
    report = macro_report(confusion(gold, pred, classes))
    report.failed_count = failed_count
    return report


def score_task2(predictions: Sequence[dict], gold: Sequence[dict]) -> dict:
    """Score the emotion / offensive / hate sub-tasks.

    ``predictions`` and ``gold`` are aligned label maps with keys
    ``emotion``, ``offensive``, ``hate_text``. The hate sub-task only counts
    records predicted offensive whose gold hate label exists; the rest are
    reported in ``excluded_count``.
    """
    if len(predictions) != len(gold):
        raise ValueError("predictions and gold differ in length")
    emo = evaluate([g["emotion"] for g in gold], [p["emotion"] for p in predictions], EMOTION_LABELS)
    off = evaluate([g["offensive"] for g in gold], [p["offensive"] for p in predictions], OFFENSIVE_LABELS)
    hg, hp = [], []
    for p, g in zip(predictions, gold):
        if p["offensive"] == "yes" and g.get("hate_text") is not None and p.get("hate_text") not in (None, UNDEFINED):
            hg.append(g["hate_text"])
            hp.append(p["hate_text"])
    hate = evaluate(hg, hp, HATE_TEXT_LABELS)
    hate.excluded_count = len(gold) - len(hg)
    return {"emotion": emo, "offensive": off, "hate_text": hate}


def mean_over_subtasks(reports: dict) -> dict:
    """Unweighted mean of each headline metric over non-empty sub-task reports."""
    live = [r for r in reports.values() if not r.empty]
    keys = ("accuracy", "macro_precision", "macro_recall", "macro_f1", "macro_f2")
    return {k: (sum(getattr(r, k) for r in live) / len(live) if live else 0.0) for k in keys}


def format_table(reports: dict, digits: int = 2) -> str:
    """Aligned human-readable table, percentages; empty reports show ``-``."""
    header = ["", "Accuracy %", "Macro P %", "Macro R %", "Macro F1 %", "Macro F2 %", "n", "excluded", "failed"]
    rows = [header]
    for name, r in reports.items():
        if r.empty:
            cells = ["-"] * 5
        else:
            cells = [f"{100 * v:.{digits}f}" for v in
                     (r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1, r.macro_f2)]
        rows.append([name, *cells, str(r.n_scored), str(r.excluded_count), str(r.failed_count)])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for n, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))))
        if n == 0:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def reports_to_json(reports: dict) -> str:
    return json.dumps({k: v.to_dict() for k, v in reports.items()}, indent=1, sort_keys=True) + "\n"
