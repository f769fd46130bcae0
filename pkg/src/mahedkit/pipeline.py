"""Per-task orchestration.

Task 1: three voters, majority vote (priority breaks three-way ties), then
        a hope/not_applicable second opinion for ``not_applicable`` results.
Task 2: emotion and offensive always; hate only when offensive == yes.
Task 3: one detector (embedding+SVM, embedding+MLP, LLM, safety adapter).

A predictor is any callable ``record -> label`` (a ``ParsedLabel`` is also
accepted) with a ``name`` attribute. Errors never become labels: the record
is marked failed and keeps the provenance collected so far.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import UNDEFINED
from .corpus import EMOTION_LABELS, MEME_LABELS, TASK1_LABELS, Record
from .errors import MahedError
from .fusion import FusionMode, fuse, parse_mode
from .metrics import evaluate, score_task2

HOPE, HATE, NOT_APPLICABLE = TASK1_LABELS


@dataclass
class Prediction:
    record_id: str
    task: int
    labels: dict = field(default_factory=dict)
    provenance: list = field(default_factory=list)  # (stage, predictor, raw label)
    failed: bool = False
    error: str | None = None

    def to_json(self) -> dict:
        obj = {
            "id": self.record_id,
            "task": self.task,
            "labels": dict(self.labels),
            "provenance": [{"stage": s, "predictor": p, "label": l} for s, p, l in self.provenance],
            "status": "failed" if self.failed else "ok",
        }
        if self.error is not None:
            obj["error"] = self.error
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "Prediction":
        return cls(
            record_id=obj["id"], task=obj["task"], labels=obj.get("labels", {}),
            provenance=[(p["stage"], p["predictor"], p["label"]) for p in obj.get("provenance", [])],
            failed=obj.get("status") == "failed", error=obj.get("error"),
        )


def _name(predictor) -> str:
    return getattr(predictor, "name", None) or getattr(predictor, "__name__", None) or type(predictor).__name__


def _ask(predictor, record) -> str:
    out = predictor(record)
    return getattr(out, "label", out)


def _fail(pred: Prediction, stage: str, predictor, exc: Exception) -> Prediction:
    pred.failed = True
    pred.error = f"{stage}: {type(exc).__name__}: {exc}"
    pred.provenance.append((stage, _name(predictor), None))
    return pred


def majority_vote(votes: Sequence[str], priority: Sequence[int] = (0, 1, 2)) -> str:
    """Label with at least two of three votes; otherwise the first voter in
    ``priority`` (indices into ``votes``) decides."""
    if len(votes) != 3:
        raise ValueError(f"expected 3 votes, got {len(votes)}")
    if sorted(priority) != [0, 1, 2]:
        raise ValueError("priority must be a permutation of voter indices 0..2")
    for label in votes:
        if sum(v == label for v in votes) >= 2:
            return label
    return votes[priority[0]]


@dataclass
class EnsembleSpec:
    voters: Sequence[Callable]
    tie_break_priority: Sequence[int] = (0, 1, 2)
    rescue: Callable | None = None

    def __post_init__(self):
        if len(self.voters) != 3:
            raise ValueError("ensemble needs exactly 3 voters")
        if sorted(self.tie_break_priority) != [0, 1, 2]:
            raise ValueError("tie_break_priority must be a permutation of the voters")


def run_task1(record: Record, ensemble: EnsembleSpec) -> Prediction:
    pred = Prediction(record.id, 1)
    votes = []
    for k, voter in enumerate(ensemble.voters):
        stage = f"vote{k + 1}"
        try:
            label = _ask(voter, record)
        except MahedError as exc:
            return _fail(pred, stage, voter, exc)
        if label not in TASK1_LABELS:
            return _fail(pred, stage, voter, ValueError(f"label {label!r} outside task-1 labels"))
        pred.provenance.append((stage, _name(voter), label))
        votes.append(label)
    final = majority_vote(votes, ensemble.tie_break_priority)
    pred.provenance.append(("majority", "vote", final))
    if final == NOT_APPLICABLE and ensemble.rescue is not None:
        try:
            answer = _ask(ensemble.rescue, record)
        except MahedError as exc:
            return _fail(pred, "rescue", ensemble.rescue, exc)
        pred.provenance.append(("rescue", _name(ensemble.rescue), answer))
        if answer == HOPE:
            final = HOPE
    pred.labels = {"task1": final}
    return pred


def run_task2(record: Record, emotion_pred, offensive_pred, hate_pred) -> Prediction:
    pred = Prediction(record.id, 2)
    labels = {}
    try:
        stage, who = "emotion", emotion_pred
        labels["emotion"] = _ask(emotion_pred, record)
        if labels["emotion"] not in EMOTION_LABELS:
            raise MahedError(f"emotion {labels['emotion']!r} outside the canonical set")
        pred.provenance.append(("emotion", _name(emotion_pred), labels["emotion"]))
        stage, who = "offensive", offensive_pred
        labels["offensive"] = _ask(offensive_pred, record)
        if labels["offensive"] not in ("yes", "no"):
            raise MahedError(f"offensive label {labels['offensive']!r} is not yes/no")
        pred.provenance.append(("offensive", _name(offensive_pred), labels["offensive"]))
        if labels["offensive"] == "yes":
            stage, who = "hate", hate_pred
            labels["hate_text"] = _ask(hate_pred, record)
            if labels["hate_text"] not in ("hate", "not_hate"):
                raise MahedError(f"hate label {labels['hate_text']!r} is not hate/not_hate")
            pred.provenance.append(("hate", _name(hate_pred), labels["hate_text"]))
        else:
            labels["hate_text"] = UNDEFINED
    except MahedError as exc:
        pred.labels = labels
        return _fail(pred, stage, who, exc)
    pred.labels = labels
    return pred


def run_task3(record: Record, detector) -> Prediction:
    pred = Prediction(record.id, 3)
    try:
        label = _ask(detector, record)
    except MahedError as exc:
        return _fail(pred, "detect", detector, exc)
    if label not in MEME_LABELS:
        return _fail(pred, "detect", detector, ValueError(f"label {label!r} outside meme labels"))
    pred.provenance.append(("detect", _name(detector), label))
    pred.labels = {"meme_hate": label}
    return pred


# -- local detectors -----------------------------------------------------


class EmbeddingClassifier:
    """Embed a record, fuse its modalities, classify with an SVM-like model
    (anything with ``predict(vector)``)."""

    family = "embedding+svm"

    def __init__(self, embedder, model, mode=FusionMode.AVERAGE, name: str | None = None):
        self.embedder = embedder
        self.model = model
        self.mode = parse_mode(mode)
        self.name = name or f"{self.family}[{self.mode.value}]"

    def features(self, record: Record) -> np.ndarray:
        t = self.embedder.embed(record.text, "text", _leak_label(record)) if self.mode.needs_text else None
        v = self.embedder.embed(record.image_ref, "image", _leak_label(record)) if self.mode.needs_image else None
        return fuse(t, v, self.mode)

    def __call__(self, record: Record) -> str:
        return self.model.predict(self.features(record))


class MlpDetector:
    family = "embedding+mlp"

    def __init__(self, embedder, model, name: str | None = None):
        self.embedder = embedder
        self.model = model
        self.name = name or self.family

    def __call__(self, record: Record) -> str:
        img = self.embedder.embed(record.image_ref, "image", _leak_label(record))
        txt = self.embedder.embed(record.text, "text", _leak_label(record))
        return self.model.predict(img, txt)[0]


class SafetyDetector:
    family = "safety"

    def __init__(self, adapter):
        self.adapter = adapter
        self.name = f"safety[{adapter.name}]"

    def __call__(self, record: Record) -> str:
        return "hateful" if self.adapter.flag(record) == "flagged_hate" else "not_hateful"


def _leak_label(record: Record):
    """Gold label handed to the embedder; only a label-leak stub uses it."""
    g = record.gold
    return g.meme_hate or g.task1 or g.hate_text


def embed_features(embedder, records: Sequence[Record], mode) -> np.ndarray:
    mode = parse_mode(mode)
    clf = EmbeddingClassifier(embedder, None, mode)
    return np.vstack([clf.features(r) for r in records]) if records else np.empty((0, mode.output_dim))


def embed_pairs(embedder, records: Sequence[Record]) -> tuple[np.ndarray, np.ndarray]:
    img = np.vstack([embedder.embed(r.image_ref, "image", _leak_label(r)) for r in records])
    txt = np.vstack([embedder.embed(r.text, "text", _leak_label(r)) for r in records])
    return img, txt


# -- batch running and I/O -----------------------------------------------


def run_many(records: Sequence[Record], fn: Callable[[Record], Prediction], max_workers: int = 1) -> list:
    """Apply ``fn`` to each record (optionally concurrently); output sorted by id."""
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            preds = list(pool.map(fn, records))
    else:
        preds = [fn(r) for r in records]
    return sorted(preds, key=lambda p: p.record_id)


def dumps_predictions(predictions: Sequence[Prediction]) -> str:
    return "".join(
        json.dumps(p.to_json(), ensure_ascii=False, sort_keys=True) + "\n"
        for p in sorted(predictions, key=lambda p: p.record_id)
    )


def write_predictions(path, predictions: Sequence[Prediction]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(dumps_predictions(predictions), encoding="utf-8", newline="\n")


def read_predictions(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [Prediction.from_json(json.loads(line)) for line in fh if line.strip()]


def evaluate_predictions(predictions: Sequence[Prediction], records: Sequence[Record], task: int) -> dict:
    """Reports per sub-task. Failed predictions are excluded and counted."""
    by_id = {p.record_id: p for p in predictions}
    ok, failed = [], 0
    for rec in records:
        p = by_id.get(rec.id)
        if p is None:
            raise ValueError(f"no prediction for record {rec.id!r}")
        if p.failed:
            failed += 1
        else:
            ok.append((rec, p))
    if task == 1:
        reports = {"task1": evaluate([r.gold.task1 for r, _ in ok], [p.labels["task1"] for _, p in ok], TASK1_LABELS)}
    elif task == 2:
        reports = score_task2([p.labels for _, p in ok], [r.gold.as_dict() for r, _ in ok])
    elif task == 3:
        reports = {"meme_hate": evaluate([r.gold.meme_hate for r, _ in ok],
                                         [p.labels["meme_hate"] for _, p in ok], MEME_LABELS)}
    else:
        raise ValueError(f"unknown task {task!r}")
    for rep in reports.values():
        rep.failed_count = failed
    return reports
