"""Dataset records, line-delimited JSON I/O, and minority oversampling.

One record per line::

    {"id": "t1-0001", "text": "...", "image": null,
     "labels": {"task1": "hope", "emotion": null, "offensive": null,
                "hate_text": null, "meme_hate": null}}

Splits are immutable; every transformation returns a new split.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import DatasetParseError, ValidationError

TASK1_LABELS = ("hope", "hate", "not_applicable")
EMOTION_LABELS = (
    "neutral", "anger", "anticipation", "disgust", "fear", "joy",
    "love", "optimism", "pessimism", "sadness", "surprise", "trust",
)
# the emotion prompt lists "confidence" where the dataset lists "trust"
EMOTION_ALIASES = {"confidence": "trust"}
OFFENSIVE_LABELS = ("yes", "no")
HATE_TEXT_LABELS = ("hate", "not_hate")
MEME_LABELS = ("hateful", "not_hateful")

LABEL_SETS = {
    "task1": TASK1_LABELS,
    "emotion": EMOTION_LABELS,
    "offensive": OFFENSIVE_LABELS,
    "hate_text": HATE_TEXT_LABELS,
    "meme_hate": MEME_LABELS,
}
LABEL_FIELDS = tuple(LABEL_SETS)

TASK_FIELDS = {
    1: ("task1",),
    2: ("emotion", "offensive", "hate_text"),
    3: ("meme_hate",),
}

SPLIT_NAMES = ("train", "validation", "test")
MISSING = "<missing>"


@dataclass(frozen=True)
class GoldLabels:
    task1: str | None = None
    emotion: str | None = None
    offensive: str | None = None
    hate_text: str | None = None
    meme_hate: str | None = None

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in LABEL_FIELDS}


@dataclass(frozen=True)
class Record:
    id: str
    text: str
    image_ref: str | None = None
    gold: GoldLabels = field(default_factory=GoldLabels)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "image": self.image_ref,
            "labels": self.gold.as_dict(),
        }


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    records: tuple[Record, ...]
    task: int | None = None

    def __post_init__(self):
        if self.name not in SPLIT_NAMES:
            raise ValidationError(f"unknown split name {self.name!r}")
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def by_id(self) -> dict[str, Record]:
        return {r.id: r for r in self.records}


LabelSelector = Union[str, Callable[[Record], "str | None"]]


def _selector(label_selector: LabelSelector) -> Callable[[Record], "str | None"]:
    if callable(label_selector):
        return label_selector
    if label_selector not in LABEL_FIELDS:
        raise ValueError(f"unknown label field {label_selector!r}")
    return lambda rec: getattr(rec.gold, label_selector)


def normalize_label(field_name: str, value):
    if value is None:
        return None
    if not isinstance(value, str):
        raise ValidationError(f"label {field_name} must be a string, got {value!r}")
    if field_name == "emotion":
        value = EMOTION_ALIASES.get(value, value)
    if value not in LABEL_SETS[field_name]:
        raise ValidationError(
            f"label {value!r} is not a valid {field_name} label "
            f"(expected one of {', '.join(LABEL_SETS[field_name])})"
        )
    return value


def validate_record(record: Record, task: int) -> None:
    """Raise :class:`ValidationError` if ``record`` breaks a task invariant."""
    if task not in TASK_FIELDS:
        raise ValueError(f"unknown task {task!r}")
    rid = record.id
    if not isinstance(rid, str) or not rid:
        raise ValidationError("record id must be a non-empty string", record_id=rid)
    if not isinstance(record.text, str):
        raise ValidationError("text must be a string", record_id=rid)
    if not record.text and not record.image_ref:
        raise ValidationError("empty text requires an image", record_id=rid)
    if task == 3 and not record.image_ref:
        raise ValidationError("meme records require an image reference", record_id=rid)

    gold = record.gold
    for name in LABEL_FIELDS:
        value = getattr(gold, name)
        if value is not None and value not in LABEL_SETS[name]:
            raise ValidationError(f"label {value!r} is not a valid {name} label", record_id=rid)
    own = TASK_FIELDS[task]
    for name in LABEL_FIELDS:
        if name not in own and getattr(gold, name) is not None:
            raise ValidationError(f"task {task} record carries foreign label {name}", record_id=rid)
    required = {1: ("task1",), 2: ("emotion", "offensive"), 3: ("meme_hate",)}[task]
    for name in required:
        if getattr(gold, name) is None:
            raise ValidationError(f"missing required label {name}", record_id=rid)
    if gold.hate_text is not None and gold.offensive != "yes":
        raise ValidationError(
            f"hate_text={gold.hate_text!r} requires offensive='yes', got {gold.offensive!r}",
            record_id=rid,
        )


def parse_record(obj: Mapping, line_number: int | None = None) -> Record:
    if not isinstance(obj, Mapping):
        raise DatasetParseError("record must be a JSON object", line_number)
    unknown = set(obj) - {"id", "text", "image", "labels"}
    if unknown:
        raise ValidationError(f"unknown record keys {sorted(unknown)}", obj.get("id"), line_number)
    labels = obj.get("labels") or {}
    if not isinstance(labels, Mapping):
        raise ValidationError("labels must be an object", obj.get("id"), line_number)
    bad = set(labels) - set(LABEL_FIELDS)
    if bad:
        raise ValidationError(f"unknown label keys {sorted(bad)}", obj.get("id"), line_number)
    try:
        gold = GoldLabels(**{k: normalize_label(k, labels.get(k)) for k in LABEL_FIELDS})
    except ValidationError as exc:
        raise ValidationError(str(exc), obj.get("id"), line_number) from None
    image = obj.get("image")
    if image is not None and not isinstance(image, str):
        raise ValidationError("image must be a string or null", obj.get("id"), line_number)
    return Record(id=obj.get("id"), text=obj.get("text", ""), image_ref=image, gold=gold)


def _infer_split_name(path: Path) -> str:
    stem = path.stem.lower()
    for name, keys in (("validation", ("val", "dev")), ("test", ("test",)), ("train", ("train",))):
        if name in stem or any(k in stem for k in keys):
            return name
    return "train"


def load_dataset(path, task: int, name: str | None = None) -> DatasetSplit:
    """Load and validate a line-delimited dataset file for ``task``.

    Image references that are relative paths are resolved against the
    dataset file's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetParseError("dataset file not found", path=path)
    records = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(f"malformed JSON ({exc.msg})", line_number, path) from None
            rec = parse_record(obj, line_number)
            if rec.image_ref and not _is_uri(rec.image_ref) and not Path(rec.image_ref).is_absolute():
                rec = replace(rec, image_ref=str(path.parent / rec.image_ref))
            try:
                validate_record(rec, task)
            except ValidationError as exc:
                raise ValidationError(str(exc), line_number=line_number) from None
            if rec.id in seen:
                raise ValidationError(
                    f"duplicate id (first seen on line {seen[rec.id]})", rec.id, line_number
                )
            seen[rec.id] = line_number
            records.append(rec)
    return DatasetSplit(name or _infer_split_name(path), tuple(records), task)


def _is_uri(ref: str) -> bool:
    return "://" in ref


def dumps_record(record: Record) -> str:
    return json.dumps(record.to_json(), ensure_ascii=False, sort_keys=True)


def save_dataset(split: DatasetSplit | Iterable[Record], path, relative_to=None) -> None:
    """Write records one per line (UTF-8, sorted keys).

    If ``relative_to`` is given, image paths under it are written relative
    to it, so fixture directories stay relocatable.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in split:
            if relative_to is not None and rec.image_ref and not _is_uri(rec.image_ref):
                try:
                    rel = Path(rec.image_ref).resolve().relative_to(Path(relative_to).resolve())
                    rec = replace(rec, image_ref=rel.as_posix())
                except ValueError:
                    pass
            fh.write(dumps_record(rec) + "\n")


def check_disjoint(*splits: DatasetSplit) -> None:
    owner: dict[str, str] = {}
    for split in splits:
        for rid in split.ids():
            if rid in owner and owner[rid] != split.name:
                raise ValidationError(f"id appears in both {owner[rid]} and {split.name}", rid)
            owner[rid] = split.name


def class_histogram(split: DatasetSplit | Iterable[Record], label_selector: LabelSelector) -> dict:
    """Count records per label; records lacking the label count under ``MISSING``."""
    select = _selector(label_selector)
    counts = Counter()
    for rec in split:
        label = select(rec)
        counts[MISSING if label is None else label] += 1
    return dict(counts)


def oversample_minority(
    split: DatasetSplit,
    label_selector: LabelSelector,
    minority_class: str,
    factor: int,
    seed: int,
) -> DatasetSplit:
    """Repeat every ``minority_class`` record ``factor`` times, then shuffle.

    Copies keep the original record and get ids suffixed ``#1``..``#factor-1``.
    """
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    select = _selector(label_selector)
    out: list[Record] = []
    n_minority = 0
    for rec in split.records:
        out.append(rec)
        if select(rec) == minority_class:
            n_minority += 1
            out.extend(replace(rec, id=f"{rec.id}#{k}") for k in range(1, factor))
    if n_minority == 0:
        raise ValidationError(f"minority class {minority_class!r} does not occur; nothing to oversample")
    order = np.random.default_rng(seed).permutation(len(out))
    return DatasetSplit(split.name, tuple(out[i] for i in order), split.task)


def base_id(record_id: str) -> str:
    """Strip an oversampling suffix."""
    return record_id.split("#", 1)[0]


def labels_of(records: Sequence[Record], label_selector: LabelSelector) -> list:
    select = _selector(label_selector)
    return [select(r) for r in records]
