"""Deterministic synthetic fixtures standing in for the challenge data.

``write_fixture_set(out_dir, seed)`` produces::

    task1/{train,validation,test}.jsonl
    task2/{train,validation,test}.jsonl
    task3/{train,validation,test}.jsonl   + task3/images/*.ppm
    replay/<predictor>.jsonl              canned LLM / safety responses
    ensemble.json                         task-1 ensemble wired to replay files

Texts are random strings of Arabic words. Replay responses agree with the
gold label most of the time and are phrased in the different styles the
parser has to handle.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .corpus import (EMOTION_LABELS, MEME_LABELS, TASK1_LABELS, DatasetSplit, GoldLabels, Record,
                     save_dataset)

VOCAB = (
    "الأمل", "المستقبل", "نحن", "معا", "سلام", "غدا", "أفضل", "الناس", "هذا", "كلام", "لا",
    "نعم", "الحب", "الوطن", "يا", "جميل", "سيء", "كره", "خير", "الحياة", "صبر", "قلب",
    "الله", "فرح", "حزن", "غضب", "خوف", "ثقة", "تفاؤل", "اليوم", "مدينة", "عمل", "شعب",
)

SPLIT_SIZES = {
    1: {"train": 240, "validation": 60, "test": 90},
    2: {"train": 240, "validation": 60, "test": 90},
    3: {"train": 200, "validation": 60, "test": 100},
}

TASK1_PRIORS = {"hope": 0.3, "hate": 0.25, "not_applicable": 0.45}
MEME_HATEFUL_RATE = 0.1
OFFENSIVE_RATE = 0.35
HATE_GIVEN_OFFENSIVE = 0.2
# stub-embedding class offset used with these fixtures
LABEL_LEAK = 0.25


def _text(rng, tag: str) -> str:
    words = rng.choice(VOCAB, size=int(rng.integers(5, 12)))
    return " ".join(words) + f" {tag}"


def make_task1(n: int, rng, prefix: str) -> list[Record]:
    labels = rng.choice(list(TASK1_PRIORS), size=n, p=list(TASK1_PRIORS.values()))
    return [Record(f"{prefix}-{i:04d}", _text(rng, f"#{prefix}{i}"), None, GoldLabels(task1=str(lab)))
            for i, lab in enumerate(labels)]


def make_task2(n: int, rng, prefix: str) -> list[Record]:
    out = []
    for i in range(n):
        emotion = str(rng.choice(EMOTION_LABELS))
        offensive = "yes" if rng.random() < OFFENSIVE_RATE else "no"
        hate = None
        if offensive == "yes":
            hate = "hate" if rng.random() < HATE_GIVEN_OFFENSIVE else "not_hate"
        out.append(Record(f"{prefix}-{i:04d}", _text(rng, f"#{prefix}{i}"), None,
                          GoldLabels(emotion=emotion, offensive=offensive, hate_text=hate)))
    return out


def _write_ppm(path: Path, rng, size: int = 8) -> None:
    pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    path.write_bytes(f"P6 {size} {size} 255\n".encode("ascii") + pixels.tobytes())


def make_task3(n: int, rng, prefix: str, image_dir: Path) -> list[Record]:
    image_dir.mkdir(parents=True, exist_ok=True)
    out = []
    n_hate = max(1, int(round(n * MEME_HATEFUL_RATE)))
    labels = ["hateful"] * n_hate + ["not_hateful"] * (n - n_hate)
    labels = [labels[k] for k in rng.permutation(n)]
    for i, lab in enumerate(labels):
        rid = f"{prefix}-{i:04d}"
        img = image_dir / f"{rid}.ppm"
        _write_ppm(img, rng)
        out.append(Record(rid, _text(rng, f"#{prefix}{i}"), str(img), GoldLabels(meme_hate=lab)))
    return out


# -- canned responses --------------------------------------------------------

_STYLES = {
    "plain": lambda s: s,
    "title": lambda s: s.capitalize(),
    "period": lambda s: f"{s}.",
    "quoted": lambda s: f"'{s}'",
    "bold": lambda s: f"**{s}**",
    "sentence": lambda s: f"The text is best described as: {s}",
    "answer": lambda s: f"Answer: {s}",
}

_MEME_SURFACE = {"hateful": ("hate", "Hate"), "not_hateful": ("no hate", "No_hate", "no_hate")}


def _flip(rng, gold, choices, accuracy):
    if rng.random() < accuracy:
        return gold
    others = [c for c in choices if c != gold]
    return str(rng.choice(others))


def _styled(rng, label: str) -> str:
    style = list(_STYLES)[int(rng.integers(len(_STYLES)))]
    return _STYLES[style](label)


def _meme_response(rng, template: str, label: str) -> str:
    word = str(rng.choice(_MEME_SURFACE[label]))
    if template == "meme_prompt3":
        return word if rng.random() < 0.6 else f"{word}."
    reasoning = ("Meme Description (Visuals): a person with a caption.\n"
                 "Meme Text (Arabic & English): ...\n"
                 "Analysis: the visuals and text were weighed together.")
    if template == "meme_prompt1":
        return f"{reasoning}\nFinal Answer: {{{word}}}"
    return f"Analysis: {{the meme was reviewed}}\nFinal Answer: {{'{word}'}}"


def _safety_response(rng, flagged_hate: bool, guard_style: bool) -> str:
    if guard_style:
        if flagged_hate:
            return "unsafe\nS10"
        return "unsafe\nS1" if rng.random() < 0.1 else "safe"
    other = bool(rng.random() < 0.1)
    return json.dumps({"flagged": flagged_hate or other,
                       "categories": {"hate": flagged_hate, "violence": other}}, sort_keys=True)


def _write_jsonl(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def write_fixture_set(out_dir, seed: int = 0) -> dict:
    """Write the full fixture set; returns ``{task: {split: DatasetSplit}}``."""
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    data: dict = {1: {}, 2: {}, 3: {}}
    for split, n in SPLIT_SIZES[1].items():
        data[1][split] = DatasetSplit(split, make_task1(n, rng, f"t1{split[:2]}"), 1)
    for split, n in SPLIT_SIZES[2].items():
        data[2][split] = DatasetSplit(split, make_task2(n, rng, f"t2{split[:2]}"), 2)
    for split, n in SPLIT_SIZES[3].items():
        data[3][split] = DatasetSplit(split, make_task3(n, rng, f"t3{split[:2]}", out / "task3" / "images"), 3)
    for task, splits in data.items():
        for split, ds in splits.items():
            save_dataset(ds, out / f"task{task}" / f"{split}.jsonl", relative_to=out / f"task{task}")

    replay = out / "replay"
    rows: dict[str, list] = {}
    eval_splits = ("validation", "test")
    for split in eval_splits:
        for rec in data[1][split]:
            g = rec.gold.task1
            for name, acc in (("task1_llm1", 0.72), ("task1_llm2", 0.7)):
                lab = _flip(rng, g, TASK1_LABELS, acc)
                rows.setdefault(name, []).append(("task1_3class", rec.id, _styled(rng, lab)))
            hope_ans = "hope" if (g == "hope" and rng.random() < 0.8) or (g != "hope" and rng.random() < 0.1) \
                else "not_applicable"
            rows.setdefault("task1_rescue", []).append(("hope_or_not", rec.id, _styled(rng, hope_ans)))
        for rec in data[2][split]:
            g = rec.gold
            emo = _flip(rng, g.emotion, EMOTION_LABELS, 0.6)
            if emo == "trust" and rng.random() < 0.5:
                emo = "confidence"
            rows.setdefault("task2_emotion", []).append(("emotion_12", rec.id, _styled(rng, emo)))
            off = _flip(rng, g.offensive, ("yes", "no"), 0.85)
            rows.setdefault("task2_offensive", []).append(("offensive_yes_no", rec.id, _styled(rng, off)))
            if off == "yes":
                gold_hate = g.hate_text or "not_hate"
                hate = _flip(rng, gold_hate, ("hate", "not_hate"), 0.65)
                rows.setdefault("task2_hate", []).append(("hate_not_hate", rec.id, _styled(rng, hate)))
        for rec in data[3][split]:
            g = rec.gold.meme_hate
            for tpl, acc in (("meme_prompt1", 0.75), ("meme_prompt2", 0.79), ("meme_prompt3", 0.82)):
                lab = _flip(rng, g, MEME_LABELS, acc)
                rows.setdefault(f"task3_{tpl}", []).append((tpl, rec.id, _meme_response(rng, tpl, lab)))
            hit = g == "hateful" and rng.random() < 0.5
            rows.setdefault("task3_llamaguard", []).append(("safety", rec.id, _safety_response(rng, hit, True)))
            hit = g == "hateful" and rng.random() < 0.2
            rows.setdefault("task3_moderation", []).append(("safety", rec.id, _safety_response(rng, hit, False)))
    for name, items in rows.items():
        _write_jsonl(replay / f"{name}.jsonl",
                     ({"template": t, "record_id": r, "response": resp} for t, r, resp in items))

    ensemble = {
        "voters": [
            {"name": "llm1", "kind": "replay", "model_name": "llm1-finetuned", "template": "task1_3class",
             "fixtures": "replay/task1_llm1.jsonl"},
            {"name": "llm2", "kind": "replay", "model_name": "llm2-finetuned", "template": "task1_3class",
             "fixtures": "replay/task1_llm2.jsonl"},
            {"name": "embed_svm", "kind": "svm", "model": "models/task1_svm.json", "fusion": "text"},
        ],
        "priority": ["llm1", "llm2", "embed_svm"],
        "rescue": {"name": "hope_rescue", "kind": "replay", "model_name": "hope-or-not",
                   "template": "hope_or_not", "fixtures": "replay/task1_rescue.jsonl"},
    }
    (out / "ensemble.json").write_text(json.dumps(ensemble, indent=1) + "\n", encoding="utf-8")
    run_config = {"provider": {"kind": "stub", "model_name": "stub-v1", "label_leak": LABEL_LEAK}}
    (out / "config.json").write_text(json.dumps(run_config, indent=1) + "\n", encoding="utf-8")
    return data


def main(argv=None):
    import argparse

    ap = argparse.ArgumentParser(description="write the synthetic fixture set")
    ap.add_argument("out")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    write_fixture_set(args.out, args.seed)


if __name__ == "__main__":
    main()
