import itertools
import json
import random

import numpy as np
import pytest

from conftest import stub_embedder
from mahedkit import UNDEFINED
from mahedkit.corpus import GoldLabels, Record, load_dataset
from mahedkit.errors import LabelParseError
from mahedkit.gateway import LlmPredictor, PredictorSpec, SafetyAdapter
from mahedkit.metrics import score_task2
from mahedkit.mlp import MlpConfig, train
from mahedkit.pipeline import (EmbeddingClassifier, EnsembleSpec, MlpDetector, Prediction, SafetyDetector,
                               dumps_predictions, embed_features, embed_pairs, evaluate_predictions, majority_vote,
                               read_predictions, run_many, run_task1, run_task2, run_task3, write_predictions)
from mahedkit.svm import train_smo

LABELS = ("hope", "hate", "not_applicable")


class Fixed:
    def __init__(self, answer, name="fixed"):
        self.answer, self.name, self.calls = answer, name, 0

    def __call__(self, record):
        self.calls += 1
        if isinstance(self.answer, Exception):
            raise self.answer
        return self.answer


def expected_vote(votes, priority):
    # enumerated by hand: a label with two or more votes, else the priority voter
    a, b, c = votes
    if a == b or a == c:
        return a
    if b == c:
        return b
    return votes[priority[0]]


def test_truth_table_all_27_triples():
    table = list(itertools.product(LABELS, repeat=3))
    assert len(table) == 27
    for priority in itertools.permutations(range(3)):
        for votes in table:
            assert majority_vote(votes, priority) == expected_vote(votes, priority)


def test_vote_examples():
    assert majority_vote(("hate", "hate", "hope")) == "hate"
    assert majority_vote(("hope", "hope", "hope")) == "hope"
    assert majority_vote(("hope", "hate", "not_applicable"), priority=(1, 0, 2)) == "hate"
    with pytest.raises(ValueError):
        majority_vote(("hope", "hate"))
    with pytest.raises(ValueError):
        EnsembleSpec([Fixed("hope")] * 3, tie_break_priority=(0, 0, 1))


REC = Record("r1", "نص", None, GoldLabels(task1="hope"))


def test_rescue_not_called_for_hate():
    rescue = Fixed("hope")
    pred = run_task1(REC, EnsembleSpec([Fixed("hate")] * 3, rescue=rescue))
    assert pred.labels == {"task1": "hate"} and rescue.calls == 0


def test_rescue_promotes_and_declines():
    voters = [Fixed("not_applicable"), Fixed("not_applicable"), Fixed("hope")]
    assert run_task1(REC, EnsembleSpec(voters, rescue=Fixed("hope"))).labels["task1"] == "hope"
    assert run_task1(REC, EnsembleSpec(voters, rescue=Fixed("not_applicable"))).labels["task1"] == "not_applicable"


def test_rescue_monotonicity_10k():
    rnd = random.Random(0)
    for _ in range(10_000):
        votes = [rnd.choice(LABELS) for _ in range(3)]
        priority = tuple(rnd.sample(range(3), 3))
        rescue = Fixed(rnd.choice(("hope", "not_applicable")))
        plain = majority_vote(votes, priority)
        out = run_task1(REC, EnsembleSpec([Fixed(v) for v in votes], priority, rescue)).labels["task1"]
        if plain != "not_applicable":
            assert out == plain and rescue.calls == 0
        else:
            assert out in ("hope", "not_applicable") and rescue.calls == 1
            assert out == rescue.answer


def test_voter_failure_marks_record_failed():
    pred = run_task1(REC, EnsembleSpec([Fixed("hope"), Fixed(LabelParseError("?", "raw")), Fixed("hope")]))
    assert pred.failed and pred.labels == {}
    assert pred.provenance[-1][0] == "vote2"
    assert json.loads(json.dumps(pred.to_json()))["status"] == "failed"


def test_task2_cascade():
    off_no = run_task2(REC, Fixed("joy"), Fixed("no"), Fixed("hate"))
    assert off_no.labels == {"emotion": "joy", "offensive": "no", "hate_text": UNDEFINED}
    hate = Fixed("hate")
    off_yes = run_task2(REC, Fixed("anger"), Fixed("yes"), hate)
    assert off_yes.labels["hate_text"] == "hate" and hate.calls == 1
    bad = run_task2(REC, Fixed("confidence"), Fixed("no"), Fixed("hate"))
    assert bad.failed


def test_task2_conditional_both_directions():
    rnd = random.Random(1)
    for _ in range(2000):
        off = rnd.choice(("yes", "no"))
        p = run_task2(REC, Fixed("joy"), Fixed(off), Fixed(rnd.choice(("hate", "not_hate"))))
        assert (p.labels["hate_text"] == UNDEFINED) == (off == "no")


def _meme_splits(fixtures_dir):
    return (load_dataset(fixtures_dir / "task3" / "train.jsonl", 3),
            load_dataset(fixtures_dir / "task3" / "test.jsonl", 3))


def test_svm_detector_on_leak_fixture(fixtures_dir):
    train_split, test_split = _meme_splits(fixtures_dir)
    emb = stub_embedder(0.4)
    model = train_smo(embed_features(emb, train_split.records, "avg"), [r.gold.meme_hate for r in train_split])
    det = EmbeddingClassifier(emb, model, "avg")
    preds = run_many(test_split.records, lambda r: run_task3(r, det))
    acc = np.mean([p.labels["meme_hate"] == r.gold.meme_hate for p, r in zip(preds, sorted(test_split, key=lambda r: r.id))])
    assert acc >= 0.9
    assert preds[0].provenance[0][1] == "embedding+svm[average]"


def test_mlp_detector(fixtures_dir):
    train_split, test_split = _meme_splits(fixtures_dir)
    emb = stub_embedder(0.4)
    img, txt = embed_pairs(emb, train_split.records)
    y = [r.gold.meme_hate for r in train_split]
    model = train(MlpConfig(max_epochs=20, class_weights={0: 1.0, 1: 9.0}), (img, txt, y), (img, txt, y),
                  positive_label="hateful", negative_label="not_hateful")
    det = MlpDetector(emb, model)
    out = [run_task3(r, det) for r in test_split]
    assert all(p.labels["meme_hate"] in ("hateful", "not_hateful") for p in out)


def test_replayed_prompt_labels_pass_through(fixtures_dir):
    _, test_split = _meme_splits(fixtures_dir)
    path = fixtures_dir / "replay" / "task3_meme_prompt3.jsonl"
    spec = PredictorSpec(kind="replay", model_name="m", template_id="meme_prompt3", fixture_path=str(path))
    det = LlmPredictor(spec)
    for rec in test_split.records[:20]:
        assert run_task3(rec, det).labels["meme_hate"] == det(rec).label


def test_safety_detector_mapping(tmp_path):
    path = tmp_path / "s.jsonl"
    path.write_text(json.dumps({"template": "safety", "record_id": "m1", "response": "safe"}) + "\n", encoding="utf-8")
    spec = PredictorSpec(kind="replay", model_name="guard", template_id="safety", fixture_path=str(path))
    rec = Record("m1", "t", "/tmp/x.png", GoldLabels(meme_hate="hateful"))
    assert run_task3(rec, SafetyDetector(SafetyAdapter(spec))).labels == {"meme_hate": "not_hateful"}
    missing = run_task3(Record("m9", "t", "/tmp/x.png", GoldLabels(meme_hate="hateful")), SafetyDetector(SafetyAdapter(spec)))
    assert missing.failed and "MissingFixtureError" in missing.error


def test_failed_records_excluded_from_metrics():
    recs = [Record(f"r{i}", "t", "/x.png", GoldLabels(meme_hate=l)) for i, l in enumerate(["hateful", "not_hateful", "hateful"])]
    preds = [Prediction("r0", 3, {"meme_hate": "hateful"}), Prediction("r1", 3, {"meme_hate": "hateful"}),
             Prediction("r2", 3, failed=True, error="boom")]
    rep = evaluate_predictions(preds, recs, 3)["meme_hate"]
    assert rep.n_scored == 2 and rep.failed_count == 1 and rep.accuracy == 0.5


def test_prediction_file_round_trip_and_order(tmp_path):
    preds = [Prediction("b", 2, {"emotion": "joy", "offensive": "no", "hate_text": UNDEFINED}, [("emotion", "x", "joy")]),
             Prediction("a", 2, {"emotion": "fear", "offensive": "yes", "hate_text": "hate"})]
    write_predictions(tmp_path / "p.jsonl", preds)
    lines = (tmp_path / "p.jsonl").read_text(encoding="utf-8").splitlines()
    assert [json.loads(l)["id"] for l in lines] == ["a", "b"]
    assert list(json.loads(lines[0])) == sorted(json.loads(lines[0]))
    back = read_predictions(tmp_path / "p.jsonl")
    assert dumps_predictions(back) == dumps_predictions(preds)


def test_run_many_parallel_matches_serial():
    recs = [Record(f"r{i:03d}", "t", None, GoldLabels(task1="hope")) for i in range(50)]
    ens = EnsembleSpec([Fixed("hope"), Fixed("hate"), Fixed("hate")])
    serial = dumps_predictions(run_many(recs, lambda r: run_task1(r, ens)))
    parallel = dumps_predictions(run_many(recs[::-1], lambda r: run_task1(r, ens), max_workers=4))
    assert serial == parallel


def test_task2_scoring_uses_cascade_output():
    recs = [Record("a", "t", None, GoldLabels(emotion="joy", offensive="yes", hate_text="hate")),
            Record("b", "t", None, GoldLabels(emotion="joy", offensive="no"))]
    preds = [run_task2(recs[0], Fixed("joy"), Fixed("yes"), Fixed("hate")),
             run_task2(recs[1], Fixed("joy"), Fixed("no"), Fixed("hate"))]
    reps = score_task2([p.labels for p in preds], [r.gold.as_dict() for r in recs])
    assert reps["hate_text"].n_scored == 1 and reps["hate_text"].excluded_count == 1
