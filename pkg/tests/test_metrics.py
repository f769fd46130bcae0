import random

import numpy as np
import pytest

from oracles import naive_confusion, naive_macro
from mahedkit import UNDEFINED
from mahedkit.metrics import (confusion, evaluate, f_beta, format_table, macro_report, mean_over_subtasks,
                              reports_to_json, score_task2)


def random_instance(rnd):
    k = rnd.randint(1, 5)
    classes = [f"c{i}" for i in range(k)]
    n = rnd.randint(0, 200)
    return classes, [rnd.choice(classes) for _ in range(n)], [rnd.choice(classes) for _ in range(n)]


def test_matches_naive_counter_on_1000_instances():
    rnd = random.Random(7)
    for _ in range(1000):
        classes, gold, pred = random_instance(rnd)
        rep = evaluate(gold, pred, classes)
        assert rep.confusion.counts.tolist() == naive_confusion(gold, pred, classes)
        rows, macro, acc = naive_macro(gold, pred, classes)
        for c in classes:
            got = rep.per_class[c]
            assert np.allclose([got.precision, got.recall, got.f1, got.f2], rows[c], rtol=0, atol=1e-12)
        got = (rep.macro_precision, rep.macro_recall, rep.macro_f1, rep.macro_f2)
        assert np.allclose(got, macro, rtol=0, atol=1e-12)
        assert abs(rep.accuracy - acc) <= 1e-12


def test_three_record_example():
    cm = confusion(["a", "b", "b"], ["a", "a", "b"], ["a", "b"])
    assert cm.counts.tolist() == [[1, 0], [1, 1]]
    rep = macro_report(cm)
    assert rep.per_class["a"].precision == 0.5 and rep.per_class["a"].recall == 1.0
    assert rep.per_class["b"].precision == 1.0 and rep.per_class["b"].recall == 0.5
    assert rep.macro_f1 == 2 / 3
    assert rep.accuracy == 2 / 3
    assert rep.per_class["a"].f2 == pytest.approx(5 / 6, abs=1e-15)


def test_f2_formula():
    assert f_beta(0.5, 1.0, 2.0) == pytest.approx(0.8333333333333334, abs=1e-15)
    assert f_beta(0.0, 0.0, 2.0) == 0.0


def test_edge_cases():
    assert confusion(["a", "b"], ["a", "b"], ["a", "b"]).counts.tolist() == [[1, 0], [0, 1]]
    empty = evaluate([], [], ["a", "b"])
    assert empty.empty and empty.accuracy == 0 and empty.macro_f1 == 0
    perfect = evaluate(["a", "b", "c"], ["a", "b", "c"], ["a", "b", "c"])
    assert perfect.macro_f1 == perfect.macro_f2 == perfect.accuracy == 1.0
    with pytest.raises(ValueError):
        confusion(["a"], ["z"], ["a", "b"])
    with pytest.raises(ValueError):
        confusion(["a"], [], ["a"])


def test_absent_class_counts_in_macro():
    rep = evaluate(["a", "a"], ["a", "a"], ["a", "b"])
    assert rep.macro_f1 == 0.5


def test_permutation_invariance():
    rnd = random.Random(3)
    for _ in range(100):
        classes, gold, pred = random_instance(rnd)
        idx = list(range(len(gold)))
        rnd.shuffle(idx)
        a = evaluate(gold, pred, classes).to_dict()
        b = evaluate([gold[i] for i in idx], [pred[i] for i in idx], classes).to_dict()
        assert a == b


def test_class_relabeling_equivariance():
    rnd = random.Random(4)
    for _ in range(100):
        classes, gold, pred = random_instance(rnd)
        perm = classes[:]
        rnd.shuffle(perm)
        a, b = evaluate(gold, pred, classes), evaluate(gold, pred, perm)
        for c in classes:
            assert a.per_class[c] == b.per_class[c]
        assert abs(a.macro_f1 - b.macro_f1) < 1e-12 and abs(a.macro_f2 - b.macro_f2) < 1e-12


def test_score_task2_all_predicted_non_offensive():
    gold = [{"emotion": "joy", "offensive": "yes", "hate_text": "hate"}, {"emotion": "fear", "offensive": "no", "hate_text": None}]
    preds = [{"emotion": "joy", "offensive": "no", "hate_text": UNDEFINED}] * 2
    reps = score_task2(preds, gold)
    assert reps["hate_text"].empty and reps["hate_text"].excluded_count == 2
    assert reps["offensive"].n_scored == 2
    assert "-" in format_table(reps).splitlines()[-1]


def test_score_task2_filter_then_count():
    gold = [
        {"emotion": "joy", "offensive": "yes", "hate_text": "hate"},
        {"emotion": "joy", "offensive": "yes", "hate_text": "not_hate"},
        {"emotion": "joy", "offensive": "no", "hate_text": None},
        {"emotion": "joy", "offensive": "yes", "hate_text": "hate"},
    ]
    preds = [
        {"emotion": "joy", "offensive": "yes", "hate_text": "hate"},
        {"emotion": "joy", "offensive": "yes", "hate_text": "hate"},
        {"emotion": "joy", "offensive": "yes", "hate_text": "hate"},
        {"emotion": "joy", "offensive": "no", "hate_text": UNDEFINED},
    ]
    reps = score_task2(preds, gold)
    assert reps["hate_text"].n_scored == 2 and reps["hate_text"].excluded_count == 2
    assert reps["hate_text"].accuracy == 0.5
    assert reps["offensive"].to_dict() == evaluate([g["offensive"] for g in gold], [p["offensive"] for p in preds],
                                                   ["yes", "no"]).to_dict()


def test_mean_over_subtasks_skips_empty():
    a = evaluate(["x"], ["x"], ["x"])
    empty = evaluate([], [], ["x"])
    assert mean_over_subtasks({"a": a, "e": empty})["macro_f1"] == 1.0


def test_csv_and_json_outputs():
    rep = evaluate(["a", "b"], ["a", "a"], ["a", "b"])
    assert rep.confusion.to_csv() == "gold\\pred,a,b\na,1,0\nb,1,0\n"
    assert '"macro_f1"' in reports_to_json({"t": rep})
    assert all(0 <= v <= 1 for v in (rep.macro_precision, rep.macro_recall, rep.macro_f1, rep.macro_f2, rep.accuracy))


def test_sklearn_cross_check():
    skm = pytest.importorskip("sklearn.metrics")
    rnd = random.Random(9)
    for _ in range(50):
        classes, gold, pred = random_instance(rnd)
        if not gold:
            continue
        rep = evaluate(gold, pred, classes)
        p, r, f1, _ = skm.precision_recall_fscore_support(gold, pred, labels=classes, average="macro", zero_division=0)
        assert np.allclose([rep.macro_precision, rep.macro_recall, rep.macro_f1], [p, r, f1], atol=1e-12)
