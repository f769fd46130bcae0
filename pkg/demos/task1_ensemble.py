"""
Task-1 voting ensemble from recorded LLM answers
================================================

Two replayed LLM voters and an embedding SVM vote; ``not_applicable``
results get a second opinion from a hope/not-hope prompt.
"""

from collections import Counter

from _common import FIXTURES
from mahedkit.corpus import TASK1_LABELS, load_dataset
from mahedkit.embeddings import Embedder, EmbeddingProviderSpec
from mahedkit.gateway import LlmPredictor, PredictorSpec
from mahedkit.metrics import evaluate
from mahedkit.pipeline import EmbeddingClassifier, EnsembleSpec, embed_features, run_many, run_task1
from mahedkit.svm import OneVsRestSvm
from mahedkit.synthetic import LABEL_LEAK

train = load_dataset(FIXTURES / "task1" / "train.jsonl", 1)
test = load_dataset(FIXTURES / "task1" / "test.jsonl", 1)
embedder = Embedder(EmbeddingProviderSpec(label_leak=LABEL_LEAK))

svm = OneVsRestSvm.fit(embed_features(embedder, train.records, "text"), [r.gold.task1 for r in train])


def replay(name, template):
    return LlmPredictor(PredictorSpec("replay", name, template, fixture_path=str(FIXTURES / "replay" / f"{name}.jsonl")))


ensemble = EnsembleSpec(
    voters=[replay("task1_llm1", "task1_3class"), replay("task1_llm2", "task1_3class"),
            EmbeddingClassifier(embedder, svm, "text")],
    rescue=replay("task1_rescue", "hope_or_not"),
)
preds = run_many(test.records, lambda r: run_task1(r, ensemble))
rescued = sum(any(s == "rescue" and l == "hope" for s, _, l in p.provenance) for p in preds)
print("final labels:", Counter(p.labels["task1"] for p in preds))
print("rescued to hope:", rescued)

gold = {r.id: r.gold.task1 for r in test}
rep = evaluate([gold[p.record_id] for p in preds], [p.labels["task1"] for p in preds], TASK1_LABELS)
print(f"acc={rep.accuracy:.2f} macro-F1={rep.macro_f1:.2f}")
