"""
Meme hate detection with an RBF SVM over fused embeddings
=========================================================

Embeds the task-3 fixtures with the deterministic stub provider, trains one
SVM per fusion mode and prints the held-out macro scores.
"""

import numpy as np

from _common import FIXTURES
from mahedkit.corpus import MEME_LABELS, load_dataset
from mahedkit.embeddings import Embedder, EmbeddingProviderSpec
from mahedkit.fusion import FLAG_NAMES
from mahedkit.metrics import evaluate
from mahedkit.pipeline import embed_features
from mahedkit.svm import SvmHyperparams, train_smo
from mahedkit.synthetic import LABEL_LEAK

train = load_dataset(FIXTURES / "task3" / "train.jsonl", 3)
test = load_dataset(FIXTURES / "task3" / "test.jsonl", 3)
embedder = Embedder(EmbeddingProviderSpec(label_leak=LABEL_LEAK))

y_train = [r.gold.meme_hate for r in train]
y_test = [r.gold.meme_hate for r in test]
print("train classes:", {str(k): int(v) for k, v in zip(*np.unique(y_train, return_counts=True))})

for flag, mode in FLAG_NAMES.items():
    X = embed_features(embedder, train.records, mode)
    model = train_smo(X, y_train, SvmHyperparams(), positive_class="hateful")
    pred = list(model.predict(embed_features(embedder, test.records, mode)))
    rep = evaluate(y_test, pred, MEME_LABELS)
    print(f"{flag:>6}  dim={X.shape[1]:4d}  SVs={len(model.support_vectors):3d}  "
          f"acc={rep.accuracy:.2f}  F1={rep.macro_f1:.2f}  F2={rep.macro_f2:.2f}")
