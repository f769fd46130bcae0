"""
Dual-branch MLP on image and text embeddings
============================================

Trains the two-tower network on the task-3 fixtures with class weighting
and early stopping on validation loss.
"""

from _common import FIXTURES
from mahedkit import mlp
from mahedkit.corpus import MEME_LABELS, load_dataset
from mahedkit.embeddings import Embedder, EmbeddingProviderSpec
from mahedkit.metrics import evaluate
from mahedkit.pipeline import embed_pairs
from mahedkit.synthetic import LABEL_LEAK

embedder = Embedder(EmbeddingProviderSpec(label_leak=LABEL_LEAK))
splits = {s: load_dataset(FIXTURES / "task3" / f"{s}.jsonl", 3) for s in ("train", "validation", "test")}


def triple(split):
    img, txt = embed_pairs(embedder, split.records)
    return img, txt, [r.gold.meme_hate for r in split]


train_set, val_set, test_set = (triple(splits[s]) for s in ("train", "validation", "test"))
config = mlp.MlpConfig(max_epochs=30, class_weights=mlp.balanced_binary_weights(
    [int(v == "hateful") for v in train_set[2]]))
for name, shape in config.layer_shapes().items():
    print(f"{name:>10} {shape}")

model = mlp.train(config, train_set, val_set, positive_label="hateful", negative_label="not_hateful")
print("best epoch:", model.best_epoch, "of", len(model.training_log), "epochs run")

pred = model.predict(test_set[0], test_set[1])
rep = evaluate(test_set[2], pred, MEME_LABELS)
print(f"test acc={rep.accuracy:.2f} macro-F1={rep.macro_f1:.2f}")
