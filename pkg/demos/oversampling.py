"""
Minority oversampling
=====================

Repeats the rare class and shows the resulting histograms.
"""

from _common import FIXTURES
from mahedkit.corpus import class_histogram, load_dataset, oversample_minority

train = load_dataset(FIXTURES / "task3" / "train.jsonl", 3)
print("original:", class_histogram(train, "meme_hate"))
for factor in (1, 5, 9):
    over = oversample_minority(train, "meme_hate", "hateful", factor, seed=0)
    print(f"x{factor}:", class_histogram(over, "meme_hate"))
