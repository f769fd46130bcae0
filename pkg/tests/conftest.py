import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mahedkit.embeddings import Embedder, EmbeddingProviderSpec  # noqa: E402

# sha256 of the prompt bodies carried from the source prompt boxes
PINNED = {
    "task1_3class": "0b14156600eb08aa7c38123d5a7f1bf77664c8e138f41de735f4f1c837a6b26d",
    "offensive_yes_no": "4d6006091fc4e075cc2aabdebf816074a20dcc81a405cd6adfa3731e6448120a",
    "hate_not_hate": "8c2db814aee33d7886a014fb78b0e82e9f54e026dfa4d8273536c89a4a739ef5",
    "emotion_12": "7084b1cedbdc0aad861fa1386f258448234f7858ac7ff93f7687f136fb915ef9",
    "meme_prompt1": "19d299785e01f4cc310fe9e4de480769a446133900e0afb31ba9bd0ef5c43ab0",
    "meme_prompt2": "624aff08f74a33416481bd1be1893f62af99803503a1dab93d44486e643c9fec",
    "meme_prompt3": "dc922312a3cc04e37befc50047617d324c1a655aaac4655358c04b6d66d56e9b",
}

ACCEPTANCE_LINES = []

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "mahedkit" / "data" / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def stub_embedder(leak=0.0, cache=None):
    return Embedder(EmbeddingProviderSpec(kind="stub", model_name="stub-v1", label_leak=leak), cache)


def leak_blobs(n, leak=0.35, seed=0, prefix="doc"):
    """Two classes of 512-d stub text embeddings separated by the label-leak offset."""
    rng = np.random.default_rng(seed)
    emb = stub_embedder(leak)
    labels = np.where(rng.random(n) < 0.5, "hateful", "not_hateful")
    X = np.vstack([emb.embed(f"{prefix} {seed} {i}", "text", lab) for i, lab in enumerate(labels)])
    return X, list(labels)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
