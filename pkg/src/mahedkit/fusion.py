"""Combine text and image embeddings into one classifier input."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .embeddings import EMBEDDING_DIM
from .errors import ContractViolation, InputError


class FusionMode(str, Enum):
    TEXT_ONLY = "text_only"
    IMAGE_ONLY = "image_only"
    AVERAGE = "average"
    CONCATENATE = "concatenate"

    @property
    def needs_text(self) -> bool:
        return self is not FusionMode.IMAGE_ONLY

    @property
    def needs_image(self) -> bool:
        return self is not FusionMode.TEXT_ONLY

    @property
    def output_dim(self) -> int:
        return 2 * EMBEDDING_DIM if self is FusionMode.CONCATENATE else EMBEDDING_DIM


# config/CLI spelling -> mode
FLAG_NAMES = {
    "text": FusionMode.TEXT_ONLY,
    "image": FusionMode.IMAGE_ONLY,
    "avg": FusionMode.AVERAGE,
    "concat": FusionMode.CONCATENATE,
}


def parse_mode(value) -> FusionMode:
    if isinstance(value, FusionMode):
        return value
    if value in FLAG_NAMES:
        return FLAG_NAMES[value]
    try:
        return FusionMode(value)
    except ValueError:
        raise ValueError(
            f"unknown fusion mode {value!r}; use one of {', '.join(FLAG_NAMES)}"
        ) from None


def _check(vec, name):
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != EMBEDDING_DIM:
        raise ContractViolation(f"{name} embedding has shape {arr.shape}, expected ({EMBEDDING_DIM},)")
    return arr


def fuse(text_vec, image_vec, mode) -> np.ndarray:
    """Fuse per-modality vectors.

    ``average`` is the element-wise mean (512-dim); ``concatenate`` puts the
    text block first, then the image block (1024-dim). Inputs are never
    modified; the result is always a fresh array.
    """
    mode = parse_mode(mode)
    if mode.needs_text and text_vec is None:
        raise InputError(f"fusion mode {mode.value} requires a text embedding")
    if mode.needs_image and image_vec is None:
        raise InputError(f"fusion mode {mode.value} requires an image embedding")
    if mode is FusionMode.TEXT_ONLY:
        return _check(text_vec, "text").copy()
    if mode is FusionMode.IMAGE_ONLY:
        return _check(image_vec, "image").copy()
    t = _check(text_vec, "text")
    v = _check(image_vec, "image")
    if mode is FusionMode.AVERAGE:
        return (t + v) / 2.0
    return np.concatenate([t, v])


def fuse_batch(text_vecs, image_vecs, mode) -> np.ndarray:
    """Row-wise :func:`fuse` over aligned sequences (either may be ``None``)."""
    mode = parse_mode(mode)
    n = len(text_vecs) if text_vecs is not None else len(image_vecs)
    rows = [
        fuse(None if text_vecs is None else text_vecs[i],
             None if image_vecs is None else image_vecs[i], mode)
        for i in range(n)
    ]
    return np.vstack(rows) if rows else np.empty((0, mode.output_dim))
