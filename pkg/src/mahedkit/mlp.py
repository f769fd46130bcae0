"""Dual-branch feed-forward classifier for (image, text) embedding pairs.

Layout (paper-default dims)::

    image 512 -> 256 -> 128 -> 64 ┐
                                  ├ concat 128 -> 128 -> 1024 -> 1 (sigmoid)
    text  512 -> 256 -> 128 -> 64 ┘

Every hidden Dense is ReLU followed by dropout (inverted, so inference is a
plain mask-free pass). Training minimizes class-weighted binary
cross-entropy with Adam over seeded mini-batches, with early stopping on
validation loss and best-epoch weight restoration.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ContractViolation, TrainingError

log = logging.getLogger(__name__)

MODEL_FORMAT = "mahedkit-mlp/1"
PROB_EPS = 1e-7
BRANCHES = ("image", "text")


@dataclass(frozen=True)
class MlpConfig:
    branch_dims: tuple = (512, 256, 128, 64)
    head_dims: tuple = (128, 128, 1024, 1)
    dropout_rate: float = 0.5
    learning_rate: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 100
    patience: int = 3
    seed: int = 0
    class_weights: dict | None = None  # {0: w0, 1: w1}; None -> uniform
    standardize: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "branch_dims", tuple(self.branch_dims))
        object.__setattr__(self, "head_dims", tuple(self.head_dims))
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.head_dims[0] != 2 * self.branch_dims[-1]:
            raise ValueError("head input must equal twice the branch output width")
        if self.head_dims[-1] != 1:
            raise ValueError("head must end in a single sigmoid unit")
        if self.class_weights is not None:
            cw = {int(k): float(v) for k, v in self.class_weights.items()}
            if set(cw) != {0, 1} or min(cw.values()) <= 0:
                raise ValueError("class_weights must map {0, 1} to positive reals")
            object.__setattr__(self, "class_weights", cw)

    @property
    def weights(self) -> tuple[float, float]:
        cw = self.class_weights or {0: 1.0, 1: 1.0}
        return cw[0], cw[1]

    def layer_shapes(self) -> dict:
        shapes = {}
        for br in BRANCHES:
            for k, (a, b) in enumerate(zip(self.branch_dims, self.branch_dims[1:])):
                shapes[f"{br}.{k}"] = (a, b)
        for k, (a, b) in enumerate(zip(self.head_dims, self.head_dims[1:])):
            shapes[f"head.{k}"] = (a, b)
        return shapes

    def to_dict(self) -> dict:
        d = asdict(self)
        d["branch_dims"] = list(self.branch_dims)
        d["head_dims"] = list(self.head_dims)
        if self.class_weights is not None:
            d["class_weights"] = {str(k): v for k, v in self.class_weights.items()}
        return d


PAPER_CONFIG = MlpConfig()


def balanced_binary_weights(y) -> dict:
    y = np.asarray(y)
    n, n1 = len(y), int(y.sum())
    if n1 == 0 or n1 == n:
        raise ValueError("balanced weights need both classes")
    return {0: n / (2 * (n - n1)), 1: n / (2 * n1)}


@dataclass
class MlpModel:
    config: MlpConfig
    params: dict  # name -> (W, b)
    training_log: list = field(default_factory=list)
    best_epoch: int | None = None
    input_stats: dict | None = None  # modality -> (mean, std) when standardized
    positive_label: str = "1"
    negative_label: str = "0"

    def copy_params(self) -> dict:
        return {k: (W.copy(), b.copy()) for k, (W, b) in self.params.items()}

    def predict_proba(self, image_vecs, text_vecs) -> np.ndarray:
        return forward(self, image_vecs, text_vecs)

    def predict(self, image_vecs, text_vecs, threshold: float = 0.5) -> list:
        p = np.atleast_1d(self.predict_proba(image_vecs, text_vecs))
        return [self.positive_label if v >= threshold else self.negative_label for v in p]

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "config": self.config.to_dict(),
            "labels": {"0": self.negative_label, "1": self.positive_label},
            "best_epoch": self.best_epoch,
            "training_log": self.training_log,
            "input_stats": None if self.input_stats is None else {
                k: [m.tolist(), s.tolist()] for k, (m, s) in self.input_stats.items()
            },
            "layers": {
                name: {"shape": list(W.shape), "W": W.tolist(), "b": b.tolist()}
                for name, (W, b) in self.params.items()
            },
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MlpModel":
        if obj.get("format") != MODEL_FORMAT:
            raise ContractViolation(f"not an MLP model file (format={obj.get('format')!r})")
        cfg = dict(obj["config"])
        config = MlpConfig(**cfg)
        params = {}
        for name, shape in config.layer_shapes().items():
            layer = obj["layers"][name]
            W = np.asarray(layer["W"], dtype=np.float64).reshape(shape)
            params[name] = (W, np.asarray(layer["b"], dtype=np.float64))
        stats = obj.get("input_stats")
        return cls(
            config=config,
            params=params,
            training_log=obj.get("training_log", []),
            best_epoch=obj.get("best_epoch"),
            input_stats=None if stats is None else {
                k: (np.asarray(m), np.asarray(s)) for k, (m, s) in stats.items()
            },
            positive_label=obj["labels"]["1"],
            negative_label=obj["labels"]["0"],
        )


def save_model(model: MlpModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()) + "\n", encoding="utf-8")


def load_model(path) -> MlpModel:
    return MlpModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def init_model(config: MlpConfig = PAPER_CONFIG, seed: int | None = None) -> MlpModel:
    """He-uniform weights ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``, zero biases."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    params = {}
    for name, (fan_in, fan_out) in config.layer_shapes().items():
        limit = np.sqrt(6.0 / fan_in)
        params[name] = (rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out))
    return MlpModel(config, params)


def _as_batch(vecs, width, name):
    X = np.asarray(vecs, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != width:
        raise ContractViolation(f"{name} input has width {X.shape[1]}, expected {width}")
    if not np.all(np.isfinite(X)):
        raise ContractViolation(f"{name} input contains non-finite values")
    return X, single


def _forward(model: MlpModel, image, text, rng=None):
    """Forward pass keeping activations for backprop. ``rng`` enables dropout."""
    cfg = model.config
    keep = 1.0 - cfg.dropout_rate
    cache = {}

    def dense_stack(x, prefix, n_layers, last_linear):
        h = x
        for k in range(n_layers):
            name = f"{prefix}.{k}"
            W, b = model.params[name]
            z = h @ W + b
            if last_linear and k == n_layers - 1:
                cache[name] = (h, z, None)
                return z
            a = np.maximum(z, 0.0)
            mask = None
            if rng is not None and cfg.dropout_rate > 0:
                mask = (rng.random(a.shape) < keep) / keep
                a = a * mask
            cache[name] = (h, z, mask)
            h = a
        return h

    feats = []
    for br, x in zip(BRANCHES, (image, text)):
        if model.input_stats is not None:
            mean, std = model.input_stats[br]
            x = (x - mean) / std
        feats.append(dense_stack(x, br, len(cfg.branch_dims) - 1, last_linear=False))
    joint = np.concatenate(feats, axis=1)
    logit = dense_stack(joint, "head", len(cfg.head_dims) - 1, last_linear=True)[:, 0]
    return logit, cache


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(model: MlpModel, image_vecs, text_vecs, train: bool = False, rng=None):
    """Probability of the positive class.

    ``train=True`` applies dropout with masks drawn from ``rng`` (a seeded
    ``np.random.Generator``); otherwise dropout is off.
    """
    width = model.config.branch_dims[0]
    image, single = _as_batch(image_vecs, width, "image")
    text, _ = _as_batch(text_vecs, width, "text")
    if image.shape[0] != text.shape[0]:
        raise ContractViolation("image and text batches differ in length")
    if train and rng is None:
        raise ValueError("train mode needs an rng for dropout masks")
    logit, _ = _forward(model, image, text, rng if train else None)
    p = sigmoid(logit)
    return float(p[0]) if single else p


def loss(p, y, class_weights=None) -> np.ndarray | float:
    """Weighted binary cross-entropy, ``p`` clamped to ``[1e-7, 1 - 1e-7]``."""
    w0, w1 = (1.0, 1.0) if class_weights is None else (class_weights[0], class_weights[1])
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(y, dtype=np.float64)
    out = -(w1 * y * np.log(p) + w0 * (1.0 - y) * np.log(1.0 - p))
    return float(out) if out.ndim == 0 else out


def batch_loss(model, image, text, y, rng=None) -> float:
    logit, _ = _forward(model, image, text, rng)
    return float(np.mean(loss(sigmoid(logit), y, model.config.class_weights)))


def gradient(model: MlpModel, image, text, y, rng=None) -> tuple[float, dict]:
    """Mean weighted BCE over the batch and its gradient for every parameter.

    With ``rng`` given, one dropout mask per layer is drawn for this call and
    reused in the backward pass.
    """
    image = np.atleast_2d(np.asarray(image, dtype=np.float64))
    text = np.atleast_2d(np.asarray(text, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise ValueError("empty batch")
    cfg = model.config
    w0, w1 = cfg.weights
    logit, cache = _forward(model, image, text, rng)
    p = sigmoid(logit)
    value = float(np.mean(loss(p, y, cfg.class_weights)))
    # d loss / d logit; the clamp zeroes the gradient outside [eps, 1-eps]
    dz = (w1 * y * (p - 1.0) + w0 * (1.0 - y) * p) / n
    dz = np.where((p > PROB_EPS) & (p < 1.0 - PROB_EPS), dz, 0.0)[:, None]

    grads = {}

    def back(prefix, n_layers, delta, last_linear):
        for k in reversed(range(n_layers)):
            name = f"{prefix}.{k}"
            W, _ = model.params[name]
            h, z, mask = cache[name]
            if not (last_linear and k == n_layers - 1):
                if mask is not None:
                    delta = delta * mask
                delta = delta * (z > 0)
            grads[name] = (h.T @ delta, delta.sum(0))
            delta = delta @ W.T
        return delta

    d_joint = back("head", len(cfg.head_dims) - 1, dz, last_linear=True)
    half = cfg.branch_dims[-1]
    for br, d in zip(BRANCHES, (d_joint[:, :half], d_joint[:, half:])):
        back(br, len(cfg.branch_dims) - 1, d, last_linear=False)
    return value, {k: grads[k] for k in model.params}


class _Adam:
    def __init__(self, params, lr, beta1, beta2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: (np.zeros_like(W), np.zeros_like(b)) for k, (W, b) in params.items()}
        self.v = {k: (np.zeros_like(W), np.zeros_like(b)) for k, (W, b) in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k in params:
            new = []
            for i in range(2):
                g = grads[k][i]
                m = self.m[k][i]
                v = self.v[k][i]
                m *= self.b1
                m += (1 - self.b1) * g
                v *= self.b2
                v += (1 - self.b2) * g * g
                new.append(params[k][i] - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps))
            params[k] = tuple(new)


def _labels_to_binary(y, positive_label):
    arr = np.asarray(y)
    if arr.dtype.kind in "biuf" and set(np.unique(arr)).issubset({0, 1}):
        return arr.astype(np.float64)
    return np.array([1.0 if v == positive_label else 0.0 for v in y])


def train(config: MlpConfig, train_set, validation_set,
          val_loss_fn: Callable[[MlpModel, int], float] | None = None,
          positive_label: str = "1", negative_label: str = "0") -> MlpModel:
    """Fit the network.

    ``train_set`` and ``validation_set`` are ``(image_vecs, text_vecs, y)``
    triples; ``y`` is 0/1 or labels compared against ``positive_label``.
    ``val_loss_fn(model, epoch)`` replaces the validation-loss evaluation
    (used to script early-stopping scenarios).
    """
    img, txt, y = train_set
    vimg, vtxt, vy = validation_set
    img, _ = _as_batch(img, config.branch_dims[0], "image")
    txt, _ = _as_batch(txt, config.branch_dims[0], "text")
    vimg, _ = _as_batch(vimg, config.branch_dims[0], "image")
    vtxt, _ = _as_batch(vtxt, config.branch_dims[0], "text")
    y = _labels_to_binary(y, positive_label)
    vy = _labels_to_binary(vy, positive_label)
    if len(y) == 0 or len(vy) == 0:
        raise ValueError("train and validation sets must be non-empty")

    model = init_model(config)
    model.positive_label, model.negative_label = positive_label, negative_label
    if config.standardize:
        model.input_stats = {
            br: (x.mean(0), np.where(x.std(0) > 0, x.std(0), 1.0)) for br, x in zip(BRANCHES, (img, txt))
        }
    rng = np.random.default_rng(config.seed)
    opt = _Adam(model.params, config.learning_rate, config.beta1, config.beta2, config.adam_eps)

    best_loss, best_params, best_epoch, wait = np.inf, model.copy_params(), 0, 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(y))
        total = 0.0
        for b, start in enumerate(range(0, len(y), config.batch_size)):
            idx = order[start:start + config.batch_size]
            value, grads = gradient(model, img[idx], txt[idx], y[idx], rng=rng)
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            opt.step(model.params, grads)
            total += value * len(idx)
        train_loss = total / len(y)
        if val_loss_fn is not None:
            val_loss = float(val_loss_fn(model, epoch))
        else:
            val_loss = batch_loss(model, vimg, vtxt, vy)
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        model.training_log.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        log.debug("epoch %d train %.5f val %.5f", epoch, train_loss, val_loss)
        if val_loss < best_loss:
            best_loss, best_params, best_epoch, wait = val_loss, model.copy_params(), epoch, 0
        else:
            wait += 1
            if wait >= config.patience:
                break
    model.params = best_params
    model.best_epoch = best_epoch
    return model
