"""Binary RBF soft-margin SVM trained with Sequential Minimal Optimization.

The dual problem solved is::

    max_a  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t.   0 <= a_i <= C * w[y_i],   sum_i a_i y_i = 0

where ``w`` are per-class weights (``balanced`` gives N / (2 N_c)).

Working pairs are chosen first-order: ``i`` is the maximal KKT violator
and ``j`` the partner with the largest error gap ``|E_i - E_j|`` (lowest
index on ties). If that pair cannot make progress a seeded random
violating partner is tried instead.
"""

from __future__ import annotations

import json
import logging
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractViolation, DegenerateDataError

log = logging.getLogger(__name__)

MODEL_FORMAT = "mahedkit-svm/1"
OVR_FORMAT = "mahedkit-svm-ovr/1"


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SvmHyperparams:
    C: float = 0.1
    gamma: float | str = "scale"
    class_weight: str = "balanced"
    kkt_tolerance: float = 1e-3
    max_passes: int = 200

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise ValueError(f"unknown gamma mode {self.gamma!r}")
        elif not self.gamma > 0:
            raise ValueError("fixed gamma must be positive")
        if self.class_weight not in ("balanced", "uniform"):
            raise ValueError(f"unknown class weight mode {self.class_weight!r}")
        if not self.kkt_tolerance > 0:
            raise ValueError("kkt_tolerance must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")


# C=0.1 everywhere except text-only, where C=1 was preferred
PAPER_HYPERPARAMS = SvmHyperparams(C=0.1, gamma="scale", class_weight="balanced")
PAPER_TEXT_ONLY_HYPERPARAMS = SvmHyperparams(C=1.0, gamma="scale", class_weight="balanced")


def gamma_scale(X) -> float:
    """``1 / (n_features * X.var())`` with the population variance of all entries."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {X.shape}")
    var = X.var()
    if not var > 0:
        raise DegenerateDataError("training matrix has zero variance")
    return 1.0 / (X.shape[1] * var)


def balanced_class_weights(labels: Sequence) -> dict:
    counts = Counter(labels)
    if len(counts) != 2:
        raise ValueError(f"balanced weights need exactly 2 classes, got {len(counts)}")
    n = sum(counts.values())
    return {c: n / (2 * k) for c, k in counts.items()}


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ContractViolation(f"dimension mismatch {x.shape} vs {y.shape}")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_kernel_matrix(A, B, gamma: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise ContractViolation(f"dimension mismatch {A.shape[1]} vs {B.shape[1]}")
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def dual_objective(alpha, y, K) -> float:
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    gamma: float
    label_map: dict
    converged: bool = True
    n_iter: int = 0
    dual_objective: float = float("nan")
    support_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def classes(self) -> tuple:
        return (self.label_map[-1], self.label_map[1])

    def decision_function(self, X) -> np.ndarray | float:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        if X2.shape[1] != self.support_vectors.shape[1]:
            raise ContractViolation(
                f"input has {X2.shape[1]} features, model expects {self.support_vectors.shape[1]}"
            )
        f = rbf_kernel_matrix(X2, self.support_vectors, self.gamma) @ self.dual_coefs + self.bias
        return float(f[0]) if single else f

    def predict(self, X):
        f = np.atleast_1d(self.decision_function(X))
        # sign(0) -> +1
        out = [self.label_map[1] if v >= 0 else self.label_map[-1] for v in f]
        return out[0] if np.asarray(X).ndim == 1 else out

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "gamma": float(self.gamma),
            "bias": float(self.bias),
            "label_map": {"-1": self.label_map[-1], "+1": self.label_map[1]},
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
            "dual_objective": float(self.dual_objective),
            "dual_coefs": [float(v) for v in self.dual_coefs],
            "support_vectors": [[float(v) for v in row] for row in self.support_vectors],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SvmModel":
        if obj.get("format") != MODEL_FORMAT:
            raise ContractViolation(f"not an SVM model file (format={obj.get('format')!r})")
        return cls(
            support_vectors=np.asarray(obj["support_vectors"], dtype=np.float64),
            dual_coefs=np.asarray(obj["dual_coefs"], dtype=np.float64),
            bias=float(obj["bias"]),
            gamma=float(obj["gamma"]),
            label_map={-1: obj["label_map"]["-1"], 1: obj["label_map"]["+1"]},
            converged=obj.get("converged", True),
            n_iter=obj.get("n_iter", 0),
            dual_objective=obj.get("dual_objective", float("nan")),
        )


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1) + "\n", encoding="utf-8")


def load_model(path):
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format") == OVR_FORMAT:
        return OneVsRestSvm.from_dict(obj)
    return SvmModel.from_dict(obj)


def _encode_labels(y, positive_class):
    classes = sorted(set(y), key=str)
    if len(classes) != 2:
        raise ValueError(f"binary SVM needs exactly 2 classes, got {classes}")
    if positive_class is None:
        positive_class = classes[1]
    elif positive_class not in classes:
        raise ValueError(f"positive class {positive_class!r} not among {classes}")
    negative = classes[0] if classes[1] == positive_class else classes[1]
    ys = np.array([1.0 if v == positive_class else -1.0 for v in y])
    return ys, {-1: negative, 1: positive_class}


def solve_dual(K, y, upper, tol=1e-3, max_iter=None, seed=0):
    """SMO on a precomputed kernel matrix.

    Returns ``(alpha, bias, n_iter, converged)``.
    """
    n = len(y)
    if max_iter is None:
        max_iter = 200 * n
    rng = np.random.default_rng(seed)
    alpha = np.zeros(n)
    # F_t = f(x_t) - b - y_t, i.e. the prediction error without the bias
    F = -y.copy()
    diag = np.diag(K)
    eps = 1e-12
    converged = False
    it = 0
    while it < max_iter:
        up = ((y > 0) & (alpha < upper - eps)) | ((y < 0) & (alpha > eps))
        low = ((y > 0) & (alpha > eps)) | ((y < 0) & (alpha < upper - eps))
        score = -F  # equals -y * grad of the minimization form
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        if score[i] - score[j] < tol:
            converged = True
            break
        it += 1
        if _take_step(i, j, K, diag, y, alpha, F, upper):
            continue
        cands = np.flatnonzero(low & (score < score[i] - tol))
        cands = cands[cands != i]
        moved = False
        for j2 in rng.permutation(cands):
            if _take_step(i, int(j2), K, diag, y, alpha, F, upper):
                moved = True
                break
        if not moved:
            log.debug("SMO stalled at violator %d", i)
            break
    bias = _bias(alpha, F, y, upper, eps)
    return alpha, bias, it, converged


def _take_step(i, j, K, diag, y, alpha, F, upper) -> bool:
    if i == j:
        return False
    yi, yj = y[i], y[j]
    ai, aj = alpha[i], alpha[j]
    Ci, Cj = upper[i], upper[j]
    if yi != yj:
        L, H = max(0.0, aj - ai), min(Cj, Ci + aj - ai)
    else:
        L, H = max(0.0, ai + aj - Ci), min(Cj, ai + aj)
    if H - L < 1e-15:
        return False
    eta = diag[i] + diag[j] - 2.0 * K[i, j]
    if eta > 1e-12:
        aj_new = aj + yj * (F[i] - F[j]) / eta
        aj_new = min(max(aj_new, L), H)
    else:
        # flat curvature (duplicate points): move to the improving end
        aj_new = H if yj * (F[i] - F[j]) > 0 else L
    if abs(aj_new - aj) < 1e-14 * max(1.0, aj + aj_new):
        return False
    ai_new = ai + yi * yj * (aj - aj_new)
    ai_new = min(max(ai_new, 0.0), Ci)
    dai, daj = ai_new - ai, aj_new - aj
    alpha[i], alpha[j] = ai_new, aj_new
    F += yi * dai * K[:, i] + yj * daj * K[:, j]
    return True


def _bias(alpha, F, y, upper, eps) -> float:
    free = (alpha > eps) & (alpha < upper - eps)
    if free.any():
        return float(np.mean(-F[free]))
    up = ((y > 0) & (alpha < upper - eps)) | ((y < 0) & (alpha > eps))
    low = ((y > 0) & (alpha > eps)) | ((y < 0) & (alpha < upper - eps))
    hi = np.max(-F[up]) if up.any() else np.min(-F[low])
    lo = np.min(-F[low]) if low.any() else hi
    return float((hi + lo) / 2.0)


def train_smo(X, y, hp: SvmHyperparams = SvmHyperparams(), seed: int = 0,
              positive_class=None) -> SvmModel:
    """Fit a binary SVM. ``y`` holds two distinct class labels of any type."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError(f"X shape {X.shape} does not match {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise ValueError("training matrix contains non-finite values")
    ys, label_map = _encode_labels(list(y), positive_class)
    gamma = gamma_scale(X) if hp.gamma == "scale" else float(hp.gamma)
    if hp.class_weight == "balanced":
        w = balanced_class_weights(list(ys))
        upper = np.array([hp.C * w[v] for v in ys])
    else:
        upper = np.full(len(ys), hp.C)
    K = rbf_kernel_matrix(X, X, gamma)
    alpha, bias, n_iter, converged = solve_dual(
        K, ys, upper, tol=hp.kkt_tolerance, max_iter=hp.max_passes * len(ys), seed=seed
    )
    if not converged:
        warnings.warn(f"SMO did not converge within {hp.max_passes} passes", ConvergenceWarning)
    sv = np.flatnonzero(alpha > 1e-12)
    if sv.size == 0:
        raise DegenerateDataError("training produced no support vectors")
    return SvmModel(
        support_vectors=X[sv].copy(),
        dual_coefs=alpha[sv] * ys[sv],
        bias=bias,
        gamma=gamma,
        label_map=label_map,
        converged=converged,
        n_iter=n_iter,
        dual_objective=dual_objective(alpha, ys, K),
        support_indices=sv,
    )


@dataclass(frozen=True)
class OneVsRestSvm:
    """Multi-class wrapper: one binary SVM per class, argmax decision value."""

    classes: tuple
    models: tuple

    @classmethod
    def fit(cls, X, y, hp: SvmHyperparams = SvmHyperparams(), seed: int = 0) -> "OneVsRestSvm":
        classes = tuple(sorted(set(y), key=str))
        if len(classes) < 2:
            raise ValueError("need at least 2 classes")
        models = []
        for c in classes:
            rest = ["__rest__" if v != c else c for v in y]
            models.append(train_smo(X, rest, hp, seed=seed, positive_class=c))
        return cls(classes, tuple(models))

    def decision_function(self, X) -> np.ndarray:
        cols = [np.atleast_1d(m.decision_function(X)) for m in self.models]
        return np.column_stack(cols)

    def predict(self, X):
        scores = self.decision_function(X)
        out = [self.classes[k] for k in np.argmax(scores, axis=1)]
        return out[0] if np.asarray(X).ndim == 1 else out

    def to_dict(self) -> dict:
        return {"format": OVR_FORMAT, "classes": list(self.classes),
                "models": [m.to_dict() for m in self.models]}

    @classmethod
    def from_dict(cls, obj: dict) -> "OneVsRestSvm":
        return cls(tuple(obj["classes"]), tuple(SvmModel.from_dict(m) for m in obj["models"]))
