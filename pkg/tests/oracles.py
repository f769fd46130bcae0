"""Independent reference implementations used only by the tests."""

import numpy as np


def project_box_hyperplane(v, y, upper):
    """Euclidean projection onto {0 <= a <= upper, y.a = 0}.

    a(lam) = clip(v - lam*y, 0, upper) and g(lam) = y.a(lam) is piecewise
    linear and non-increasing, so the root is found exactly between two
    sorted breakpoints.
    """
    def g(lam):
        return y @ np.clip(v - lam * y, 0.0, upper)

    bps = np.unique(np.concatenate([v * y, (v - upper) * y]))
    vals = np.array([g(b) for b in bps])
    if vals[0] < 0:
        lam = bps[0]
    elif vals[-1] > 0:
        lam = bps[-1]
    else:
        k = int(np.searchsorted(-vals, 0.0))
        if vals[k] == 0 or k == 0:
            lam = bps[k]
        else:
            lo, hi = bps[k - 1], bps[k]
            glo, ghi = vals[k - 1], vals[k]
            lam = lo + (hi - lo) * glo / (glo - ghi)
    return np.clip(v - lam * y, 0.0, upper)


def pgd_dual(K, y, upper, iters=50000, tol=1e-13):
    """Projected gradient ascent (FISTA) on the SVM dual. Returns (alpha, objective)."""
    Q = (y[:, None] * y[None, :]) * K
    step = 1.0 / max(np.linalg.eigvalsh(Q)[-1], 1e-12)
    a = np.zeros(len(y))
    z, t = a.copy(), 1.0
    for _ in range(iters):
        grad = 1.0 - Q @ z
        a_next = project_box_hyperplane(z + step * grad, y, upper)
        t_next = (1 + np.sqrt(1 + 4 * t * t)) / 2
        z = a_next + (t - 1) / t_next * (a_next - a)
        if np.max(np.abs(a_next - a)) < tol:
            a = a_next
            break
        a, t = a_next, t_next
    return a, float(a.sum() - 0.5 * a @ Q @ a)


def naive_confusion(gold, pred, classes):
    counts = [[0] * len(classes) for _ in classes]
    for g, p in zip(gold, pred):
        counts[classes.index(g)][classes.index(p)] += 1
    return counts


def naive_macro(gold, pred, classes):
    """Per-class P/R/F1/F2 by explicit loops; 0/0 -> 0."""
    def div(a, b):
        return a / b if b else 0.0

    rows = {}
    for c in classes:
        tp = sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        fp = sum(1 for g, p in zip(gold, pred) if g != c and p == c)
        fn = sum(1 for g, p in zip(gold, pred) if g == c and p != c)
        prec, rec = div(tp, tp + fp), div(tp, tp + fn)
        f1 = div(2 * prec * rec, prec + rec)
        f2 = div(5 * prec * rec, 4 * prec + rec)
        rows[c] = (prec, rec, f1, f2)
    k = len(classes)
    macro = tuple(sum(rows[c][m] for c in classes) / k for m in range(4)) if k else (0.0,) * 4
    acc = div(sum(1 for g, p in zip(gold, pred) if g == p), len(gold))
    return rows, macro, acc


def dual_bias(alpha, y, K, upper, eps=1e-7):
    """Bias from a dual solution: mean over free multipliers, else midpoint of the feasible interval."""
    f0 = K @ (alpha * y)
    free = (alpha > eps) & (alpha < upper - eps)
    if free.any():
        return float(np.mean(y[free] - f0[free]))
    # b >= y - f0 where y*f must be >= 1 (alpha=0, y=+1 or alpha=C, y=-1), etc.
    lower_b, upper_b = [], []
    for t in range(len(y)):
        at_zero = alpha[t] <= eps
        r = y[t] - f0[t]
        if (y[t] > 0) == at_zero:
            lower_b.append(r)
        else:
            upper_b.append(r)
    lo = max(lower_b) if lower_b else min(upper_b)
    hi = min(upper_b) if upper_b else max(lower_b)
    return (lo + hi) / 2
