"""Rank-based ROC-AUC."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.stats import rankdata


def roc_auc_binary(labels, scores) -> float:
    """Mann-Whitney AUC: P(s+ > s-) + 0.5 P(tie), via midranks.

    ``labels`` are truthy for the positive class.
    """
    y = np.asarray(labels).astype(bool)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError("labels and scores must be 1-d and the same length")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    r = rankdata(s)
    # midranks are multiples of 0.5, so the sum is exact in float for n <= 2**40
    u = float(r[y].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def roc_auc_weighted_ovr(labels, proba, classes=None) -> float:
    """Support-weighted mean of one-vs-rest AUCs.

    ``classes`` names the probability columns (default: sorted labels, which
    requires every class to appear). Classes absent from ``labels`` are
    dropped with a warning and the weights renormalised.
    """
    y = np.asarray(labels)
    P = np.asarray(proba, dtype=float)
    if classes is None:
        classes = sorted(set(y.tolist()))
    classes = list(classes)
    if P.ndim != 2 or P.shape != (len(y), len(classes)):
        raise ValueError(f"probability matrix must be {len(y)}x{len(classes)}")
    present = [c for c in classes if (y == c).any()]
    if len(present) < 2:
        raise ValueError("weighted OvR AUC needs at least 2 classes present")
    missing = [c for c in classes if c not in present]
    if missing:
        warnings.warn(f"classes absent from labels, excluded from the average: {missing}", stacklevel=2)
    total, acc = 0, 0.0
    for j, c in enumerate(classes):
        pos = y == c
        k = int(pos.sum())
        if k == 0:
            continue
        acc += k * roc_auc_binary(pos, P[:, j])
        total += k
    return acc / total
