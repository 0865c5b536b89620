"""Shapley attributions with background-substitution value functions.

The value of a coalition S is the mean model output over background rows in
which the columns in S are replaced by the explained sample's values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .features import feature_names as registry_names
from .synth import rng_for

MAX_EXACT = 12
MIN_PERMUTATIONS = 50
BACKGROUND_SIZE = 100
_CHUNK = 1 << 16


@dataclass
class Explanation:
    features: list[str]
    phi: np.ndarray
    base: float
    output: float
    class_index: int
    method: str
    se: np.ndarray | None = None
    n_permutations: int | None = None
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    def gap(self) -> float:
        """f(x) - base - sum(phi)."""
        return self.output - self.base - float(self.phi.sum())

    def to_dict(self) -> dict:
        d = {
            "base": self.base,
            "phi": {f: float(v) for f, v in zip(self.features, self.phi)},
            "se": {f: float(v) for f, v in zip(self.features, self.se)} if self.se is not None else None,
            "output": self.output,
            "class_index": self.class_index,
            "method": self.method,
        }
        if self.n_permutations is not None:
            d["n_permutations"] = self.n_permutations
            d["seed"] = self.seed
        return d


def output_fn(model, class_index: int | None, sample) -> tuple[Callable[[np.ndarray], np.ndarray], int]:
    """Scalar-output function for a model or callable.

    A TrainedModel (anything with ``predict_proba``) is explained through the
    probability of ``class_index``, defaulting to the class it predicts for
    the sample. A plain callable may return a vector or a probability matrix.
    """
    f = model.predict_proba if hasattr(model, "predict_proba") else model
    probe = np.asarray(f(np.asarray(sample, dtype=float)[None, :]), dtype=float)
    if probe.ndim == 1:
        return (lambda Z: np.asarray(f(Z), dtype=float).reshape(len(Z))), 0
    if class_index is None:
        class_index = int(probe[0].argmax())
    if not 0 <= class_index < probe.shape[1]:
        raise ValueError(f"class_index {class_index} outside 0..{probe.shape[1] - 1}")
    return (lambda Z: np.asarray(f(Z), dtype=float)[:, class_index]), class_index


def _eval(f, Z):
    if len(Z) <= _CHUNK:
        return f(Z)
    return np.concatenate([f(Z[i : i + _CHUNK]) for i in range(0, len(Z), _CHUNK)])


def _prepare(background, sample, names):
    B = np.atleast_2d(np.asarray(background, dtype=float))
    x = np.asarray(sample, dtype=float).ravel()
    if B.shape[0] == 0:
        raise ValueError("background must contain at least one row")
    if B.shape[1] != len(x):
        raise ValueError("background and sample have different widths")
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(len(x))]
    if len(names) != len(x):
        raise ValueError("names length differs from feature count")
    return B, x, names


def background_rows(X, n: int = BACKGROUND_SIZE, seed: int = 0) -> np.ndarray:
    """Fixed-seed subsample of at most n rows, kept in original order."""
    X = np.asarray(X, dtype=float)
    if len(X) <= n:
        return X.copy()
    keep = np.sort(rng_for(seed, 1).choice(len(X), size=n, replace=False))
    return X[keep]


def shapley_exact(model, background, sample, class_index: int | None = None, names: Sequence[str] | None = None) -> Explanation:
    """Enumerate all 2^p coalitions (p <= 12)."""
    B, x, names = _prepare(background, sample, names)
    p = len(x)
    if p > MAX_EXACT:
        raise ValueError(f"exact enumeration supports at most {MAX_EXACT} features, got {p}; use shapley_sampled")
    f, ci = output_fn(model, class_index, x)
    masks = np.arange(1 << p)
    bits = ((masks[:, None] >> np.arange(p)[None, :]) & 1).astype(bool)
    Z = np.where(bits[:, None, :], x[None, None, :], B[None, :, :]).reshape(-1, p)
    v = _eval(f, Z).reshape(len(masks), len(B)).mean(1)
    size = bits.sum(1)
    w = np.array([math.factorial(s) * math.factorial(p - s - 1) / math.factorial(p) if s < p else 0.0 for s in size])
    phi = np.zeros(p)
    for j in range(p):
        without = masks[~bits[:, j]]
        phi[j] = float(np.sum(w[without] * (v[without | (1 << j)] - v[without])))
    return Explanation(names, phi, float(v[0]), float(v[-1]), ci, "exact", se=np.zeros(p))


def shapley_sampled(
    model,
    background,
    sample,
    class_index: int | None = None,
    n_permutations: int = 200,
    seed: int = 0,
    names: Sequence[str] | None = None,
) -> Explanation:
    """Permutation estimator with per-feature standard errors.

    Each permutation's marginal contributions telescope to f(x) - base, so
    the estimate is efficient exactly; permutation t draws from its own
    substream of ``seed``.
    """
    if n_permutations < MIN_PERMUTATIONS:
        raise ValueError(f"n_permutations must be at least {MIN_PERMUTATIONS}")
    B, x, names = _prepare(background, sample, names)
    p = len(x)
    f, ci = output_fn(model, class_index, x)
    base = float(_eval(f, B).mean())
    out = float(f(x[None, :])[0])
    contrib = np.empty((n_permutations, p))
    nb = len(B)
    for t in range(n_permutations):
        order = rng_for(seed, t).permutation(p)
        Z = np.repeat(B[None], p, axis=0)
        for k in range(p):
            Z[k:, :, order[k]] = x[order[k]]
        v = np.concatenate([[base], _eval(f, Z.reshape(-1, p)).reshape(p, nb).mean(1)])
        # the last coalition is the full sample whatever the background
        v[-1] = out
        contrib[t, order] = np.diff(v)
    phi = contrib.mean(0)
    se = contrib.std(0, ddof=1) / math.sqrt(n_permutations)
    return Explanation(names, phi, base, out, ci, "sampled", se=se, n_permutations=n_permutations, seed=seed)


def aggregate_importance(explanations: Sequence[Explanation], top_k: int | None = None) -> list[tuple[str, float]]:
    """Mean |phi| per feature, descending; ties keep registry (then listed) order."""
    if not explanations:
        raise ValueError("need at least one explanation")
    feats = explanations[0].features
    for e in explanations[1:]:
        if e.features != feats:
            raise ValueError("explanations have inconsistent feature sets")
    mean_abs = np.mean([np.abs(e.phi) for e in explanations], axis=0)
    reg = {n: i for i, n in enumerate(registry_names(("A", "B", "C", "W")))}
    order = sorted(range(len(feats)), key=lambda j: (-mean_abs[j], reg.get(feats[j], len(reg)), j))
    ranked = [(feats[j], float(mean_abs[j])) for j in order]
    return ranked[:top_k] if top_k is not None else ranked


def importance_csv(ranked: list[tuple[str, float]]) -> str:
    lines = ["rank,feature,mean_abs_phi"]
    lines += [f"{i},{n},{v!r}" for i, (n, v) in enumerate(ranked, 1)]
    return "\n".join(lines) + "\n"
