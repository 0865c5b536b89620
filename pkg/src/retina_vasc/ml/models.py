"""Classifier roster: KNC, DTC, RFC, XGB, ABC, GNB, QDA, LR.

Every model takes rows already imputed and scaled. Labels may be any sortable
ids; probability columns follow the sorted label order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from ..synth import rng_for
from . import _tree

MODEL_IDS = ("KNC", "XGB", "RFC", "DTC", "GNB", "ABC", "QDA", "LR")
REJECTED_MODELS = {
    "MLP": "multi-layer perceptron is not implemented",
    "GPC": "Gaussian process classifier is not implemented",
    "SVC": "support vector classifier is not implemented",
}


class InvalidParams(ValueError):
    """A hyperparameter value outside the model's domain."""


class UnsupportedModel(ValueError):
    pass


# --------------------------------------------------------------------------- parameter domains


def _int_at_least(lo):
    def check(v):
        return isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v >= lo

    return check


def _positive(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0


def _nonneg(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v >= 0


def _depth(v):
    return v is None or _int_at_least(1)(v)


def _one_of(*opts):
    return lambda v: v in opts


PARAMS: dict[str, dict[str, tuple[Any, Callable[[Any], bool]]]] = {
    "KNC": {
        "n_neighbors": (5, _int_at_least(1)),
        "weights": ("uniform", _one_of("uniform", "distance")),
        # exact brute-force search is used for every value
        "algorithm": ("auto", _one_of("auto", "ball tree", "kd tree", "ball_tree", "kd_tree", "brute")),
    },
    "DTC": {
        "max_depth": (None, _depth),
        "min_samples_split": (2, _int_at_least(2)),
        "criterion": ("gini", _one_of("gini", "entropy")),
    },
    "RFC": {
        "n_estimators": (100, _int_at_least(1)),
        "max_depth": (None, _depth),
        "min_samples_split": (2, _int_at_least(2)),
        "criterion": ("gini", _one_of("gini", "entropy")),
    },
    "XGB": {
        "learning_rate": (0.3, _positive),
        "n_estimators": (100, _int_at_least(1)),
        "max_depth": (6, _int_at_least(1)),
        "reg_lambda": (1.0, _nonneg),
        "min_child_weight": (1.0, _nonneg),
    },
    "ABC": {
        "n_estimators": (50, _int_at_least(1)),
        "learning_rate": (1.0, _positive),
    },
    "GNB": {"var_smoothing": (1e-9, _nonneg)},
    "QDA": {"tol": (1e-4, _positive)},
    "LR": {"C": (1.0, _positive), "max_iter": (100, _int_at_least(1))},
}

# models whose n_estimators prefix equals the smaller model exactly
STAGED = {"RFC", "XGB", "ABC"}


def check_params(model_id: str, params: dict) -> dict:
    """Validate and complete a hyperparameter dict with defaults."""
    if model_id in REJECTED_MODELS:
        raise UnsupportedModel(f"{model_id}: {REJECTED_MODELS[model_id]}")
    if model_id not in PARAMS:
        raise UnsupportedModel(f"unknown model {model_id!r}; expected one of {', '.join(MODEL_IDS)}")
    dom = PARAMS[model_id]
    unknown = sorted(set(params) - set(dom))
    if unknown:
        raise InvalidParams(f"{model_id}: unknown hyperparameter(s) {', '.join(unknown)}")
    out = {}
    for name, (default, ok) in dom.items():
        v = params.get(name, default)
        if isinstance(v, float) and v.is_integer() and isinstance(default, int) and not isinstance(default, bool):
            v = int(v)
        if not ok(v):
            raise InvalidParams(f"{model_id}: invalid {name}={v!r}")
        out[name] = v
    return out


# --------------------------------------------------------------------------- helpers


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def leaves(self, X):
        return _tree.apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def predict(self, X):
        return self.value[self.leaves(X)]


def _criterion(name):
    return _tree.GINI if name == "gini" else _tree.ENTROPY


def _grow(X, y, w, k, max_depth, mss, max_features, criterion, seed):
    return _Tree(
        *_tree.grow_classifier(
            X, y, w, k, -1 if max_depth is None else int(max_depth), int(mss), int(max_features),
            _criterion(criterion), int(seed),
        )
    )


def _seed32(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


# --------------------------------------------------------------------------- estimators
# Each estimator works on class indices 0..k-1 and exposes fit / proba, plus
# staged_proba for the ensembles.


class _KNC:
    def __init__(self, n_neighbors, weights, algorithm, **_):
        self.n_neighbors = n_neighbors
        self.weights = weights

    def fit(self, X, y, k, seed):
        self.X, self.y, self.k = X, y, k
        return self

    def proba(self, X):
        kk = min(self.n_neighbors, len(self.X))
        d2 = (X * X).sum(1)[:, None] - 2 * X @ self.X.T + (self.X * self.X).sum(1)[None, :]
        d = np.sqrt(np.maximum(d2, 0.0))
        nn = np.argsort(d, axis=1, kind="stable")[:, :kk]
        nd = np.take_along_axis(d, nn, axis=1)
        if self.weights == "uniform":
            w = np.ones_like(nd)
        else:
            with np.errstate(divide="ignore"):
                w = 1.0 / nd
            zero = nd == 0
            hit = zero.any(1)
            w[hit] = zero[hit].astype(float)
        P = np.zeros((len(X), self.k))
        np.add.at(P, (np.repeat(np.arange(len(X)), kk), self.y[nn].ravel()), w.ravel())
        return P / P.sum(1, keepdims=True)


class _DTC:
    def __init__(self, max_depth, min_samples_split, criterion, **_):
        self.p = (max_depth, min_samples_split, criterion)

    def fit(self, X, y, k, seed):
        md, mss, crit = self.p
        self.tree = _grow(X, y, np.ones(len(y)), k, md, mss, X.shape[1], crit, _seed32(rng_for(seed)))
        return self

    def proba(self, X):
        return self.tree.predict(X)


class _RFC:
    def __init__(self, n_estimators, max_depth, min_samples_split, criterion, **_):
        self.n = n_estimators
        self.p = (max_depth, min_samples_split, criterion)

    def fit(self, X, y, k, seed):
        md, mss, crit = self.p
        n, p = X.shape
        mf = max(1, int(math.sqrt(p)))
        self.trees = []
        for t in range(self.n):
            # tree t depends only on (seed, t), so forests nest by size
            rng = rng_for(seed, t)
            boot = rng.integers(0, n, n)
            w = np.bincount(boot, minlength=n).astype(float)
            keep = w > 0
            self.trees.append(_grow(X[keep], y[keep], w[keep], k, md, mss, mf, crit, _seed32(rng)))
        return self

    def staged_proba(self, X, sizes):
        acc = np.zeros((len(X), self.trees[0].value.shape[1]))
        out, want = {}, set(sizes)
        for i, t in enumerate(self.trees, 1):
            acc += t.predict(X)
            if i in want:
                out[i] = acc / i
        return out

    def proba(self, X):
        return self.staged_proba(X, [self.n])[self.n]


class _XGB:
    def __init__(self, learning_rate, n_estimators, max_depth, reg_lambda, min_child_weight, **_):
        self.eta = float(learning_rate)
        self.n = n_estimators
        self.depth = max_depth
        self.lam = float(reg_lambda)
        self.mcw = float(min_child_weight)

    def fit(self, X, y, k, seed):
        n = len(y)
        Y = np.eye(k)[y]
        F = np.full((n, k), 0.5)
        self.k = k
        self.rounds = []
        for _ in range(self.n):
            P = softmax(F, axis=1)
            G = P - Y
            H = np.maximum(2.0 * P * (1.0 - P), 1e-16)
            trees = []
            for c in range(k):
                t = _Tree(*_tree.grow_newton(X, G[:, c].copy(), H[:, c].copy(), self.depth, self.lam, self.mcw, self.eta))
                F[:, c] += t.value[t.leaves(X), 0]
                trees.append(t)
            self.rounds.append(trees)
        return self

    def staged_proba(self, X, sizes):
        F = np.full((len(X), self.k), 0.5)
        out, want = {}, set(sizes)
        for i, trees in enumerate(self.rounds, 1):
            for c, t in enumerate(trees):
                F[:, c] += t.value[t.leaves(X), 0]
            if i in want:
                out[i] = softmax(F, axis=1)
        return out

    def proba(self, X):
        return self.staged_proba(X, [self.n])[self.n]


class _ABC:
    """SAMME boosting of depth-1 trees."""

    def __init__(self, n_estimators, learning_rate, **_):
        self.n = n_estimators
        self.lr = float(learning_rate)

    def fit(self, X, y, k, seed):
        n = len(y)
        w = np.full(n, 1.0 / n)
        rng = rng_for(seed)
        self.k = k
        self.stumps, self.alphas = [], []
        for _ in range(self.n):
            t = _grow(X, y, w, k, 1, 2, X.shape[1], "gini", _seed32(rng))
            pred = t.predict(X).argmax(1)
            miss = pred != y
            err = float(w[miss].sum() / w.sum())
            if err <= 0:
                self.stumps.append(t)
                self.alphas.append(1.0)
                break
            if err >= 1.0 - 1.0 / k:
                if not self.stumps:
                    self.stumps.append(t)
                    self.alphas.append(1.0)
                break
            a = self.lr * (math.log((1 - err) / err) + math.log(k - 1))
            self.stumps.append(t)
            self.alphas.append(a)
            w = w * np.exp(a * miss)
            w /= w.sum()
        return self

    def staged_proba(self, X, sizes):
        votes = np.zeros((len(X), self.k))
        tot = 0.0
        out = {}
        last = None
        for i, (t, a) in enumerate(zip(self.stumps, self.alphas), 1):
            votes[np.arange(len(X)), t.predict(X).argmax(1)] += a
            tot += a
            last = softmax(votes / tot / (self.k - 1), axis=1)
            if i in sizes:
                out[i] = last
        # early stop: larger ensembles equal the truncated one
        for s in sizes:
            out.setdefault(s, last)
        return out

    def proba(self, X):
        return self.staged_proba(X, [self.n])[self.n]


class _GNB:
    def __init__(self, var_smoothing, **_):
        self.vs = float(var_smoothing)

    def fit(self, X, y, k, seed):
        eps = self.vs * float(np.var(X, axis=0).max())
        self.mu = np.array([X[y == c].mean(0) for c in range(k)])
        self.var = np.array([X[y == c].var(0) for c in range(k)]) + eps
        if (self.var <= 0).any():
            self.var = np.maximum(self.var, np.finfo(float).tiny)
        self.logprior = np.log(np.bincount(y, minlength=k) / len(y))
        return self

    def proba(self, X):
        ll = -0.5 * (
            np.log(2 * np.pi * self.var).sum(1)[None, :]
            + (((X[:, None, :] - self.mu[None]) ** 2) / self.var[None]).sum(2)
        )
        return softmax(ll + self.logprior, axis=1)


class _QDA:
    """Per-class Gaussian with full covariance; eigenvalues floored at tol * largest."""

    def __init__(self, tol, **_):
        self.tol = float(tol)

    def fit(self, X, y, k, seed):
        pooled = np.atleast_2d(np.cov(X, rowvar=False)) if len(X) > 1 else np.eye(X.shape[1])
        self.mu, self.rot, self.scale = [], [], []
        for c in range(k):
            Xc = X[y == c]
            S = np.atleast_2d(np.cov(Xc, rowvar=False)) if len(Xc) > 1 else pooled
            ev, U = np.linalg.eigh(S)
            top = max(float(ev.max()), float(np.abs(pooled).max()), 1e-12)
            ev = np.maximum(ev, self.tol * top)
            self.mu.append(Xc.mean(0))
            self.rot.append(U)
            self.scale.append(ev)
        self.logprior = np.log(np.bincount(y, minlength=k) / len(y))
        return self

    def proba(self, X):
        ll = np.empty((len(X), len(self.mu)))
        for c, (mu, U, ev) in enumerate(zip(self.mu, self.rot, self.scale)):
            z = (X - mu) @ U
            ll[:, c] = -0.5 * ((z * z / ev).sum(1) + np.log(ev).sum()) + self.logprior[c]
        return softmax(ll, axis=1)


class _LR:
    """Multinomial logistic regression: minimise 0.5*||W||^2 + C * cross-entropy."""

    def __init__(self, C, max_iter, **_):
        self.C = float(C)
        self.max_iter = int(max_iter)

    def fit(self, X, y, k, seed):
        n, p = X.shape
        Y = np.eye(k)[y]
        A = np.column_stack([X, np.ones(n)])

        def f(theta):
            W = theta.reshape(p + 1, k)
            Z = A @ W
            lse = logsumexp(Z, axis=1)
            loss = self.C * float((lse - (Z * Y).sum(1)).sum()) + 0.5 * float((W[:p] ** 2).sum())
            P = np.exp(Z - lse[:, None])
            grad = self.C * (A.T @ (P - Y))
            grad[:p] += W[:p]
            return loss, grad.ravel()

        res = minimize(f, np.zeros((p + 1) * k), jac=True, method="L-BFGS-B",
                       options={"maxiter": self.max_iter, "gtol": 1e-6})
        self.W = res.x.reshape(p + 1, k)
        self.converged = bool(res.success)
        return self

    def proba(self, X):
        return softmax(np.column_stack([X, np.ones(len(X))]) @ self.W, axis=1)


_IMPL = {"KNC": _KNC, "DTC": _DTC, "RFC": _RFC, "XGB": _XGB, "ABC": _ABC, "GNB": _GNB, "QDA": _QDA, "LR": _LR}


# --------------------------------------------------------------------------- public API


@dataclass
class TrainedModel:
    model_id: str
    params: dict
    seed: int
    classes: list
    n_features: int
    state: Any = field(repr=False, default=None)

    def predict_proba(self, X) -> np.ndarray:
        return predict_proba(self, X)

    def predict(self, X) -> np.ndarray:
        return np.asarray(self.classes)[self.predict_proba(X).argmax(1)]

    def spec(self) -> dict:
        """JSON-safe description sufficient to refit this model."""
        return {"model_id": self.model_id, "params": dict(self.params), "seed": self.seed, "classes": list(self.classes)}


def _check_X(X, n_features=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d array")
    bad = ~np.isfinite(X)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValueError(f"non-finite feature value at row {int(r)}, column {int(c)}")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} columns, got {X.shape[1]}")
    return X


def _encode(y):
    y = np.asarray(y)
    classes = sorted(set(y.tolist()))
    if len(classes) < 2:
        raise ValueError("training labels contain a single class")
    lookup = {c: i for i, c in enumerate(classes)}
    return np.array([lookup[v] for v in y.tolist()], dtype=np.int64), classes


def fit(model_id: str, params: dict, X, y, seed: int = 0) -> TrainedModel:
    params = check_params(model_id, params)
    X = _check_X(X)
    yi, classes = _encode(y)
    if len(yi) != len(X):
        raise ValueError("X and y lengths differ")
    est = _IMPL[model_id](**params).fit(np.ascontiguousarray(X), yi, len(classes), seed)
    return TrainedModel(model_id, params, int(seed), [c.item() if hasattr(c, "item") else c for c in classes], X.shape[1], est)


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    X = _check_X(X, model.n_features)
    P = model.state.proba(np.ascontiguousarray(X))
    return _normalize(P)


def _normalize(P):
    P = np.clip(P, 0.0, 1.0)
    return P / P.sum(1, keepdims=True)


def staged_predict_proba(model: TrainedModel, X, sizes) -> dict[int, np.ndarray]:
    """Probabilities of the sub-ensembles with the given n_estimators.

    Only for models in STAGED; each entry equals what a model fitted with that
    ``n_estimators`` (all else equal) would return.
    """
    if model.model_id not in STAGED:
        raise ValueError(f"{model.model_id} has no staged predictions")
    sizes = sorted(set(int(s) for s in sizes))
    if sizes and sizes[-1] > model.params["n_estimators"]:
        raise ValueError("requested more estimators than were fitted")
    X = _check_X(X, model.n_features)
    raw = model.state.staged_proba(np.ascontiguousarray(X), sizes)
    return {s: _normalize(raw[s]) for s in sizes}
