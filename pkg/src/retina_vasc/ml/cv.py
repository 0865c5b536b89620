"""Stratified folds, grid search, nested cross-validation and test evaluation."""

from __future__ import annotations

import math
import time
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .._parallel import ordered_map
from ..features import FeatureTable, Preprocessor
from ..synth import rng_for
from . import models as M
from .grids import ModelSpec
from .metrics import roc_auc_weighted_ovr


class StratificationError(ValueError):
    def __init__(self, deficient: dict, k: int):
        self.deficient = deficient
        self.k = k
        cls = ", ".join(f"{c} ({n} members)" for c, n in deficient.items())
        super().__init__(f"cannot build {k} stratified folds; classes with too few members: {cls}")


class LeakageError(ValueError):
    def __init__(self, ids):
        self.ids = sorted(ids)
        shown = ", ".join(self.ids[:10]) + (" ..." if len(self.ids) > 10 else "")
        super().__init__(f"{len(self.ids)} image_id(s) appear in both train and test: {shown}")


# --------------------------------------------------------------------------- folds


def feasible_folds(y, k: int, reduce: bool = False) -> tuple[int, str | None]:
    """Fold count usable for stratification, and a note when it was reduced."""
    counts = Counter(np.asarray(y).tolist())
    smallest = min(counts.values())
    if smallest >= k:
        return k, None
    if not reduce or smallest < 2:
        need = k if not reduce else 2
        raise StratificationError({c: n for c, n in sorted(counts.items()) if n < need}, need)
    note = f"reduced folds from {k} to {smallest}: smallest class has {smallest} members"
    warnings.warn(note, stacklevel=3)
    return smallest, note


def stratified_kfold(y, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffle each class, then deal members round-robin across folds.

    The dealing position carries over between classes so fold sizes differ
    by at most one.
    """
    y = np.asarray(y)
    k, _ = feasible_folds(y, k)
    if k < 2:
        raise ValueError("need at least 2 folds")
    fold = np.empty(len(y), dtype=np.int64)
    pos = 0
    for ci, c in enumerate(sorted(set(y.tolist()))):
        members = np.flatnonzero(y == c)
        members = members[rng_for(seed, ci).permutation(len(members))]
        fold[members] = (pos + np.arange(len(members))) % k
        pos = (pos + len(members)) % k
    idx = np.arange(len(y))
    return [(idx[fold != f], idx[fold == f]) for f in range(k)]


# --------------------------------------------------------------------------- grid search


@dataclass
class GridResult:
    best_params: dict
    best_score: float
    scores: list[dict]
    skipped: list[dict]
    k: int
    notes: list[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "best_params": self.best_params,
            "best_score": self.best_score,
            "k": self.k,
            "scores": self.scores,
            "skipped": self.skipped,
            "notes": self.notes,
        }


def _score(model, X, y):
    return roc_auc_weighted_ovr(y, M.predict_proba(model, X), classes=model.classes)


def _groups(model_id, points):
    """Bundle points that differ only in n_estimators, for prefix sharing."""
    if model_id not in M.STAGED:
        return [(pt, [i]) for i, pt in enumerate(points)]
    out: dict[tuple, tuple[dict, list[int]]] = {}
    for i, pt in enumerate(points):
        key = tuple(sorted((k, repr(v)) for k, v in pt.items() if k != "n_estimators"))
        if key not in out:
            out[key] = (dict(pt), [])
        out[key][1].append(i)
        n = M.check_params(model_id, pt)["n_estimators"]
        top = M.check_params(model_id, out[key][0])["n_estimators"]
        if n > top:
            out[key][0]["n_estimators"] = n
    return list(out.values())


def grid_search(
    spec: ModelSpec,
    X,
    y,
    k_inner: int = 4,
    seed: int = 0,
    threads: int | None = None,
    reduce_folds: bool = False,
) -> GridResult:
    """Arg-max of mean weighted OvR AUC over stratified folds.

    Ties go to the earliest point in grid enumeration order. Points the model
    rejects (e.g. ``min_samples_split = 1``) are skipped with a warning.
    """
    if not spec.runnable:
        raise M.UnsupportedModel(f"{spec.model_id}: {M.REJECTED_MODELS.get(spec.model_id, 'not runnable')}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    points, skipped = spec.valid_points()
    for pt, why in skipped:
        warnings.warn(f"skipping grid point {pt}: {why}", stacklevel=2)
    if not points:
        raise M.InvalidParams(f"{spec.model_id}: no valid grid points")
    k, note = feasible_folds(y, k_inner, reduce=reduce_folds)
    folds = stratified_kfold(y, k, seed)
    groups = _groups(spec.model_id, points)

    def unit(job):
        (fit_pt, members), (tr, te) = job
        model = M.fit(spec.model_id, fit_pt, X[tr], y[tr], seed=seed)
        if spec.model_id in M.STAGED:
            sizes = {i: M.check_params(spec.model_id, points[i])["n_estimators"] for i in members}
            staged = M.staged_predict_proba(model, X[te], list(sizes.values()))
            return {i: roc_auc_weighted_ovr(y[te], staged[sizes[i]], classes=model.classes) for i in members}
        return {members[0]: _score(model, X[te], y[te])}

    jobs = [(g, f) for g in groups for f in folds]
    results = ordered_map(unit, jobs, threads)
    per_point = [[math.nan] * k for _ in points]
    for j, res in enumerate(results):
        f = j % k
        for i, s in res.items():
            per_point[i][f] = s
    scores = []
    best_i, best = 0, -math.inf
    for i, pt in enumerate(points):
        m = float(np.mean(per_point[i]))
        scores.append({"params": pt, "mean": m, "folds": per_point[i]})
        if m > best:
            best_i, best = i, m
    return GridResult(
        best_params=dict(points[best_i]),
        best_score=best,
        scores=scores,
        skipped=[{"params": pt, "reason": why} for pt, why in skipped],
        k=k,
        notes=[note] if note else [],
    )


# --------------------------------------------------------------------------- reports


def _dot(v: float, nd: int = 3) -> str:
    s = f"{v:.{nd}f}"
    if s.startswith("0."):
        return s[1:]
    if s.startswith("-0."):
        return "-" + s[2:]
    return s


def format_mean_std(mean: float, std: float) -> str:
    """``.986±.027``: three decimals, leading zero dropped."""
    return f"{_dot(mean)}±{_dot(std)}"


def format_minutes(minutes: float | None) -> str:
    return "-" if minutes is None else _dot(minutes)


@dataclass
class EvalReport:
    model_id: str
    fold_scores: list[float]
    mean: float
    std: float
    fold_params: list[dict]
    k_outer: int
    k_inner: int
    seed: int
    test_score: float | None = None
    final_params: dict | None = None
    train_time_min: float | None = None
    notes: list[str] = field(default_factory=list)

    @classmethod
    def from_folds(cls, model_id, fold_scores, fold_params, k_outer, k_inner, seed, **kw) -> "EvalReport":
        a = np.asarray(fold_scores, dtype=float)
        return cls(model_id, [float(s) for s in a], float(a.mean()), float(a.std()), fold_params, k_outer, k_inner, seed, **kw)

    @property
    def train_perf(self) -> str:
        return format_mean_std(self.mean, self.std)

    def check(self):
        a = np.asarray(self.fold_scores)
        if abs(a.mean() - self.mean) > 1e-12 or abs(a.std() - self.std) > 1e-12:
            raise AssertionError("stored mean/std disagree with fold scores")
        if self.test_score is not None and not 0.0 <= self.test_score <= 1.0:
            raise AssertionError("test score outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "fold_scores": self.fold_scores,
            "mean": self.mean,
            "std": self.std,
            "train_perf": self.train_perf,
            "fold_params": self.fold_params,
            "k_outer": self.k_outer,
            "k_inner": self.k_inner,
            "seed": self.seed,
            "test_score": self.test_score,
            "final_params": self.final_params,
            "train_time_min": self.train_time_min,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        d = {k: v for k, v in d.items() if k != "train_perf"}
        return cls(**d)


# --------------------------------------------------------------------------- nested CV


def nested_cv(
    spec: ModelSpec,
    X,
    y,
    k_outer: int = 6,
    k_inner: int = 4,
    seed: int = 0,
    threads: int | None = None,
    timed: bool = True,
) -> EvalReport:
    """Outer folds estimate performance; each outer-train part runs its own grid search.

    Imputer and scaler are fitted on the outer-train rows only.
    """
    t0 = time.perf_counter()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    notes = list(spec.notes)
    ko, note = feasible_folds(y, k_outer, reduce=True)
    if note:
        notes.append("outer: " + note)
    scores, chosen = [], []
    for f, (tr, te) in enumerate(stratified_kfold(y, ko, seed)):
        prep = Preprocessor.fit(X[tr])
        Xtr, Xte = prep.transform(X[tr]), prep.transform(X[te])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            g = grid_search(spec, Xtr, y[tr], k_inner, seed=seed, threads=threads, reduce_folds=True)
        for n in g.notes:
            notes.append(f"outer fold {f}: inner {n}")
        del caught
        model = M.fit(spec.model_id, g.best_params, Xtr, y[tr], seed=seed)
        scores.append(_score(model, Xte, y[te]))
        chosen.append(g.best_params)
    elapsed = (time.perf_counter() - t0) / 60.0 if timed else None
    _, skipped = spec.valid_points()
    if skipped:
        notes.append(f"{len(skipped)} invalid grid point(s) skipped")
    return EvalReport.from_folds(spec.model_id, scores, chosen, ko, k_inner, seed, train_time_min=elapsed, notes=notes)


def rank_top(reports: list[EvalReport], k: int = 4) -> list[EvalReport]:
    """Best k by outer mean; equal means keep input order."""
    return sorted(reports, key=lambda r: -r.mean)[:k]


def check_disjoint(train: FeatureTable, test: FeatureTable) -> None:
    overlap = set(train.ids()) & set(test.ids())
    if overlap:
        raise LeakageError(overlap)


def evaluate_test(
    reports: list[EvalReport],
    specs: dict[str, ModelSpec],
    train: FeatureTable,
    test: FeatureTable,
    k_inner: int = 4,
    seed: int = 0,
    threads: int | None = None,
) -> list[EvalReport]:
    """Refit each model on all training rows and score the test rows.

    Final hyperparameters come from a grid search over the full training
    part (same inner folds and tie rule as nested CV). Returned reports are
    ranked by test score, ties kept in input order.
    """
    check_disjoint(train, test)
    if train.feature_names != test.feature_names:
        raise ValueError("train and test tables have different feature columns")
    Xtr_raw, ytr = train.matrix(), train.grades()
    prep = Preprocessor.fit(Xtr_raw)
    Xtr, Xte = prep.transform(Xtr_raw), prep.transform(test.matrix())
    yte = test.grades()
    out = []
    for rep in reports:
        spec = specs[rep.model_id]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            g = grid_search(spec, Xtr, ytr, k_inner, seed=seed, threads=threads, reduce_folds=True)
        model = M.fit(spec.model_id, g.best_params, Xtr, ytr, seed=seed)
        P = M.predict_proba(model, Xte)
        score = roc_auc_weighted_ovr(yte, P, classes=model.classes)
        new = EvalReport(**{**rep.__dict__, "notes": list(rep.notes)})
        new.test_score = float(score)
        new.final_params = dict(g.best_params)
        out.append(new)
    return sorted(out, key=lambda r: -r.test_score)
