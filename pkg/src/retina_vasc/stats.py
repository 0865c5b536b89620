"""Least squares, stepwise selection and variance inflation factors.

Grades are treated as a numeric response; this is association analysis, not
classification.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sps

# relative tolerance for deciding a column lies in the span of others
RANK_TOL = 1e-10
PERFECT_FIT = 1e-20


class CollinearityError(ValueError):
    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        super().__init__(f"design is rank deficient; dependent columns: {', '.join(self.columns)}")


@dataclass
class RegressionReport:
    selected_features: list[str]
    coefficients: dict[str, float]
    intercept: float
    r_squared: float
    f_statistic: tuple[float, int, int]
    f_pvalue: float
    partial_f: dict[str, float]
    p_values: dict[str, float]
    n: int
    excluded_features: list[dict] = field(default_factory=list)
    steps: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["f_statistic"] = {"value": self.f_statistic[0], "df1": self.f_statistic[1], "df2": self.f_statistic[2]}
        return d

    def sentence(self) -> str:
        """APA-style one-liner, e.g. ``F(3, 96) = 4.211, p = .008, R² = .116``."""
        if not self.selected_features:
            return "No variables were found that added statistically significantly to the prediction."
        f, df1, df2 = self.f_statistic
        return f"F({df1}, {df2}) = {f:.3f}, {format_p(self.f_pvalue)}, R² = {_dot(self.r_squared)}"


def _dot(v: float, nd: int = 3) -> str:
    s = f"{v:.{nd}f}"
    if s.startswith("0."):
        return s[1:]
    if s.startswith("-0."):
        return "-" + s[2:]
    return s


def format_p(p: float) -> str:
    if p < 0.0005:
        return "p<.0005"
    return f"p = {_dot(p)}"


def _design(X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(len(X)), X])


def dependent_subset(X: np.ndarray, names: Sequence[str]) -> list[str] | None:
    """A minimal set of columns (with the intercept) that is linearly dependent.

    Columns are scanned in order; the first one lying in the span of the
    intercept and the earlier independent columns is reported together with
    the columns that carry nonzero weight in its representation.
    """
    A = _design(np.asarray(X, dtype=float))
    labels = ["intercept", *names]
    basis: list[int] = []
    for j in range(A.shape[1]):
        col = A[:, j]
        norm = np.linalg.norm(col)
        if norm == 0:
            return [labels[j]]
        if basis:
            B = A[:, basis]
            coef, *_ = np.linalg.lstsq(B, col, rcond=None)
            resid = col - B @ coef
            if np.linalg.norm(resid) <= RANK_TOL * norm * max(1, len(col)) ** 0.5:
                scale = np.abs(coef) * np.linalg.norm(B, axis=0)
                keep = [labels[basis[i]] for i in range(len(basis)) if scale[i] > 1e-8 * norm]
                return keep + [labels[j]]
        basis.append(j)
    return None


@dataclass
class _Fit:
    beta: np.ndarray
    rss: float
    tss: float
    rank_ok: bool


def _lstsq(X: np.ndarray, y: np.ndarray) -> _Fit:
    A = _design(X)
    q, r = np.linalg.qr(A)
    diag = np.abs(np.diag(r))
    ok = bool(diag.size == 0 or diag.min() > RANK_TOL * max(diag.max(), 1.0))
    if ok:
        beta = np.linalg.solve(r, q.T @ y)
    else:
        beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ beta
    return _Fit(beta, float(resid @ resid), float(((y - y.mean()) ** 2).sum()), ok)


def _rank_ok(X: np.ndarray) -> bool:
    if X.shape[1] == 0:
        return True
    return dependent_subset(X, [str(i) for i in range(X.shape[1])]) is None


def ols_fit(X, y, names: Sequence[str] | None = None) -> RegressionReport:
    """Ordinary least squares with intercept, full model."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(p)]
    if n <= p + 1:
        raise ValueError(f"need n > p + 1 observations, got n={n}, p={p}")
    dep = dependent_subset(X, names)
    if dep is not None:
        raise CollinearityError(dep)
    fit = _lstsq(X, y)
    df2 = n - p - 1
    r2 = 1.0 - fit.rss / fit.tss if fit.tss > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    mse = fit.rss / df2
    if p and r2 < 1:
        F = (r2 / p) / ((1 - r2) / df2)
        pf = float(sps.f.sf(F, p, df2))
    else:
        F, pf = (math.inf, 0.0) if p else (0.0, 1.0)
    A = _design(X)
    partial, pvals = {}, {}
    if p:
        cov = np.linalg.inv(A.T @ A)
        for i, nm in enumerate(names):
            se2 = mse * cov[i + 1, i + 1]
            t2 = fit.beta[i + 1] ** 2 / se2 if se2 > 0 else math.inf
            partial[nm] = float(t2)
            pvals[nm] = float(sps.f.sf(t2, 1, df2)) if math.isfinite(t2) else 0.0
    return RegressionReport(
        selected_features=list(names),
        coefficients={nm: float(fit.beta[i + 1]) for i, nm in enumerate(names)},
        intercept=float(fit.beta[0]),
        r_squared=float(r2),
        f_statistic=(float(F), p, df2),
        f_pvalue=pf,
        partial_f=partial,
        p_values=pvals,
        n=n,
    )


def _entry_test(X, y, included: list[int], j: int) -> tuple[float, float]:
    """Partial F and p-value for adding column j to the included set."""
    n = len(y)
    base = _lstsq(X[:, included], y)
    cols = included + [j]
    if not _rank_ok(X[:, cols]):
        return math.nan, math.nan
    new = _lstsq(X[:, cols], y)
    df2 = n - len(cols) - 1
    if df2 <= 0:
        return math.nan, math.nan
    # exact fits leave only rounding noise in the residual sum of squares
    floor = PERFECT_FIT * max(base.tss, 1e-300)
    if base.rss <= floor:
        return 0.0, 1.0
    if new.rss <= floor:
        return math.inf, 0.0
    F = (base.rss - new.rss) / (new.rss / df2)
    F = max(F, 0.0)
    return float(F), float(sps.f.sf(F, 1, df2))


def _removal_test(X, y, included: list[int], j: int) -> tuple[float, float]:
    rest = [c for c in included if c != j]
    return _entry_test(X, y, rest, j)


def _best(cands: list[tuple[float, int]], largest: bool) -> tuple[float, int]:
    """Pick by p-value with earliest-column tie-break."""
    ps = [p for p, _ in cands]
    target = max(ps) if largest else min(ps)
    tol = 1e-12 * max(abs(target), 1e-300)
    for p, j in sorted(cands, key=lambda t: t[1]):
        if abs(p - target) <= tol:
            return p, j
    raise AssertionError("unreachable")


def stepwise_select(
    X,
    y,
    names: Sequence[str] | None = None,
    p_enter: float = 0.05,
    p_remove: float = 0.10,
    max_steps: int | None = None,
) -> RegressionReport:
    """Stepwise selection: forward entry by smallest p, then backward removal.

    Each cycle adds the candidate whose partial-F p-value is smallest (if
    below ``p_enter``), then repeatedly drops the included predictor with
    the largest p-value while it exceeds ``p_remove``. Ties go to the
    earlier column. Candidates that would make the design singular are
    never entered.
    """
    if not p_enter < p_remove:
        raise ValueError("p_enter must be smaller than p_remove")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(p)]
    included: list[int] = []
    steps: list[dict] = []
    seen: set[tuple[int, ...]] = {()}
    max_steps = max_steps or 4 * p + 10
    for _ in range(max_steps):
        changed = False
        cands = []
        for j in range(p):
            if j in included:
                continue
            F, pv = _entry_test(X, y, included, j)
            if not math.isnan(pv):
                cands.append((pv, j))
        if cands:
            pv, j = _best(cands, largest=False)
            if pv < p_enter:
                included.append(j)
                steps.append({"action": "enter", "feature": names[j], "p": pv})
                changed = True
        while included:
            rem = [(_removal_test(X, y, included, j)[1], j) for j in included]
            pv, j = _best(rem, largest=True)
            if pv > p_remove:
                included.remove(j)
                steps.append({"action": "remove", "feature": names[j], "p": pv})
                changed = True
            else:
                break
        state = tuple(sorted(included))
        if not changed or state in seen:
            # a revisited set would repeat the same cycle forever
            break
        seen.add(state)

    if included:
        rep = ols_fit(X[:, included], y, [names[j] for j in included])
    else:
        fit = _lstsq(X[:, []], y)
        rep = RegressionReport([], {}, float(fit.beta[0]), 0.0, (0.0, 0, n - 1), 1.0, {}, {}, n)
    excluded = []
    for j in range(p):
        if j in included:
            continue
        F, pv = _entry_test(X, y, included, j)
        if math.isnan(pv):
            excluded.append({"feature": names[j], "reason": "collinear with selected set"})
        else:
            excluded.append({"feature": names[j], "reason": "not significant", "partial_f": F, "p": pv})
    rep.excluded_features = excluded
    rep.steps = steps
    return rep


@dataclass
class VifReport:
    vif: dict[str, float]

    def to_dict(self):
        return {k: (v if math.isfinite(v) else "inf") for k, v in self.vif.items()}


def vif(X, names: Sequence[str] | None = None) -> VifReport:
    """Variance inflation 1 / (1 - R_j^2), regressing each column on the rest."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if p < 2:
        raise ValueError("VIF needs at least 2 columns")
    if n <= p:
        raise ValueError(f"VIF needs n > p, got n={n}, p={p}")
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(p)]
    out = {}
    for j in range(p):
        others = np.delete(X, j, axis=1)
        yj = X[:, j]
        A = _design(others)
        beta, *_ = np.linalg.lstsq(A, yj, rcond=None)
        resid = yj - A @ beta
        tss = float(((yj - yj.mean()) ** 2).sum())
        rss = float(resid @ resid)
        if tss == 0 or rss <= RANK_TOL**2 * tss * n:
            out[names[j]] = math.inf
        else:
            out[names[j]] = tss / rss
    return VifReport(out)
