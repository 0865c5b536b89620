"""Exact t-SNE (O(n^2) per iteration)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..synth import rng_for

EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
MIN_GAIN = 0.01


class PerplexityError(ValueError):
    def __init__(self, perplexity, n):
        self.max_perplexity = (n - 1) / 3.0
        super().__init__(
            f"perplexity {perplexity} needs at least {3 * perplexity:g} rows, got {n}; "
            f"maximum feasible perplexity is {self.max_perplexity:g}"
        )


@dataclass
class TsneResult:
    embedding: np.ndarray
    kl_initial: float
    kl_final: float
    iterations: int


def _sq_dists(X):
    s = (X * X).sum(1)
    D = s[:, None] - 2 * X @ X.T + s[None, :]
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def conditional_p(D: np.ndarray, perplexity: float, tol: float = 1e-5, max_iter: int = 200) -> np.ndarray:
    """Row-wise Gaussian affinities whose entropy matches log(perplexity)."""
    n = len(D)
    target = np.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        d = np.delete(D[i], i)
        lo, hi, beta = 0.0, np.inf, 1.0
        for _ in range(max_iter):
            e = np.exp(-(d - d.min()) * beta)
            s = e.sum()
            p = e / s
            H = -np.sum(p[p > 0] * np.log(p[p > 0]))
            if abs(H - target) < tol:
                break
            if H > target:
                lo = beta
                beta = beta * 2 if hi == np.inf else (beta + hi) / 2
            else:
                hi = beta
                beta = (beta + lo) / 2
        P[i, np.arange(n) != i] = p
    return P


def _kl(P, Q):
    m = P > 0
    return float(np.sum(P[m] * np.log(P[m] / Q[m])))


def _q(Y):
    num = 1.0 / (1.0 + _sq_dists(Y))
    np.fill_diagonal(num, 0.0)
    return num, np.maximum(num / num.sum(), 1e-12)


def auto_learning_rate(n: int) -> float:
    # step size n / exaggeration; a fixed 200 overshoots badly on small tables
    return n / EXAGGERATION


def tsne_embed(
    X, perplexity: float = 30.0, iterations: int = 1000, seed: int = 0, learning_rate: float | None = None
) -> TsneResult:
    """Two-dimensional embedding with early exaggeration, momentum and gains.

    ``learning_rate=None`` uses :func:`auto_learning_rate`.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    if perplexity <= 0 or n < 3 * perplexity:
        raise PerplexityError(perplexity, n)
    if not np.isfinite(X).all():
        raise ValueError("X must be finite")
    P = conditional_p(_sq_dists(X), perplexity)
    P = (P + P.T) / (2 * n)
    P = np.maximum(P, 1e-12)
    np.fill_diagonal(P, 0.0)

    lr = auto_learning_rate(n) if learning_rate is None else float(learning_rate)
    if lr <= 0:
        raise ValueError("learning_rate must be positive")
    Y = rng_for(seed).standard_normal((n, 2)) * 1e-4
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    kl0 = _kl(P, _q(Y)[1])
    for it in range(iterations):
        ex = EXAGGERATION if it < EXAGGERATION_ITERS else 1.0
        mom = 0.5 if it < EXAGGERATION_ITERS else 0.8
        num, Q = _q(Y)
        W = (ex * P - Q) * num
        grad = 4.0 * (np.diag(W.sum(1)) - W) @ Y
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, MIN_GAIN, out=gains)
        update = mom * update - lr * gains * grad
        Y = Y + update
        Y = Y - Y.mean(0)
    return TsneResult(Y, kl0, _kl(P, _q(Y)[1]), iterations)
