"""Shared fixtures: Shapley test problems and small tables."""

import numpy as np

from retina_vasc.ml import models as M

_MODELS = ("LR", "GNB", "KNC", "RFC", "DTC")


def shapley_fixture(i: int):
    """(callable or model, background, sample, class_index) for fixture i.

    Even fixtures use a smooth nonlinear function with an interaction term;
    odd ones use a fitted classifier. Feature counts cycle through 3..10.
    """
    rng = np.random.default_rng(1000 + i)
    p = 3 + i % 8
    B = rng.normal(size=(16, p))
    x = rng.normal(size=p) * 1.5
    if i % 2 == 0:
        w = rng.normal(size=p)
        a, b = rng.choice(p, 2, replace=False)

        def f(Z, w=w, a=a, b=b):
            return np.tanh(Z @ w) + 0.5 * Z[:, a] * Z[:, b]

        return f, B, x, None
    X = rng.normal(size=(80, p))
    y = (X[:, 0] - X[:, 1] ** 2 + 0.3 * rng.normal(size=80) > -0.5).astype(int)
    mid = _MODELS[(i // 2) % len(_MODELS)]
    params = {"n_estimators": 15} if mid == "RFC" else {"max_depth": 4} if mid == "DTC" else {}
    return M.fit(mid, params, X, y, seed=i), B, x, 1
