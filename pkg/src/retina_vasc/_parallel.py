"""Ordered thread map capped by RETINA_VASC_THREADS."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "RETINA_VASC_THREADS"


def n_threads(requested: int | None = None) -> int:
    if requested is None:
        raw = os.environ.get(ENV_VAR, "1")
        try:
            requested = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_VAR} must be an integer, got {raw!r}") from None
    return max(1, int(requested))


def ordered_map(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]``, possibly concurrent; result order is input order."""
    items = list(items)
    t = min(n_threads(threads), len(items))
    if t <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=t) as pool:
        return list(pool.map(fn, items))
