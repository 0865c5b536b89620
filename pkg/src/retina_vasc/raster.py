"""Binary rasterisation of centerline polylines (1-pixel stroke)."""

import numpy as np


def draw_polyline(canvas: np.ndarray, pts) -> np.ndarray:
    """Burn the polyline ``pts`` (pixel coordinates, x then y) into ``canvas``.

    Each edge is sampled at half-pixel steps and the containing pixel is set.
    Samples falling outside the canvas are dropped.
    """
    pts = np.asarray(pts, dtype=float)
    h, w = canvas.shape
    for p, q in zip(pts[:-1], pts[1:]):
        n = int(np.ceil(2 * np.abs(q - p).max())) + 1
        t = np.linspace(0.0, 1.0, n + 1)[:, None]
        s = p + t * (q - p)
        ix = np.floor(s[:, 0]).astype(np.int64)
        iy = np.floor(s[:, 1]).astype(np.int64)
        ok = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
        canvas[iy[ok], ix[ok]] = True
    return canvas


def rasterize(polylines, size: int) -> np.ndarray:
    canvas = np.zeros((size, size), dtype=bool)
    for pts in polylines:
        draw_polyline(canvas, pts)
    return canvas
