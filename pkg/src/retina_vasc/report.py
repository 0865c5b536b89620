"""Output helpers: provenance blocks, stable JSON, SVG charts, text tables."""

from __future__ import annotations

import hashlib
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from xml.sax.saxutils import escape

from . import __version__

TOOL = "retina-vasc"

# categorical palette for grades
PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d")


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def provenance(command: str, config: dict, seeds: dict, inputs: dict | None = None) -> dict:
    """Machine-checkable header: tool, version, command, full config, seeds, input digests."""
    return {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": {k: {"path": str(p), "sha256": file_digest(p)} for k, p in (inputs or {}).items()},
    }


def _jsonable(o):
    if isinstance(o, float):
        if math.isnan(o):
            return None
        if math.isinf(o):
            return "inf" if o > 0 else "-inf"
        return o
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if hasattr(o, "item") and not isinstance(o, (str, bytes)):
        return _jsonable(o.item())
    if hasattr(o, "tolist"):
        return _jsonable(o.tolist())
    return o


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_text(path, text: str, force: bool = False) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def write_json(path, obj, force: bool = False) -> Path:
    return write_text(path, dumps_json(obj), force)


# --------------------------------------------------------------------------- SVG


def _f(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _header(width, height, title, prov, timestamp):
    meta = dict(prov)
    if timestamp:
        meta["created"] = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f"<metadata>{escape(json.dumps(_jsonable(meta), sort_keys=True))}</metadata>",
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:g}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
    ]


def bar_chart_svg(items: list[tuple[str, float]], title: str, prov: dict, timestamp: bool = True,
                  xlabel: str = "mean |SHAP value|") -> str:
    """Horizontal bars, first item on top."""
    label_w, bar_w, row_h, top = 170, 380, 22, 40
    h = top + row_h * len(items) + 40
    w = label_w + bar_w + 80
    out = _header(w, h, title, prov, timestamp)
    vmax = max((v for _, v in items), default=0.0) or 1.0
    for i, (name, v) in enumerate(items):
        y = top + i * row_h
        bw = bar_w * v / vmax
        out.append(f'<text x="{label_w - 6}" y="{_f(y + 15)}" text-anchor="end" font-family="sans-serif" font-size="12">{escape(name)}</text>')
        out.append(f'<rect x="{label_w}" y="{_f(y + 3)}" width="{_f(bw)}" height="{row_h - 6}" fill="#1f77b4"/>')
        out.append(f'<text x="{_f(label_w + bw + 4)}" y="{_f(y + 15)}" font-family="sans-serif" font-size="11">{v:.4g}</text>')
    out.append(f'<text x="{label_w + bar_w / 2:g}" y="{h - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter_svg(points, labels, title: str, prov: dict, timestamp: bool = True, label_names: dict | None = None) -> str:
    """2-d scatter coloured by label, with a legend."""
    import numpy as np

    P = np.asarray(points, dtype=float)
    size, pad, legend = 520, 30, 150
    w, h = size + legend, size + 20
    out = _header(w, h, title, prov, timestamp)
    lo, hi = P.min(0), P.max(0)
    span = np.where(hi > lo, hi - lo, 1.0)
    uniq = sorted(set(labels))
    color = {g: PALETTE[i % len(PALETTE)] for i, g in enumerate(uniq)}
    for (x, y), g in zip(P, labels):
        cx = pad + (x - lo[0]) / span[0] * (size - 2 * pad)
        cy = 30 + pad + (1 - (y - lo[1]) / span[1]) * (size - 2 * pad - 20)
        out.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="3.5" fill="{color[g]}" fill-opacity="0.8"/>')
    for i, g in enumerate(uniq):
        y = 50 + 20 * i
        name = (label_names or {}).get(g, f"grade {g}")
        out.append(f'<circle cx="{size + 12}" cy="{y}" r="5" fill="{color[g]}"/>')
        out.append(f'<text x="{size + 22}" y="{y + 4}" font-family="sans-serif" font-size="12">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------- tables


def text_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]

    def line(r):
        return "  ".join(str(c).ljust(wd) for c, wd in zip(r, widths)).rstrip()

    sep = "  ".join("-" * wd for wd in widths)
    return "\n".join([line(header), sep, *(line(r) for r in rows)]) + "\n"
