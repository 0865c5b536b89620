"""Retinal vascular parameters computed from an annotated vessel graph.

All calibres and lengths are in pixels. Per-zone features are aggregated in
segment-id order so results do not depend on input ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import savgol_filter

from .features import FeatureVector, feature_names
from .raster import rasterize
from .vessel import (
    ARTERIOLE,
    DEFAULT_ZONES,
    VENULE,
    GraphError,
    VesselGraph,
    ZoneSpec,
    polyline_length,
    validate,
    zone_clip,
)

# revised Knudtson pairing constants
KNUDTSON_K = {ARTERIOLE: 0.88, VENULE: 0.95}
BIG_SIX = 6

FD_CANVAS = 1024
FD_BOXES = (2, 4, 8, 16, 32, 64, 128, 256)

# curvature tortuosity: arc-length resampling then cubic Savitzky-Golay smoothing
CURV_SAMPLES = 256
CURV_WINDOW = 15

JE_BRACKET = (0.5, 20.0)
JE_TOL = 1e-10

KIND_OF_SUFFIX = {"a": (ARTERIOLE,), "v": (VENULE,), "t": (ARTERIOLE, VENULE)}


# --------------------------------------------------------------------------- calibre


def vessel_equivalent(widths: Sequence[float], kind: str, k: float | None = None) -> float:
    """Summary calibre of the (up to) six widest vessels by iterative pairing.

    Each round sorts the widths, combines the widest with the narrowest as
    ``k * sqrt(w1**2 + w2**2)`` and carries an odd middle value over, until a
    single value remains.
    """
    w = [float(x) for x in widths]
    if not w:
        raise ValueError("vessel_equivalent needs at least one width")
    if any(not (x > 0) for x in w):
        raise ValueError("widths must be positive")
    if k is None:
        k = KNUDTSON_K[kind]
    w = sorted(w, reverse=True)[:BIG_SIX]
    while len(w) > 1:
        w.sort(reverse=True)
        n = len(w)
        nxt = [k * math.sqrt(w[i] ** 2 + w[n - 1 - i] ** 2) for i in range(n // 2)]
        if n % 2:
            nxt.append(w[n // 2])
        w = nxt
    return w[0]


def avr(crae: float, crve: float) -> float:
    if not crve > 0:
        raise ValueError(f"CRVE must be > 0, got {crve}")
    return crae / crve


# --------------------------------------------------------------------------- fractal dimension


def box_counts(raster: np.ndarray, box_sizes: Sequence[int]) -> np.ndarray:
    """Number of s-by-s boxes (grid anchored at the origin) touching foreground."""
    img = np.asarray(raster, dtype=bool)
    out = []
    for s in box_sizes:
        h = -(-img.shape[0] // s) * s
        w = -(-img.shape[1] // s) * s
        pad = np.zeros((h, w), dtype=bool)
        pad[: img.shape[0], : img.shape[1]] = img
        occupied = pad.reshape(h // s, s, w // s, s).any(axis=(1, 3))
        out.append(int(occupied.sum()))
    return np.array(out)


def fractal_dimension(raster: np.ndarray, box_sizes: Sequence[int] = FD_BOXES) -> float:
    """Box-counting dimension: slope of log N(s) against log(1/s)."""
    img = np.asarray(raster, dtype=bool)
    if not img.any():
        raise ValueError("empty raster has no fractal dimension")
    sizes = np.asarray(box_sizes, dtype=float)
    if len(sizes) < 4:
        raise ValueError("need at least 4 box sizes")
    ratios = sizes[1:] / sizes[:-1]
    if np.any(sizes <= 0) or not np.allclose(ratios, ratios[0]) or ratios[0] <= 1:
        raise ValueError("box sizes must form an increasing geometric ladder")
    n = box_counts(img, [int(s) for s in sizes])
    slope = np.polyfit(np.log(1.0 / sizes), np.log(n), 1)[0]
    return float(slope)


# --------------------------------------------------------------------------- tortuosity


def _resample(points: np.ndarray, n: int) -> np.ndarray:
    seg = np.hypot(*np.diff(points, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    t = np.linspace(0.0, s[-1], n)
    return np.column_stack([np.interp(t, s, points[:, 0]), np.interp(t, s, points[:, 1])])


def _menger(p: np.ndarray) -> np.ndarray:
    a = p[1:-1] - p[:-2]
    b = p[2:] - p[1:-1]
    c = p[2:] - p[:-2]
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    den = np.hypot(*a.T) * np.hypot(*b.T) * np.hypot(*c.T)
    return np.where(den > 0, 2.0 * np.abs(cross) / np.where(den > 0, den, 1.0), 0.0)


def tortuosity(points) -> tuple[float, float]:
    """(simple, curvature) tortuosity of a centerline.

    simple is arc/chord - 1. curvature is the mean squared curvature along the
    vessel, i.e. (1/L) * integral of kappa^2 ds, evaluated on a fixed number of
    arc-length samples smoothed with a cubic Savitzky-Golay filter. Because
    the resampling only sees the polyline geometry, inserting collinear points
    changes neither value.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise ValueError("tortuosity needs at least 3 points")
    chord = math.hypot(*(pts[-1] - pts[0]))
    if chord == 0:
        raise ValueError("coincident endpoints: zero chord length")
    arc = polyline_length(pts)
    simple = arc / chord - 1.0
    rs = _resample(pts, CURV_SAMPLES)
    sm = savgol_filter(rs, CURV_WINDOW, 3, axis=0, mode="interp")
    kappa = _menger(sm)
    return simple, float(np.mean(kappa**2))


# --------------------------------------------------------------------------- widths


def _mean_width(seg) -> float:
    return float(np.mean(seg.widths)) if len(seg.widths) else math.nan


def width_stats(graph: VesselGraph, kinds=(ARTERIOLE, VENULE)) -> tuple[float, float, float]:
    """(MW, STDW, LDR) over the segments of the given kinds; NaN when no samples."""
    segs = sorted((s for s in graph.segments if s.kind in kinds and len(s.widths)), key=lambda s: s.id)
    if not segs:
        return math.nan, math.nan, math.nan
    samples = np.concatenate([s.widths for s in segs])
    ldr = [s.length / _mean_width(s) for s in segs]
    return float(samples.mean()), float(samples.std()), float(np.mean(ldr))


# --------------------------------------------------------------------------- junctions


@dataclass(frozen=True)
class JunctionGeometry:
    d0: float
    d1: float
    d2: float
    theta1: float
    theta2: float

    def __post_init__(self):
        if self.d2 > self.d1:
            raise ValueError("d1 must be the wider daughter (d1 >= d2)")
        if min(self.d0, self.d1, self.d2) <= 0:
            raise ValueError("junction widths must be positive")
        for t in (self.theta1, self.theta2):
            if not 0 <= t < 180:
                raise ValueError(f"angle {t} outside [0, 180)")


@dataclass(frozen=True)
class JunctionParams:
    bc: float
    af: float
    ba: float
    aa: float
    je: float
    je_status: str = "ok"


def junction_exponent(d0: float, d1: float, d2: float) -> tuple[float, str]:
    """x in [0.5, 20] with d1**x + d2**x = d0**x, by bisection.

    Works on the normalised residual (d1/d0)**x + (d2/d0)**x - 1, which is
    strictly decreasing in x when both daughters are narrower than the trunk.
    Returns (nan, code) when no root lies in the bracket.
    """
    r1, r2 = d1 / d0, d2 / d0

    def f(x):
        return r1**x + r2**x - 1.0

    lo, hi = JE_BRACKET
    flo, fhi = f(lo), f(hi)
    if max(r1, r2) >= 1.0:
        return math.nan, "JE_DAUGHTER_NOT_NARROWER"
    if flo < 0:
        return math.nan, "JE_ROOT_BELOW_RANGE"
    if fhi > 0:
        return math.nan, "JE_ROOT_ABOVE_RANGE"
    if flo == 0:
        return lo, "ok"
    if fhi == 0:
        return hi, "ok"
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0:
            lo = hi = mid
            break
        if fm > 0:
            lo = mid
        else:
            hi = mid
    x = lo if abs(f(lo)) <= abs(f(hi)) else hi
    if abs(f(x)) > JE_TOL:
        return math.nan, "JE_NOT_CONVERGED"
    return x, "ok"


def junction_params(j: JunctionGeometry) -> JunctionParams:
    bc = (j.d1**2 + j.d2**2) / j.d0**2
    af = j.d2**2 / j.d1**2
    je, status = junction_exponent(j.d0, j.d1, j.d2)
    return JunctionParams(bc, af, j.theta1 + j.theta2, abs(j.theta1 - j.theta2), je, status)


def _angle_deg(u: np.ndarray, v: np.ndarray) -> float:
    cross = u[0] * v[1] - u[1] * v[0]
    return math.degrees(abs(math.atan2(cross, float(u @ v))))


def junction_geometry(graph: VesselGraph, junction, segs=None) -> tuple[JunctionGeometry | None, str]:
    """Widths and daughter deviation angles at one bifurcation.

    Widths are segment means; directions are segment chords, which makes
    the angles independent of the local sampling. Returns (None, code) for a
    degenerate junction.
    """
    segs = segs if segs is not None else graph.segment_map()
    trunk = segs[junction.trunk]
    dau = [segs[d] for d in junction.daughters]
    d0 = _mean_width(trunk)
    ds = [_mean_width(s) for s in dau]
    if any(math.isnan(w) for w in [d0, *ds]):
        return None, "JUNCTION_NO_WIDTHS"
    if min(d0, *ds) <= 0 or max(ds) > d0:
        return None, "JUNCTION_DEGENERATE"
    tdir = trunk.points[-1] - trunk.points[0]
    thetas = [_angle_deg(tdir, s.points[-1] - s.points[0]) for s in dau]
    order = sorted(range(2), key=lambda i: (-ds[i], i))
    a, b = order
    return JunctionGeometry(d0, ds[a], ds[b], thetas[a], thetas[b]), "ok"


# --------------------------------------------------------------------------- counts


@dataclass(frozen=True)
class Counts:
    n_branches: int
    n_first_branches: int
    n_arterioles: int
    n_venules: int


def counts(graph: VesselGraph, zone: ZoneSpec | None = None, kinds=(ARTERIOLE, VENULE)) -> Counts:
    """Branch and trunk counts; junctions are attributed to their trunk's kind."""
    g = zone_clip(graph, zone) if zone is not None else graph
    segs = g.segment_map()
    juncs = [j for j in g.junctions if segs[j.trunk].kind in kinds]
    first = [j for j in juncs if segs[j.trunk].generation == 0]
    trunks = {(s.kind, s.origin) for s in g.segments if s.generation == 0}
    return Counts(
        len(juncs),
        len(first),
        sum(1 for k, _ in trunks if k == ARTERIOLE),
        sum(1 for k, _ in trunks if k == VENULE),
    )


# --------------------------------------------------------------------------- orchestration


def zone_raster(graph: VesselGraph, zone: ZoneSpec, kinds, size: int = FD_CANVAS) -> np.ndarray | None:
    """Draw the (already clipped) centerlines on a square canvas spanning the zone.

    The canvas spans the zone's outer circle, or the farthest point when the
    zone is unbounded, so the raster does not depend on image scale.
    """
    c = np.asarray(graph.disc.center, dtype=float)
    polys = [s.points for s in sorted(graph.segments, key=lambda s: s.id) if s.kind in kinds]
    if not polys:
        return None
    R = zone.outer_radius * graph.disc.diameter
    if not math.isfinite(R):
        R = max(float(np.hypot(*(p - c).T).max()) for p in polys) * (1 + 1e-9)
    if R <= 0:
        return None
    px = [(p - c) / (2 * R) * size + size / 2 for p in polys]
    return rasterize(px, size)


def _zone_features(g: VesselGraph, zone: ZoneSpec, diags: list[str]) -> dict[str, float]:
    z = zone.zone_id
    out: dict[str, float] = {}
    segs = sorted(g.segments, key=lambda s: s.id)
    smap = g.segment_map()

    def calibre(kind):
        per_origin: dict[str, list[np.ndarray]] = {}
        for s in segs:
            if s.kind == kind and len(s.widths):
                per_origin.setdefault(s.origin, []).append(s.widths)
        ws = [float(np.mean(np.concatenate(v))) for _, v in sorted(per_origin.items())]
        return vessel_equivalent(ws, kind) if ws else math.nan

    crae, crve = calibre(ARTERIOLE), calibre(VENULE)
    out[f"CRAE-{z}"] = crae
    out[f"CRVE-{z}"] = crve
    out[f"AVR-{z}"] = avr(crae, crve) if not (math.isnan(crae) or math.isnan(crve)) else math.nan

    geo = {}
    for k, j in enumerate(sorted(g.junctions, key=lambda j: (j.trunk, j.daughters))):
        jg, code = junction_geometry(g, j, smap)
        if jg is None:
            diags.append(f"{z}:{j.trunk}:{code}")
            continue
        p = junction_params(jg)
        if p.je_status != "ok":
            diags.append(f"{z}:{j.trunk}:{p.je_status}")
        geo[(j.trunk, j.daughters)] = (smap[j.trunk].kind, p)

    for suffix, kinds in KIND_OF_SUFFIX.items():
        raster = zone_raster(g, zone, kinds)
        if raster is not None and raster.any():
            out[f"FD-{z}{suffix}"] = fractal_dimension(raster)
        else:
            out[f"FD-{z}{suffix}"] = math.nan

        mw, sd, ldr = width_stats(g, kinds)
        out[f"MW-{z}{suffix}"] = mw
        out[f"STDW-{z}{suffix}"] = sd

        tort, ctort = [], []
        for s in segs:
            if s.kind not in kinds:
                continue
            if math.hypot(*(s.points[-1] - s.points[0])) == 0:
                diags.append(f"{z}:{s.id}:TORT_ZERO_CHORD")
                continue
            if len(s.points) < 3:
                tort.append(0.0)
                ctort.append(0.0)
                continue
            a, b = tortuosity(s.points)
            tort.append(a)
            ctort.append(b)
        out[f"TORT-{z}{suffix}"] = float(np.mean(tort)) if tort else math.nan
        out[f"cTORT-{z}{suffix}"] = float(np.mean(ctort)) if ctort else math.nan
        out[f"LDR-{z}{suffix}"] = ldr

        ps = [p for kind, p in geo.values() if kind in kinds]
        for name, attr in (("BC", "bc"), ("AF", "af"), ("BA", "ba"), ("AA", "aa"), ("JE", "je")):
            vals = [getattr(p, attr) for p in ps if not math.isnan(getattr(p, attr))]
            out[f"{name}-{z}{suffix}"] = float(np.mean(vals)) if vals else math.nan

        # branch counts are undefined, not zero, when the kind is absent
        present = any(s.kind in kinds for s in segs)
        c = counts(g, None, kinds)
        out[f"NB-{z}{suffix}"] = float(c.n_branches) if present else math.nan
        out[f"NFB-{z}{suffix}"] = float(c.n_first_branches) if present else math.nan

    c = counts(g)
    out[f"NA-{z}"] = float(c.n_arterioles)
    out[f"NV-{z}"] = float(c.n_venules)
    return out


def quantify(graph: VesselGraph, zones: Sequence[ZoneSpec] = DEFAULT_ZONES) -> FeatureVector:
    """Every vascular parameter per zone and vessel kind, under canonical names."""
    problems = validate(graph)
    if problems:
        raise GraphError(problems)
    if not zones:
        raise ValueError("need at least one zone")
    diags: list[str] = []
    values: dict[str, float] = {}
    for zone in zones:
        clipped = zone_clip(graph, zone)
        values.update(_zone_features(clipped, zone, diags))
    ordered = {n: values[n] for n in feature_names([z.zone_id for z in zones])}
    return FeatureVector(ordered, diags)
