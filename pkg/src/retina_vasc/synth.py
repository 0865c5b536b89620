"""Seeded fixtures with analytically known parameters.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence``; the same spec and seed always give the same output.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .features import FeatureTable, feature_names, get_schema, table_from_arrays
from .raster import rasterize
from .vessel import ARTERIOLE, VENULE, DiscSpec, Junction, Point2, Segment, VesselGraph

RNG_NAME = "numpy.random.PCG64 via SeedSequence"

# Gauss-Legendre order used for analytic arc lengths
GL_NODES = 64


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(stream))))


@dataclass(frozen=True)
class TreeSpec:
    n_arterioles: int = 2
    n_venules: int = 2
    depth: int = 2
    trunk_width: float = 12.0
    murray_exponent: float = 3.0
    tortuosity_amplitude: float = 0.0
    branch_angle: float = 75.0
    seed: int = 0
    # width ratio of narrower to wider daughter, in (0, 1]
    asymmetry: float = 1.0
    # half-waves of the sinusoidal displacement per segment
    tortuosity_waves: int = 2
    disc_diameter: float = 100.0
    image_size: int = 1024
    trunk_length: float = 60.0
    length_ratio: float = 0.75

    def __post_init__(self):
        if self.n_arterioles < 1 or self.n_venules < 1:
            raise ValueError("need at least one arteriole and one venule")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if not self.trunk_width > 0:
            raise ValueError("trunk_width must be > 0")
        if not self.murray_exponent > 0:
            raise ValueError("murray_exponent must be > 0")
        if self.tortuosity_amplitude < 0:
            raise ValueError("tortuosity_amplitude must be >= 0")
        if not 0 < self.asymmetry <= 1:
            raise ValueError("asymmetry must lie in (0, 1]")
        if not 0 < self.branch_angle < 180:
            raise ValueError("branch_angle must lie in (0, 180)")
        reach = self.disc_diameter / 2 + self.trunk_length / (1 - min(self.length_ratio, 0.99))
        if reach >= self.image_size / 2:
            raise ValueError("tree does not fit in the image")


@dataclass
class GroundTruth:
    values: dict[str, float]
    notes: dict[str, str]

    def __getitem__(self, k):
        return self.values[k]

    def to_dict(self):
        return {k: {"value": self.values[k], "formula": self.notes[k]} for k in self.values}


def sine_arc_length(length: float, amplitude: float, waves: int) -> float:
    """Arc length of s -> A sin(pi m s / L) over [0, L] by Gauss-Legendre quadrature."""
    if amplitude == 0:
        return length
    x, w = np.polynomial.legendre.leggauss(GL_NODES)
    k = math.pi * waves / length
    total = 0.0
    # one quadrature per half-wave keeps the integrand smooth on each piece
    for m in range(waves):
        a, b = m * length / waves, (m + 1) * length / waves
        s = 0.5 * (b - a) * x + 0.5 * (a + b)
        total += 0.5 * (b - a) * float(np.sum(w * np.sqrt(1 + (amplitude * k * np.cos(k * s)) ** 2)))
    return total


def _segment_points(start, direction, length, amp, waves, spacing):
    n = max(2, int(math.ceil(length / spacing)) + 1)
    s = np.linspace(0.0, length, n)
    normal = np.array([-direction[1], direction[0]])
    off = amp * np.sin(math.pi * waves * s / length) if amp > 0 else np.zeros(n)
    off[0] = off[-1] = 0.0
    pts = start + s[:, None] * direction + off[:, None] * normal
    pts[-1] = start + length * direction
    return pts


def generate_tree(spec: TreeSpec) -> tuple[VesselGraph, GroundTruth]:
    """Bifurcating arteriole/venule trees growing radially from the disc margin.

    Daughter widths follow d0**x = d1**x + d2**x with x the Murray exponent and
    d2 = asymmetry * d1. Ground truth covers the whole graph (zone ``W``).
    """
    rng = rng_for(spec.seed)
    c = np.array([spec.image_size / 2, spec.image_size / 2])
    r_margin = spec.disc_diameter / 2
    n = spec.n_arterioles + spec.n_venules
    kinds = []
    na, nv = spec.n_arterioles, spec.n_venules
    while na or nv:
        if na:
            kinds.append(ARTERIOLE)
            na -= 1
        if nv:
            kinds.append(VENULE)
            nv -= 1
    base = rng.uniform(0, 2 * math.pi)
    jitter = rng.uniform(-0.25, 0.25, size=n) * (2 * math.pi / n)
    x = spec.murray_exponent
    a = spec.asymmetry
    spacing = 0.5 if spec.tortuosity_amplitude > 0 else 2.0

    segments: list[Segment] = []
    junctions: list[Junction] = []
    seg_rows = []  # (kind, width, n_points, arc, chord)
    junc_rows = []  # (kind, d0, d1, d2, theta1, theta2, generation of trunk)

    def grow(sid, kind, start, angle, width, length, gen, parent):
        d = np.array([math.cos(angle), math.sin(angle)])
        amp = spec.tortuosity_amplitude * length
        pts = _segment_points(start, d, length, amp, spec.tortuosity_waves, spacing)
        segments.append(Segment(sid, kind, pts, np.full(len(pts), width), parent, gen))
        seg_rows.append((kind, width, len(pts), sine_arc_length(length, amp, spec.tortuosity_waves), length))
        if gen >= spec.depth:
            return
        end = pts[-1]
        d1 = width / (1 + a**x) ** (1 / x)
        d2 = a * d1
        t1 = spec.branch_angle * float(rng.uniform(0.3, 0.7))
        t2 = spec.branch_angle - t1
        side = 1.0 if rng.random() < 0.5 else -1.0
        ids = (f"{sid}.1", f"{sid}.2")
        junctions.append(Junction(Point2(*end), sid, ids))
        junc_rows.append((kind, width, d1, d2, t1, t2, gen))
        nl = length * spec.length_ratio
        grow(ids[0], kind, end, angle + side * math.radians(t1), d1, nl, gen + 1, sid)
        grow(ids[1], kind, end, angle - side * math.radians(t2), d2, nl, gen + 1, sid)

    for i, kind in enumerate(kinds):
        ang = base + 2 * math.pi * i / n + jitter[i]
        start = c + r_margin * np.array([math.cos(ang), math.sin(ang)])
        sid = f"{'a' if kind == ARTERIOLE else 'v'}{i}"
        grow(sid, kind, start, ang, spec.trunk_width, spec.trunk_length, 0, None)

    graph = VesselGraph(
        DiscSpec(Point2(*c), spec.disc_diameter),
        tuple(segments),
        tuple(junctions),
        (spec.image_size, spec.image_size),
    )
    return graph, _ground_truth(spec, seg_rows, junc_rows)


def _ground_truth(spec: TreeSpec, seg_rows, junc_rows) -> GroundTruth:
    vals: dict[str, float] = {}
    notes: dict[str, str] = {}

    def put(name, v, note):
        vals[name] = float(v)
        notes[name] = note

    kind_sets = {"a": {ARTERIOLE}, "v": {VENULE}, "t": {ARTERIOLE, VENULE}}
    for suf, ks in kind_sets.items():
        rows = [r for r in seg_rows if r[0] in ks]
        n_pts = np.array([r[2] for r in rows], dtype=float)
        w = np.array([r[1] for r in rows])
        mw = float((n_pts * w).sum() / n_pts.sum())
        put(f"MW-W{suf}", mw, "sample-weighted mean of constant segment widths")
        put(f"STDW-W{suf}", math.sqrt(float((n_pts * (w - mw) ** 2).sum() / n_pts.sum())), "population std of width samples")
        put(f"LDR-W{suf}", np.mean([r[3] / r[1] for r in rows]), "mean of analytic arc length / width")
        put(f"TORT-W{suf}", np.mean([r[3] / r[4] - 1 for r in rows]), "mean of arc/chord - 1, arc by 64-node Gauss-Legendre")

        js = [r for r in junc_rows if r[0] in ks]
        put(f"NB-W{suf}", len(js), "junction count by construction")
        put(f"NFB-W{suf}", sum(1 for r in js if r[6] == 0), "junctions on generation-0 trunks")
        if js:
            put(f"BC-W{suf}", np.mean([(r[2] ** 2 + r[3] ** 2) / r[1] ** 2 for r in js]), "(d1^2 + d2^2) / d0^2")
            put(f"AF-W{suf}", np.mean([r[3] ** 2 / r[2] ** 2 for r in js]), "asymmetry^2")
            put(f"BA-W{suf}", np.mean([r[4] + r[5] for r in js]), "theta1 + theta2 = branch_angle")
            put(f"AA-W{suf}", np.mean([abs(r[4] - r[5]) for r in js]), "|theta1 - theta2|")
            put(f"JE-W{suf}", spec.murray_exponent, "Murray exponent used to set daughter widths")
    put("NA-W", spec.n_arterioles, "arteriole trunks by construction")
    put("NV-W", spec.n_venules, "venule trunks by construction")
    return GroundTruth(vals, notes)


def spec_dict(spec: TreeSpec) -> dict:
    return asdict(spec)


# --------------------------------------------------------------------------- rasters


def koch_points(level: int, length: float) -> np.ndarray:
    pts = np.array([[0.0, 0.0], [length, 0.0]])
    rot = np.array([[0.5, -math.sqrt(3) / 2], [math.sqrt(3) / 2, 0.5]])
    for _ in range(level):
        p, q = pts[:-1], pts[1:]
        d = (q - p) / 3
        a = p + d
        b = p + 2 * d
        # bump points upward (negative y in image rows)
        tip = a + d @ rot.T * np.array([1, -1])
        new = np.empty((4 * len(p) + 1, 2))
        new[0:-1:4] = p
        new[1::4] = a
        new[2::4] = tip
        new[3::4] = b
        new[-1] = pts[-1]
        pts = new
    return pts


def koch_raster(level: int, size: int = 1024) -> np.ndarray:
    """Koch curve of the given iteration, drawn with a 1-pixel stroke."""
    if not 0 <= level <= 7:
        raise ValueError("level must lie in [0, 7]")
    if size < 256:
        raise ValueError("size must be >= 256")
    length = size - 2.0
    if length / 3**level < 2.0:
        raise ValueError(f"size {size} cannot resolve level {level}: segments shorter than 2 px")
    pts = koch_points(level, length)
    pts = pts + np.array([1.0, size * 0.62])
    return rasterize([pts], size)


def line_raster(size: int = 1024) -> np.ndarray:
    return rasterize([np.array([[1.0, size / 2 + 0.5], [size - 1.0, size / 2 + 0.5]])], size)


def square_raster(size: int = 1024, side: int | None = None) -> np.ndarray:
    side = side or size // 2
    img = np.zeros((size, size), dtype=bool)
    o = (size - side) // 2
    img[o : o + side, o : o + side] = True
    return img


# --------------------------------------------------------------------------- tables


def make_separable_dataset(
    n_per_class,
    n_classes: int,
    n_features: int,
    separation: float,
    seed: int,
    disease: str = "DR",
) -> FeatureTable:
    """Gaussian classes separable in two randomly chosen feature columns.

    Class means sit on a regular polygon with side ``separation`` inside the
    informative pair (rotated randomly); every other column is unit noise.
    Columns are then given arbitrary affine units. ``n_per_class`` is a count
    or one count per class.
    """
    if n_classes < 2 or n_features < 2:
        raise ValueError("need n_classes >= 2 and n_features >= 2")
    counts = [int(n_per_class)] * n_classes if np.isscalar(n_per_class) else [int(c) for c in n_per_class]
    if len(counts) != n_classes:
        raise ValueError("n_per_class length must equal n_classes")
    schema = get_schema(disease)
    if n_classes > len(schema.grades):
        raise ValueError(f"{disease} has only {len(schema.grades)} grades")
    names = feature_names(("B", "C"))
    if n_features > len(names):
        raise ValueError(f"at most {len(names)} registry features available")
    names = names[:n_features]
    rng = rng_for(seed)
    info = sorted(int(i) for i in rng.choice(n_features, size=2, replace=False))
    phi = rng.uniform(0, 2 * math.pi)
    rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    radius = separation / (2 * math.sin(math.pi / n_classes)) if n_classes > 2 else separation / 2
    ang = 2 * math.pi * np.arange(n_classes) / n_classes
    means = np.column_stack([radius * np.cos(ang), radius * np.sin(ang)]) @ rot.T
    y = np.repeat(np.arange(n_classes), counts)
    X = rng.standard_normal((len(y), n_features))
    X[:, info] += means[y]
    scale = rng.uniform(0.5, 50.0, size=n_features)
    offset = rng.uniform(-10.0, 100.0, size=n_features)
    X = X * scale + offset
    order = rng.permutation(len(y))
    X, y = X[order], y[order]
    ids = [f"syn{seed}_{i:05d}" for i in range(len(y))]
    meta = {
        "generator": "make_separable_dataset",
        "informative": [names[i] for i in info],
        "separation": separation,
        "seed": seed,
        "rng": RNG_NAME,
    }
    return table_from_arrays(X, y, names, schema, ids=ids, meta=meta)
