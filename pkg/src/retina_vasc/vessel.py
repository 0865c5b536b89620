"""Annotated retinal vasculature: centerline graphs, disc-centred zones, JSON I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np

ARTERIOLE = "arteriole"
VENULE = "venule"
KINDS = (ARTERIOLE, VENULE)

# junction endpoints may disagree by sub-pixel annotation noise
JOIN_EPS = 1.5
# split parameters closer than this to an edge end are treated as the end
_T_EPS = 1e-9

# separator between an original segment id and the index of a clipped piece
PIECE_SEP = "#"


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class DiscSpec:
    center: Point2
    diameter: float

    def __post_init__(self):
        if not self.diameter > 0:
            raise ValueError(f"disc diameter must be > 0, got {self.diameter}")
        object.__setattr__(self, "center", Point2(float(self.center[0]), float(self.center[1])))


@dataclass(frozen=True)
class ZoneSpec:
    """Annulus around the disc centre, radii in disc diameters.

    The default zones follow the margin-based reading: A spans 0 to 0.5 DD
    beyond the disc margin, B 0.5 to 1.0 DD and C 0.5 to 2.0 DD.
    """

    zone_id: str
    inner_radius: float
    outer_radius: float

    def __post_init__(self):
        if not (0 <= self.inner_radius < self.outer_radius):
            raise ValueError(
                f"invalid zone {self.zone_id!r}: need 0 <= inner < outer, "
                f"got [{self.inner_radius}, {self.outer_radius})"
            )


ZONE_A = ZoneSpec("A", 0.5, 1.0)
ZONE_B = ZoneSpec("B", 1.0, 1.5)
ZONE_C = ZoneSpec("C", 1.0, 2.5)
# whole graph; used for fixture ground truth
ZONE_W = ZoneSpec("W", 0.0, math.inf)
DEFAULT_ZONES = (ZONE_B, ZONE_C)
ZONES = {z.zone_id: z for z in (ZONE_A, ZONE_B, ZONE_C, ZONE_W)}


def _frozen(a, shape_tail=()) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape((-1,) + shape_tail)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Segment:
    id: str
    kind: str
    points: np.ndarray
    widths: np.ndarray = field(default_factory=lambda: _frozen([]))
    parent: str | None = None
    generation: int = 0

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(self.points, (2,)))
        object.__setattr__(self, "widths", _frozen(self.widths))
        object.__setattr__(self, "id", str(self.id))
        if self.parent is not None:
            object.__setattr__(self, "parent", str(self.parent))

    @property
    def origin(self) -> str:
        """Id of the unclipped segment this piece came from."""
        return self.id.split(PIECE_SEP, 1)[0]

    @property
    def length(self) -> float:
        return polyline_length(self.points)

    def __eq__(self, other):
        if not isinstance(other, Segment):
            return NotImplemented
        return (
            self.id == other.id
            and self.kind == other.kind
            and self.parent == other.parent
            and self.generation == other.generation
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.widths, other.widths)
        )

    __hash__ = None


@dataclass(frozen=True)
class Junction:
    location: Point2
    trunk: str
    daughters: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "location", Point2(float(self.location[0]), float(self.location[1])))
        object.__setattr__(self, "daughters", tuple(str(d) for d in self.daughters))
        object.__setattr__(self, "trunk", str(self.trunk))


@dataclass(frozen=True)
class VesselGraph:
    disc: DiscSpec
    segments: tuple[Segment, ...]
    junctions: tuple[Junction, ...] = ()
    image_size: tuple[float, float] = (1024, 1024)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "junctions", tuple(self.junctions))
        object.__setattr__(self, "image_size", tuple(self.image_size))

    def segment_map(self) -> dict[str, Segment]:
        return {s.id: s for s in self.segments}

    def of_kind(self, kind: str) -> list[Segment]:
        return [s for s in self.segments if s.kind == kind]


@dataclass(frozen=True)
class Violation:
    ref: str
    reason: str

    def __str__(self):
        return f"{self.ref}: {self.reason}"


class GraphError(ValueError):
    """Raised when a graph fails validation; carries every violation."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def polyline_length(points) -> float:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise ValueError("polyline needs at least 2 points")
    return float(np.hypot(*np.diff(pts, axis=0).T).sum())


def validate(graph: VesselGraph) -> list[Violation]:
    """Return every invariant violation in ``graph``; empty iff valid."""
    out: list[Violation] = []
    if not (graph.disc.diameter > 0):
        out.append(Violation("disc", "diameter must be > 0"))
    w, h = graph.image_size
    segs: dict[str, Segment] = {}
    for s in graph.segments:
        if s.id in segs:
            out.append(Violation(s.id, "duplicate segment id"))
        segs[s.id] = s

    for s in graph.segments:
        p = s.points
        if s.kind not in KINDS:
            out.append(Violation(s.id, f"unknown kind {s.kind!r}"))
        if len(p) < 2:
            out.append(Violation(s.id, "fewer than 2 points"))
            continue
        if not np.all(np.isfinite(p)):
            out.append(Violation(s.id, "non-finite coordinate"))
            continue
        if np.any(np.all(np.diff(p, axis=0) == 0, axis=1)):
            out.append(Violation(s.id, "consecutive points coincide"))
        if np.any(p[:, 0] < 0) or np.any(p[:, 0] > w) or np.any(p[:, 1] < 0) or np.any(p[:, 1] > h):
            out.append(Violation(s.id, "point outside image bounds"))
        if len(s.widths):
            if len(s.widths) != len(p):
                out.append(Violation(s.id, f"{len(s.widths)} widths for {len(p)} points"))
            if not np.all(s.widths > 0):
                out.append(Violation(s.id, "non-positive width sample"))
        if s.generation < 0:
            out.append(Violation(s.id, "negative generation"))
        if s.parent is not None:
            par = segs.get(s.parent)
            if par is None:
                out.append(Violation(s.id, f"parent {s.parent!r} does not exist"))
            elif s.generation != par.generation + 1:
                out.append(Violation(s.id, f"generation {s.generation} != parent generation + 1"))

    seen_daughter: dict[str, int] = {}
    for k, j in enumerate(graph.junctions):
        ref = f"junction[{k}]"
        loc = np.asarray(j.location)
        trunk = segs.get(j.trunk)
        if trunk is None:
            out.append(Violation(ref, f"trunk {j.trunk!r} does not exist"))
        elif len(trunk.points) and np.hypot(*(trunk.points[-1] - loc)) > JOIN_EPS:
            out.append(Violation(ref, f"trunk {j.trunk!r} does not end at the junction"))
        if len(j.daughters) != 2:
            out.append(Violation(ref, f"expected 2 daughters, got {len(j.daughters)}"))
        elif j.daughters[0] == j.daughters[1]:
            out.append(Violation(ref, "daughters are the same segment"))
        for d in j.daughters:
            ds = segs.get(d)
            if ds is None:
                out.append(Violation(ref, f"daughter {d!r} does not exist"))
                continue
            if len(ds.points) and np.hypot(*(ds.points[0] - loc)) > JOIN_EPS:
                out.append(Violation(ref, f"daughter {d!r} does not start at the junction"))
            if d in seen_daughter:
                out.append(Violation(d, f"segment is a daughter of junction[{seen_daughter[d]}] and {ref}"))
            seen_daughter[d] = k
    return out


def check(graph: VesselGraph) -> VesselGraph:
    problems = validate(graph)
    if problems:
        raise GraphError(problems)
    return graph


# --------------------------------------------------------------------------- zones


def _circle_hits(p, q, c, r) -> list[float]:
    """Edge parameters t in (0, 1) where p + t(q - p) is at distance r from c."""
    if not (0 < r < math.inf):
        return []
    d = q - p
    f = p - c
    a = d @ d
    b = 2.0 * (f @ d)
    cc = f @ f - r * r
    disc = b * b - 4 * a * cc
    if disc <= 0:
        return []
    sq = math.sqrt(disc)
    # numerically stable pair of roots
    qq = -0.5 * (b + math.copysign(sq, b))
    roots = [qq / a, cc / qq] if qq != 0 else [-b / (2 * a)]
    return [t for t in roots if _T_EPS < t < 1 - _T_EPS]


def _clip_segment(seg: Segment, c: np.ndarray, r_in: float, r_out: float):
    """Split ``seg`` into pieces lying inside the annulus.

    Returns a list of (points, widths, starts_at_origin, ends_at_origin).
    """
    pts = seg.points
    wid = seg.widths
    has_w = len(wid) == len(pts) and len(wid) > 0
    pieces = []
    cur_p: list[np.ndarray] = []
    cur_w: list[float] = []
    cur_start = False

    def flush(ends_at_origin):
        nonlocal cur_p, cur_w
        if len(cur_p) >= 2:
            pieces.append((np.array(cur_p), np.array(cur_w if has_w else []), cur_start, ends_at_origin))
        cur_p, cur_w = [], []

    n = len(pts)
    for i in range(n - 1):
        p, q = pts[i], pts[i + 1]
        ts = sorted(set(_circle_hits(p, q, c, r_in) + _circle_hits(p, q, c, r_out)))
        knots = [0.0] + ts + [1.0]
        for a, b in zip(knots[:-1], knots[1:]):
            mid = p + 0.5 * (a + b) * (q - p)
            rm = math.hypot(mid[0] - c[0], mid[1] - c[1])
            inside = r_in <= rm < r_out
            if inside:
                if not cur_p:
                    cur_start = i == 0 and a == 0.0
                    cur_p.append(p if a == 0.0 else p + a * (q - p))
                    if has_w:
                        cur_w.append(wid[i] if a == 0.0 else wid[i] + a * (wid[i + 1] - wid[i]))
                cur_p.append(q if b == 1.0 else p + b * (q - p))
                if has_w:
                    cur_w.append(wid[i + 1] if b == 1.0 else wid[i] + b * (wid[i + 1] - wid[i]))
            elif cur_p:
                flush(False)
    if cur_p:
        flush(True)
    return pieces


def zone_clip(graph: VesselGraph, zone: ZoneSpec) -> VesselGraph:
    """Restrict ``graph`` to the annulus ``[inner, outer)`` around the disc centre.

    Segments crossing a zone boundary are cut there, interpolating points and
    widths linearly. A segment that lies wholly inside keeps its id; pieces of a
    cut segment are named ``<id>#<k>``. Junctions survive only when they sit in
    the annulus and their trunk and both daughters survive around them.
    """
    d = graph.disc.diameter
    c = np.asarray(graph.disc.center, dtype=float)
    r_in = zone.inner_radius * d
    r_out = zone.outer_radius * d

    new_segs: list[Segment] = []
    # original id -> clipped id of the piece touching the original start / end
    start_piece: dict[str, str] = {}
    end_piece: dict[str, str] = {}
    pending_parent: dict[str, str] = {}
    for seg in graph.segments:
        pieces = _clip_segment(seg, c, r_in, r_out)
        whole = len(pieces) == 1 and pieces[0][2] and pieces[0][3] and len(pieces[0][0]) == len(seg.points)
        for k, (pp, ww, s0, s1) in enumerate(pieces):
            if whole:
                pid = seg.id
                pp, ww = seg.points, seg.widths
            else:
                pid = f"{seg.id}{PIECE_SEP}{k}"
            if s0:
                start_piece[seg.id] = pid
                if seg.parent is not None:
                    pending_parent[pid] = seg.parent
            if s1:
                end_piece[seg.id] = pid
            new_segs.append(Segment(pid, seg.kind, pp, ww, None, seg.generation))

    segs = [
        replace(s, parent=end_piece.get(pending_parent[s.id])) if s.id in pending_parent else s
        for s in new_segs
    ]

    juncs = []
    for j in graph.junctions:
        rj = math.hypot(j.location[0] - c[0], j.location[1] - c[1])
        if not (r_in <= rj < r_out):
            continue
        t = end_piece.get(j.trunk)
        ds = [start_piece.get(x) for x in j.daughters]
        if t is None or any(x is None for x in ds):
            continue
        juncs.append(Junction(j.location, t, tuple(ds)))
    return VesselGraph(graph.disc, tuple(segs), tuple(juncs), graph.image_size)


def transform(graph: VesselGraph, scale: float = 1.0, angle: float = 0.0, shift=(0.0, 0.0), image_size=None) -> VesselGraph:
    """Similarity transform about the disc centre; widths scale with ``scale``.

    ``angle`` is in radians. Useful for checking invariance of derived features.
    """
    c = np.asarray(graph.disc.center, dtype=float)
    ca, sa = math.cos(angle), math.sin(angle)
    rot = np.array([[ca, -sa], [sa, ca]])
    off = c + np.asarray(shift, dtype=float)

    def tf(p):
        return (np.asarray(p, dtype=float) - c) @ rot.T * scale + off

    segs = [replace(s, points=tf(s.points), widths=s.widths * scale) for s in graph.segments]
    juncs = [replace(j, location=Point2(*tf(j.location))) for j in graph.junctions]
    disc = DiscSpec(Point2(*off), graph.disc.diameter * scale)
    size = image_size or tuple(v * scale for v in graph.image_size)
    return VesselGraph(disc, tuple(segs), tuple(juncs), size)


# --------------------------------------------------------------------------- JSON


def _num(v: float):
    v = float(v)
    if v == int(v) and abs(v) < 1e9:
        return int(v)
    return float(f"{v:.9g}")


def graph_to_dict(graph: VesselGraph) -> dict:
    return {
        "disc": {
            "cx": _num(graph.disc.center.x),
            "cy": _num(graph.disc.center.y),
            "d": _num(graph.disc.diameter),
        },
        "image": [_num(graph.image_size[0]), _num(graph.image_size[1])],
        "segments": [
            {
                "id": s.id,
                "kind": s.kind,
                "parent": s.parent,
                "generation": int(s.generation),
                "pts": [[_num(x), _num(y)] for x, y in s.points],
                "widths": [_num(w) for w in s.widths],
            }
            for s in graph.segments
        ],
        "junctions": [
            {"at": [_num(j.location.x), _num(j.location.y)], "trunk": j.trunk, "daughters": list(j.daughters)}
            for j in graph.junctions
        ],
    }


def graph_from_dict(doc: dict) -> VesselGraph:
    try:
        disc = DiscSpec(Point2(doc["disc"]["cx"], doc["disc"]["cy"]), float(doc["disc"]["d"]))
        segs = [
            Segment(
                id=s["id"],
                kind=s["kind"],
                points=s["pts"],
                widths=s.get("widths") or [],
                parent=s.get("parent"),
                generation=int(s.get("generation", 0)),
            )
            for s in doc["segments"]
        ]
        juncs = [Junction(Point2(*j["at"]), j["trunk"], tuple(j["daughters"])) for j in doc.get("junctions", [])]
        size = tuple(doc["image"])
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed vessel graph document: {exc!r}") from exc
    return VesselGraph(disc, tuple(segs), tuple(juncs), size)


def dumps(graph: VesselGraph, extra: dict | None = None) -> str:
    doc = graph_to_dict(graph)
    if extra:
        doc = {**doc, **extra}
    return json.dumps(doc, separators=(",", ":")) + "\n"


def loads(text: str) -> VesselGraph:
    return graph_from_dict(json.loads(text))


def load(path) -> VesselGraph:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def iter_points(graph: VesselGraph, kinds: Iterable[str] = KINDS) -> np.ndarray:
    kinds = set(kinds)
    chunks = [s.points for s in graph.segments if s.kind in kinds]
    return np.concatenate(chunks) if chunks else np.empty((0, 2))
