"""Feature registry, grade schemas, CSV tables, splitting and scaling."""

from __future__ import annotations

import csv
import io
import json
import math
import re
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

# --------------------------------------------------------------------------- registry

# parameters reported once per zone
PLAIN_PARAMS = ("CRAE", "CRVE", "AVR")
# parameters reported per vessel kind: a(rteriole), v(enule), t(otal)
KINDED_PARAMS = ("FD", "MW", "STDW", "TORT", "cTORT", "LDR", "BC", "AF", "BA", "AA", "JE", "NB", "NFB")
COUNT_PARAMS = ("NA", "NV")
KIND_SUFFIXES = ("a", "v", "t")
ZONE_IDS = ("A", "B", "C", "W")
DEFAULT_ZONE_IDS = ("B", "C")

_NAME_RE = re.compile(r"^([A-Za-z]+)-([A-Z])([avt]?)$")


def feature_names(zones: Iterable[str] = DEFAULT_ZONE_IDS) -> list[str]:
    """Canonical, ordered feature columns for the given zone ids."""
    out = []
    for z in zones:
        out += [f"{p}-{z}" for p in PLAIN_PARAMS]
        out += [f"{p}-{z}{k}" for p in KINDED_PARAMS for k in KIND_SUFFIXES]
        out += [f"{p}-{z}" for p in COUNT_PARAMS]
    return out


def parse_feature(name: str) -> tuple[str, str, str]:
    """Split ``CRAE-B`` / ``FD-Ca`` into (param, zone, kind); kind is '' if none."""
    m = _NAME_RE.match(name)
    if not m:
        raise KeyError(f"not a registered feature name: {name!r}")
    param, zone, kind = m.groups()
    if zone not in ZONE_IDS:
        raise KeyError(f"unknown zone in feature name: {name!r}")
    if param in KINDED_PARAMS:
        if not kind:
            raise KeyError(f"{param} needs a kind suffix (a/v/t): {name!r}")
    elif param in PLAIN_PARAMS or param in COUNT_PARAMS:
        if kind:
            raise KeyError(f"{param} takes no kind suffix: {name!r}")
    else:
        raise KeyError(f"unknown parameter in feature name: {name!r}")
    return param, zone, kind


def is_feature(name: str) -> bool:
    try:
        parse_feature(name)
    except KeyError:
        return False
    return True


@dataclass
class FeatureVector:
    """Named per-image vascular parameters; NaN marks a missing value."""

    values: dict[str, float]
    diagnostics: list[str] = field(default_factory=list)

    def __getitem__(self, name):
        return self.values[name]

    @property
    def missing(self) -> list[str]:
        return [k for k, v in self.values.items() if v is None or math.isnan(v)]


# --------------------------------------------------------------------------- grade schemas


@dataclass(frozen=True)
class GradeSchema:
    disease: str
    grades: tuple[tuple[int, str], ...]
    binary: bool = False

    @property
    def grade_ids(self) -> list[int]:
        return [g for g, _ in self.grades]

    def is_valid(self, grade: int) -> bool:
        return grade in self.grade_ids

    def binary_view(self) -> "GradeSchema":
        absent = self.grades[0][1]
        return GradeSchema(self.disease, ((0, absent), (1, f"{self.disease} present (grade > 0)")), True)


SCHEMAS = {
    "DR": GradeSchema(
        "DR",
        (
            (0, "Absence of DR"),
            (1, "Mild DR"),
            (2, "Moderate DR"),
            (3, "Severe DR"),
            (4, "Signs of proliferative DR"),
        ),
    ),
    "ME": GradeSchema(
        "ME",
        (
            (0, "No visible exudates"),
            (1, "Shortest distance between macula and exudates > one optic disc diameter"),
            (2, "Shortest distance between macula and exudates <= one optic disc diameter"),
        ),
    ),
    "HTR": GradeSchema(
        "HTR",
        (
            (0, "No visible abnormalities"),
            (1, "Diffuse arteriolar narrowing"),
            (2, "Grade 1 with focal arteriolar constriction"),
            (3, "Grade 2 with retinal hemorrhage"),
            (4, "Grade 3 with hard exudates, retinal edema, and optic disc swelling"),
        ),
    ),
}

# per-grade image counts of the source study, used to shape fixtures
TABLE_COUNTS = {
    "DR": {"train": (52, 20, 51, 40, 32), "test": (33, 5, 32, 19, 6)},
    "ME": {"train": (82, 14, 94), "test": (41, 9, 40)},
    "HTR": {"train": (85, 11, 15, 20, 16)},
}


def get_schema(disease: str, binary: bool = False) -> GradeSchema:
    try:
        schema = SCHEMAS[disease.upper()]
    except KeyError:
        raise ValueError(f"unknown disease {disease!r}; expected one of {sorted(SCHEMAS)}") from None
    return schema.binary_view() if binary else schema


# --------------------------------------------------------------------------- tables

SPLITS = ("train", "test", "unassigned")
META_COLUMNS = ("image_id", "grade", "gradable", "comorbidity", "split")


@dataclass(frozen=True)
class Record:
    image_id: str
    features: dict
    grade: int
    gradable: bool = True
    comorbidity_flag: bool = False
    split: str = "unassigned"


@dataclass(frozen=True)
class FeatureTable:
    schema: GradeSchema
    feature_names: tuple[str, ...]
    records: tuple[Record, ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "records", tuple(self.records))
        for i, r in enumerate(self.records):
            if not self.schema.is_valid(r.grade):
                raise ValueError(f"record {i} ({r.image_id}): grade {r.grade} invalid for {self.schema.disease}")
            if set(r.features) != set(self.feature_names):
                extra = sorted(set(r.features) - set(self.feature_names))
                lacking = sorted(set(self.feature_names) - set(r.features))
                raise ValueError(f"record {i} ({r.image_id}): columns differ (extra {extra}, missing {lacking})")
            if r.split not in SPLITS:
                raise ValueError(f"record {i} ({r.image_id}): unknown split {r.split!r}")

    def __len__(self):
        return len(self.records)

    def matrix(self) -> np.ndarray:
        X = np.array([[r.features[f] for f in self.feature_names] for r in self.records], dtype=float)
        return X.reshape(len(self.records), len(self.feature_names))

    def grades(self) -> np.ndarray:
        return np.array([r.grade for r in self.records], dtype=int)

    def ids(self) -> list[str]:
        return [r.image_id for r in self.records]

    def with_records(self, records: Iterable[Record]) -> "FeatureTable":
        return replace(self, records=tuple(records))

    def split_part(self, split: str) -> "FeatureTable":
        return self.with_records(r for r in self.records if r.split == split)

    def select_features(self, names: Sequence[str]) -> "FeatureTable":
        recs = [replace(r, features={n: r.features[n] for n in names}) for r in self.records]
        return replace(self, feature_names=tuple(names), records=tuple(recs))

    def binary_view(self) -> "FeatureTable":
        """Absent (grade 0) versus present (grade > 0)."""
        recs = [replace(r, grade=int(r.grade > 0)) for r in self.records]
        return replace(self, schema=self.schema.binary_view(), records=tuple(recs))

    def class_counts(self) -> dict[str, dict[int, int]]:
        """Per split, per grade record counts (grades of the schema always listed)."""
        out: dict[str, dict[int, int]] = {}
        for r in self.records:
            out.setdefault(r.split, {g: 0 for g in self.schema.grade_ids})[r.grade] += 1
        return out


def _clean(v) -> float:
    # one shared NaN object keeps record dicts comparable with ==
    v = float(v)
    return math.nan if math.isnan(v) else v


def table_from_arrays(
    X, y, feature_names, schema: GradeSchema, ids=None, split="unassigned", meta=None
) -> FeatureTable:
    X = np.asarray(X, dtype=float)
    ids = ids if ids is not None else [f"img{i:05d}" for i in range(len(X))]
    recs = [
        Record(str(ids[i]), dict(zip(feature_names, map(_clean, X[i]))), int(y[i]), split=split)
        for i in range(len(X))
    ]
    return FeatureTable(schema, tuple(feature_names), tuple(recs), meta or {})


class CsvError(ValueError):
    def __init__(self, msg, row=None, column=None):
        self.row, self.column = row, column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {msg}" if where else msg)


def _fmt(v: float) -> str:
    if v is None or math.isnan(v):
        return ""
    return repr(float(v))


_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f", ""}


def _parse_bool(text, row, col):
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise CsvError(f"not a boolean: {text!r}", row, col)


def dumps_csv(table: FeatureTable, provenance: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"#disease={table.schema.disease}\n")
    buf.write(f"#binary={int(table.schema.binary)}\n")
    if provenance is not None:
        buf.write("#provenance=" + json.dumps(provenance, sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(META_COLUMNS) + list(table.feature_names))
    for r in table.records:
        w.writerow(
            [r.image_id, r.grade, int(r.gradable), int(r.comorbidity_flag), r.split]
            + [_fmt(r.features[f]) for f in table.feature_names]
        )
    return buf.getvalue()


def write_csv(table: FeatureTable, path, provenance: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_csv(table, provenance))


def loads_csv(text: str, disease: str | None = None, binary: bool | None = None) -> FeatureTable:
    lines = text.splitlines()
    header_meta = {}
    body = []
    for ln in lines:
        if ln.startswith("#"):
            k, _, v = ln[1:].partition("=")
            header_meta[k.strip()] = v
        elif ln.strip():
            body.append(ln)
    if disease is None:
        disease = header_meta.get("disease")
        if not disease:
            raise CsvError("disease not given and no '#disease=' line present")
    if binary is None:
        binary = header_meta.get("binary", "0").strip() == "1"
    schema = get_schema(disease, binary)
    if not body:
        raise CsvError("missing header row")
    reader = csv.reader(body)
    header = next(reader)
    for col in META_COLUMNS:
        if col not in header:
            raise CsvError(f"required column missing: {col!r}", 1)
    feats = [c for c in header if c not in META_COLUMNS]
    for c in feats:
        if not is_feature(c):
            raise CsvError("unknown column", 1, c)
    if len(set(header)) != len(header):
        raise CsvError("duplicate column names", 1)
    idx = {c: i for i, c in enumerate(header)}
    recs = []
    for rowno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise CsvError(f"expected {len(header)} cells, got {len(row)}", rowno)
        try:
            grade = int(row[idx["grade"]])
        except ValueError:
            raise CsvError(f"grade is not an integer: {row[idx['grade']]!r}", rowno, "grade") from None
        if not schema.is_valid(grade):
            raise CsvError(f"grade {grade} invalid for {schema.disease} schema", rowno, "grade")
        values = {}
        for c in feats:
            cell = row[idx[c]].strip()
            if cell == "":
                values[c] = math.nan
                continue
            try:
                values[c] = float(cell)
            except ValueError:
                raise CsvError(f"unparseable number {cell!r}", rowno, c) from None
        split = row[idx["split"]].strip() or "unassigned"
        if split not in SPLITS:
            raise CsvError(f"unknown split {split!r}", rowno, "split")
        recs.append(
            Record(
                row[idx["image_id"]],
                values,
                grade,
                _parse_bool(row[idx["gradable"]], rowno, "gradable"),
                _parse_bool(row[idx["comorbidity"]], rowno, "comorbidity"),
                split,
            )
        )
    prov = header_meta.get("provenance")
    meta = {"provenance": json.loads(prov)} if prov else {}
    return FeatureTable(schema, tuple(feats), tuple(recs), meta)


def read_csv(path, disease: str | None = None, binary: bool | None = None) -> FeatureTable:
    with open(path, encoding="utf-8") as fh:
        return loads_csv(fh.read(), disease, binary)


# --------------------------------------------------------------------------- filtering / splitting


def filter_gradable(table: FeatureTable) -> tuple[FeatureTable, dict]:
    """Drop ungradable or comorbid records. Returns the kept table and a report."""
    kept = [r for r in table.records if r.gradable and not r.comorbidity_flag]
    report = {
        "total": len(table.records),
        "kept": len(kept),
        "dropped": len(table.records) - len(kept),
        "dropped_by_reason": {
            "ungradable": sum(not r.gradable for r in table.records),
            "comorbidity": sum(r.comorbidity_flag for r in table.records),
        },
        "dropped_ids": [r.image_id for r in table.records if not (r.gradable and not r.comorbidity_flag)],
    }
    return table.with_records(kept), report


def select_controls(table: FeatureTable, n: int, seed: int) -> FeatureTable:
    """Draw ``n`` grade-0 controls, only from gradable comorbidity-free records."""
    pool = [r for r in table.records if r.grade == 0 and r.gradable and not r.comorbidity_flag]
    if n > len(pool):
        raise ValueError(f"asked for {n} controls, only {len(pool)} eligible")
    rng = np.random.default_rng(seed)
    pick = sorted(rng.choice(len(pool), size=n, replace=False))
    return table.with_records(pool[i] for i in pick)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(table: FeatureTable, test_fraction: float, seed: int) -> FeatureTable:
    """Assign train/test per class, keeping class proportions to within one record."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    by_class: dict[int, list[int]] = {}
    for i, r in enumerate(table.records):
        by_class.setdefault(r.grade, []).append(i)
    small = sorted(g for g, idx in by_class.items() if len(idx) < 2)
    if small:
        raise ValueError(f"classes with fewer than 2 records cannot be split: {small}")
    rng = np.random.default_rng(seed)
    test = set()
    for g in sorted(by_class):
        idx = by_class[g]
        n_test = min(max(_round_half_up(test_fraction * len(idx)), 1), len(idx) - 1)
        perm = rng.permutation(len(idx))
        test.update(idx[k] for k in perm[:n_test])
    return table.with_records(
        replace(r, split="test" if i in test else "train") for i, r in enumerate(table.records)
    )


# --------------------------------------------------------------------------- preprocessing


@dataclass(frozen=True)
class MinMaxScaler:
    min_: np.ndarray
    max_: np.ndarray

    @classmethod
    def fit(cls, X) -> "MinMaxScaler":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("cannot fit a scaler on empty data")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            lo = np.nanmin(X, axis=0)
            hi = np.nanmax(X, axis=0)
        # all-missing column behaves like a constant one
        lo = np.where(np.isnan(lo), 0.0, lo)
        hi = np.where(np.isnan(hi), lo, hi)
        return cls(lo, hi)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        span = self.max_ - self.min_
        const = span == 0
        out = (X - self.min_) / np.where(const, 1.0, span)
        # constant training column maps to 0 everywhere
        out[:, const] = np.where(np.isnan(X[:, const]), np.nan, 0.0)
        return out


def scaler_fit(train_rows) -> MinMaxScaler:
    return MinMaxScaler.fit(train_rows)


def scaler_apply(scaler: MinMaxScaler, rows) -> np.ndarray:
    return scaler.transform(rows)


@dataclass(frozen=True)
class MedianImputer:
    medians: np.ndarray

    @classmethod
    def fit(cls, X) -> "MedianImputer":
        X = np.asarray(X, dtype=float)
        med = np.full(X.shape[1], 0.0)
        for j in range(X.shape[1]):
            col = X[:, j][~np.isnan(X[:, j])]
            if len(col):
                med[j] = np.median(col)
        return cls(med)

    def transform(self, X) -> np.ndarray:
        X = np.array(X, dtype=float)
        r, c = np.nonzero(np.isnan(X))
        X[r, c] = self.medians[c]
        return X


@dataclass(frozen=True)
class Preprocessor:
    """Train-median imputation followed by min-max scaling."""

    imputer: MedianImputer
    scaler: MinMaxScaler

    @classmethod
    def fit(cls, X) -> "Preprocessor":
        imp = MedianImputer.fit(X)
        return cls(imp, MinMaxScaler.fit(imp.transform(X)))

    def transform(self, X) -> np.ndarray:
        return self.scaler.transform(self.imputer.transform(X))
