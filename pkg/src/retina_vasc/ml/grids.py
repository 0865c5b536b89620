"""Hyperparameter grids.

The packaged ``grids.json`` keeps the published listing as printed, including
the repeated ``1e1`` in the C lists, the repeated ``100`` in LR ``max_iter``
and ``min_samples_split = 1``. ``load_specs`` applies the corrections:

* C lists read ``[1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2]``;
* repeated values are dropped, first occurrence kept;
* invalid points stay in the grid and are skipped when searched.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .models import MODEL_IDS, PARAMS, REJECTED_MODELS, InvalidParams, UnsupportedModel, check_params

C_CORRECTED = [1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2]
C_AS_PRINTED = [1e-4, 1e-3, 1e-2, 1e1, 1e0, 1e1, 1e2]

_REJECTED_PARAMS = {
    "MLP": {"hidden_layer_sizes"},
    "GPC": {"max_iter_predict"},
    "SVC": {"C", "kernel"},
}


@dataclass
class ModelSpec:
    model_id: str
    grid: dict[str, list]
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.model_id in REJECTED_MODELS:
            known = _REJECTED_PARAMS[self.model_id]
        elif self.model_id in PARAMS:
            known = set(PARAMS[self.model_id])
        else:
            raise UnsupportedModel(f"unknown model {self.model_id!r}")
        unknown = sorted(set(self.grid) - known)
        if unknown:
            raise InvalidParams(f"{self.model_id}: unknown hyperparameter(s) {', '.join(unknown)}")
        for k, v in self.grid.items():
            if not isinstance(v, list) or not v:
                raise InvalidParams(f"{self.model_id}: grid for {k} must be a nonempty list")

    @property
    def runnable(self) -> bool:
        return self.model_id in MODEL_IDS

    def points(self) -> list[dict]:
        """Cartesian product in listed order; the last-listed name varies fastest."""
        keys = list(self.grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]

    def valid_points(self) -> tuple[list[dict], list[tuple[dict, str]]]:
        ok, skipped = [], []
        for pt in self.points():
            try:
                check_params(self.model_id, pt)
            except InvalidParams as e:
                skipped.append((pt, str(e)))
            else:
                ok.append(pt)
        return ok, skipped

    def to_dict(self) -> dict:
        return {"model_id": self.model_id, "grid": self.grid}


def default_grid_path():
    return resources.files("retina_vasc") / "data" / "grids.json"


def load_raw(path=None) -> dict[str, dict[str, list]]:
    src = default_grid_path() if path is None else Path(path)
    return json.loads(src.read_text())


def _dedupe(vals: list) -> list:
    out = []
    for v in vals:
        if not any(v == u and type(v) is type(u) for u in out):
            out.append(v)
    return out


def correct(model_id: str, grid: dict[str, list]) -> tuple[dict[str, list], list[str]]:
    notes = []
    out = {}
    for k, vals in grid.items():
        vals = list(vals)
        if k == "C" and vals == C_AS_PRINTED:
            vals = list(C_CORRECTED)
            notes.append(f"{model_id}.C: printed list repeats 1e1 and omits 1e-1; using {C_CORRECTED}")
        d = _dedupe(vals)
        if len(d) != len(vals):
            notes.append(f"{model_id}.{k}: dropped repeated values, using {d}")
        out[k] = d
    return out, notes


def load_specs(path=None, models=None, corrected: bool = True) -> list[ModelSpec]:
    """Model specs from a grid file, in file order, optionally filtered by id."""
    raw = load_raw(path)
    if not isinstance(raw, dict):
        raise InvalidParams("grid file must map model ids to grids")
    specs = []
    for mid, grid in raw.items():
        if models is not None and mid not in models:
            continue
        if not isinstance(grid, dict):
            raise InvalidParams(f"{mid}: grid must be an object")
        notes = []
        if corrected:
            grid, notes = correct(mid, grid)
        specs.append(ModelSpec(mid, grid, notes))
    if models is not None:
        missing = [m for m in models if m not in raw]
        if missing:
            raise InvalidParams(f"models not in grid file: {', '.join(missing)}")
    return specs
