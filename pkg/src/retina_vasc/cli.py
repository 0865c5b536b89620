"""Command-line entry point: ``retina-vasc <command> ...``.

Exit codes: 0 success, 2 malformed input, 3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, explain as X
from . import features as F
from . import params as P
from . import report as R
from . import stats as S
from . import synth as SY
from . import vessel as V
from .ml import cv, grids
from .ml import models as M
from .ml.tsne import tsne_embed

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3


class InputError(Exception):
    """Malformed user input; reported with exit code 2."""


# --------------------------------------------------------------------------- config


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    return cfg


def opt(args, cfg: dict, name: str, default=None):
    """Command-line value, else config value, else default."""
    v = getattr(args, name, None)
    if v is not None:
        return v
    return cfg.get(name, default)


def _out(args) -> Path:
    return Path(args.out or ".")


def _seed(args, cfg) -> int:
    return int(opt(args, cfg, "seed", 0))


def _read_table(path, binary=False) -> F.FeatureTable:
    try:
        t = F.read_csv(path)
    except FileNotFoundError:
        raise InputError(f"table not found: {path}") from None
    t, _ = F.filter_gradable(t)
    return t.binary_view() if binary and not t.schema.binary else t


def _train_part(t: F.FeatureTable) -> F.FeatureTable:
    tr = t.split_part("train")
    return tr if len(tr) else t.split_part("unassigned")


def _test_part(t: F.FeatureTable) -> F.FeatureTable:
    return t.split_part("test")


def _task(t: F.FeatureTable) -> dict:
    return {"disease": t.schema.disease, "view": "detection" if t.schema.binary else "grading"}


# --------------------------------------------------------------------------- synth


def cmd_synth_tree(args, cfg):
    fields = dict(cfg.get("tree", {}))
    for k in ("n_arterioles", "n_venules", "depth", "tortuosity_amplitude", "asymmetry", "murray_exponent", "branch_angle", "trunk_width"):
        v = getattr(args, k, None)
        if v is not None:
            fields[k] = v
    fields["seed"] = _seed(args, cfg)
    try:
        spec = SY.TreeSpec(**fields)
    except TypeError as e:
        raise InputError(f"invalid tree spec: {e}") from None
    graph, gt = SY.generate_tree(spec)
    prov = R.provenance("synth tree", {"tree": SY.spec_dict(spec)}, {"seed": spec.seed})
    out = _out(args)
    stem = args.name or f"tree_{spec.seed}"
    R.write_text(out / f"{stem}.json", V.dumps(graph, {"provenance": prov}), args.force)
    R.write_json(out / f"{stem}_truth.json", {"provenance": prov, "ground_truth": gt.to_dict()}, args.force)
    print(f"wrote {out / (stem + '.json')} and {out / (stem + '_truth.json')}")


def _pbm(raster: np.ndarray, prov: dict) -> bytes:
    h, w = raster.shape
    head = f"P4\n# provenance={json.dumps(prov, sort_keys=True, separators=(',', ':'))}\n{w} {h}\n".encode()
    return head + np.packbits(raster.astype(bool), axis=1).tobytes()


def cmd_synth_koch(args, cfg):
    level = int(opt(args, cfg, "level", 5))
    size = int(opt(args, cfg, "size", 1024))
    raster = SY.koch_raster(level, size)
    fd = P.fractal_dimension(raster)
    prov = R.provenance("synth koch", {"level": level, "size": size}, {})
    out = _out(args)
    path = out / f"koch_L{level}.pbm"
    if path.exists() and not args.force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    path.write_bytes(_pbm(raster, prov))
    R.write_json(out / f"koch_L{level}.json", {"provenance": prov, "fractal_dimension": fd, "box_sizes": list(P.FD_BOXES)}, args.force)
    print(f"wrote {path}; box-counting FD = {fd:.4f}")


def _assign_test_counts(t: F.FeatureTable, test_counts) -> F.FeatureTable:
    """First ``test_counts[g]`` records of each grade go to test, the rest to train."""
    seen: dict[int, int] = {}
    recs = []
    for r in t.records:
        k = seen.get(r.grade, 0)
        seen[r.grade] = k + 1
        recs.append(replace(r, split="test" if k < test_counts[r.grade] else "train"))
    return t.with_records(recs)


def cmd_synth_dataset(args, cfg):
    seed = _seed(args, cfg)
    disease = opt(args, cfg, "disease", "DR")
    like = opt(args, cfg, "like", None)
    n_features = int(opt(args, cfg, "n_features", 88))
    sep = float(opt(args, cfg, "separation", 6.0))
    test_fraction = float(opt(args, cfg, "test_fraction", 0.3))
    test_counts = None
    if like:
        disease = like
        tc = F.TABLE_COUNTS.get(like.upper())
        if tc is None:
            raise InputError(f"no reference counts for {like}")
        counts = list(tc["train"])
        if "test" in tc:
            test_counts = list(tc["test"])
            counts = [a + b for a, b in zip(counts, test_counts)]
    else:
        raw = opt(args, cfg, "counts", None)
        if raw is None:
            raise InputError("give --counts or --like")
        counts = [int(c) for c in (raw.split(",") if isinstance(raw, str) else raw)]
    t = SY.make_separable_dataset(counts, len(counts), n_features, sep, seed, disease=disease)
    t = _assign_test_counts(t, test_counts) if test_counts else F.stratified_split(t, test_fraction, seed)
    config = {"disease": disease, "counts": counts, "test_counts": test_counts, "n_features": n_features,
              "separation": sep, "test_fraction": None if test_counts else test_fraction, "meta": t.meta}
    prov = R.provenance("synth dataset", config, {"seed": seed})
    name = args.name or f"dataset_{seed}"
    R.write_text(_out(args) / f"{name}.csv", F.dumps_csv(t, prov), args.force)
    print(f"wrote {_out(args) / (name + '.csv')} ({len(t)} rows)")


# --------------------------------------------------------------------------- quantify


def cmd_quantify(args, cfg):
    zones = opt(args, cfg, "zones", ["B", "C"])
    if isinstance(zones, str):
        zones = zones.split(",")
    try:
        zspecs = [V.ZONES[z] for z in zones]
    except KeyError as e:
        raise InputError(f"unknown zone {e.args[0]!r}; choose from {sorted(V.ZONES)}") from None
    disease = opt(args, cfg, "disease", "DR")
    schema = F.get_schema(disease)
    names = F.feature_names(zones)
    labels = {}
    if args.labels:
        for ln in Path(args.labels).read_text().splitlines()[1:]:
            if ln.strip():
                iid, g = ln.split(",")[:2]
                labels[iid.strip()] = int(g)
    records = []
    for gpath in args.graphs:
        try:
            graph = V.load(gpath)
        except FileNotFoundError:
            raise InputError(f"graph not found: {gpath}") from None
        problems = V.validate(graph)
        if problems:
            listing = "\n  ".join(str(p) for p in problems)
            raise InputError(f"{gpath}: invalid vessel graph\n  {listing}")
        fv = P.quantify(graph, zspecs)
        iid = Path(gpath).stem
        grade = labels.get(iid, args.grade if args.grade is not None else 0)
        if not schema.is_valid(grade):
            raise InputError(f"{iid}: grade {grade} invalid for {disease}")
        records.append(F.Record(iid, {n: F._clean(fv.values[n]) for n in names}, grade))
    out_csv = _out(args) / (args.csv or "features.csv")
    if out_csv.exists() and not args.force:
        old = F.read_csv(out_csv)
        if list(old.feature_names) != names or old.schema.disease != schema.disease:
            raise InputError(f"{out_csv} has a different schema; pass --force to replace it")
        dup = set(old.ids()) & {r.image_id for r in records}
        if dup:
            raise InputError(f"image ids already in {out_csv}: {sorted(dup)}")
        table = old.with_records(list(old.records) + records)
        prov = old.meta.get("provenance")
    else:
        table = F.FeatureTable(schema, tuple(names), tuple(records))
        prov = None
    prov = prov or R.provenance("quantify", {"zones": zones, "disease": disease}, {})
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    F.write_csv(table, out_csv, prov)
    print(f"wrote {len(records)} row(s) to {out_csv}")


# --------------------------------------------------------------------------- regress


def cmd_regress(args, cfg):
    t = _read_table(args.table)
    t = t.split_part(args.split) if args.split != "all" else t
    if len(t) == 0:
        raise InputError(f"no records in split {args.split!r}")
    Xr = F.MedianImputer.fit(t.matrix()).transform(t.matrix())
    y = t.grades().astype(float)
    p_enter = float(opt(args, cfg, "p_enter", 0.05))
    p_remove = float(opt(args, cfg, "p_remove", 0.10))
    rep = S.stepwise_select(Xr, y, list(t.feature_names), p_enter, p_remove)
    vif = None
    if len(rep.selected_features) >= 2:
        cols = [t.feature_names.index(f) for f in rep.selected_features]
        vif = S.vif(Xr[:, cols], rep.selected_features).to_dict()
    prov = R.provenance("regress", {"p_enter": p_enter, "p_remove": p_remove, "split": args.split,
                                    "imputation": "median"}, {}, {"table": args.table})
    doc = {"provenance": prov, **_task(t), "report": rep.to_dict(), "sentence": rep.sentence(), "vif": vif}
    out = _out(args)
    R.write_json(out / "regress.json", doc, args.force)
    rows = [[f, f"{rep.coefficients[f]:.6g}", f"{rep.partial_f[f]:.3f}", S.format_p(rep.p_values[f]),
             "-" if vif is None else (f"{vif[f]:.3f}" if isinstance(vif[f], float) else vif[f])]
            for f in rep.selected_features]
    text = f"{t.schema.disease} stepwise regression (n = {rep.n})\n{rep.sentence()}\n"
    if rows:
        text += "\n" + R.text_table(["feature", "coefficient", "partial F", "p", "VIF"], rows)
    R.write_text(out / "regress.txt", text, args.force)
    sys.stdout.write(text)


# --------------------------------------------------------------------------- train / evaluate


def _specs(args, cfg):
    grid_file = opt(args, cfg, "grid", None)
    wanted = opt(args, cfg, "models", None)
    if isinstance(wanted, str):
        wanted = wanted.split(",")
    try:
        specs = grids.load_specs(grid_file, models=wanted)
    except FileNotFoundError:
        raise InputError(f"grid file not found: {grid_file}") from None
    if wanted:
        bad = [s.model_id for s in specs if not s.runnable]
        if bad:
            raise InputError("; ".join(f"{b}: {M.REJECTED_MODELS[b]}" for b in bad))
    return specs, grid_file


def _summary_rows(task, reports):
    label = f"{task['disease']} {task['view']}"
    return [[label, r.model_id, r.train_perf, "-" if r.test_score is None else cv._dot(r.test_score),
             cv.format_minutes(r.train_time_min)] for r in reports]


TABLE_HEADER = ["Task", "Best Model", "Train Perf. ROCAUC", "Test Perf. ROCAUC", "Train Time in min"]


def cmd_train(args, cfg):
    t = _read_table(args.table, args.binary)
    tr = _train_part(t)
    seed = _seed(args, cfg)
    ko = int(opt(args, cfg, "outer", 6))
    ki = int(opt(args, cfg, "inner", 4))
    specs, grid_file = _specs(args, cfg)
    reports, rejected = [], []
    X_, y_ = tr.matrix(), tr.grades()
    for spec in specs:
        if not spec.runnable:
            rejected.append({"model_id": spec.model_id, "reason": M.REJECTED_MODELS[spec.model_id]})
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = cv.nested_cv(spec, X_, y_, ko, ki, seed=seed, timed=not args.deterministic)
        rep.check()
        reports.append(rep)
        print(f"{spec.model_id}: {rep.train_perf}", file=sys.stderr)
    ranked = cv.rank_top(reports, len(reports))
    top = int(opt(args, cfg, "top", 4))
    task = _task(tr)
    config = {"outer": ko, "inner": ki, "top": top, "grid": grid_file or "default",
              "grids": {s.model_id: s.grid for s in specs}, "binary": bool(args.binary),
              "deterministic": bool(args.deterministic)}
    prov = R.provenance("train", config, {"seed": seed}, {"table": args.table})
    doc = {
        "provenance": prov,
        "task": task,
        "n_train": len(tr),
        "reports": [r.to_dict() for r in ranked],
        "top": [r.model_id for r in ranked[:top]],
        "rejected_models": rejected,
        "summary": dict(zip(["task", "best_model", "train_perf", "test_perf", "train_time_min"], _summary_rows(task, ranked[:1])[0])),
    }
    out = _out(args)
    R.write_json(out / "train.json", doc, args.force)
    text = R.text_table(TABLE_HEADER, _summary_rows(task, ranked))
    R.write_text(out / "train.txt", text, args.force)
    sys.stdout.write(text)


def cmd_evaluate(args, cfg):
    t = _read_table(args.table, args.binary)
    train = _train_part(t)
    test = _test_part(_read_table(args.test, args.binary)) if args.test else _test_part(t)
    if args.test and len(test) == 0:
        test = _read_table(args.test, args.binary)
    if len(test) == 0:
        raise InputError("no test records")
    cv.check_disjoint(train, test)
    try:
        tdoc = json.loads(Path(args.report).read_text())
    except FileNotFoundError:
        raise InputError(f"train report not found: {args.report}") from None
    reports = {r["model_id"]: cv.EvalReport.from_dict(r) for r in tdoc["reports"]}
    top_ids = tdoc["top"]
    seed = int(tdoc["provenance"]["seeds"]["seed"]) if args.seed is None else args.seed
    ki = int(tdoc["provenance"]["config"]["inner"])
    specs = {mid: grids.ModelSpec(mid, g) for mid, g in tdoc["provenance"]["config"]["grids"].items()}
    evaluated = cv.evaluate_test([reports[m] for m in top_ids], specs, train, test, k_inner=ki, seed=seed)
    task = _task(train)
    prov = R.provenance("evaluate", {"top": top_ids, "inner": ki}, {"seed": seed},
                        {"table": args.table, "report": args.report, **({"test": args.test} if args.test else {})})
    best = evaluated[0]
    doc = {
        "provenance": prov,
        "task": task,
        "n_train": len(train),
        "n_test": len(test),
        "reports": [r.to_dict() for r in evaluated],
        "best": {"model_id": best.model_id, "params": best.final_params, "seed": seed},
        "summary": dict(zip(["task", "best_model", "train_perf", "test_perf", "train_time_min"], _summary_rows(task, [best])[0])),
    }
    out = _out(args)
    R.write_json(out / "evaluate.json", doc, args.force)
    text = R.text_table(TABLE_HEADER, _summary_rows(task, evaluated))
    R.write_text(out / "evaluate.txt", text, args.force)
    sys.stdout.write(text)


# --------------------------------------------------------------------------- explain / tsne


def _model_spec(args):
    if args.evaluation:
        doc = json.loads(Path(args.evaluation).read_text())
        if args.model:
            match = [r for r in doc["reports"] if r["model_id"] == args.model]
            if not match:
                raise InputError(f"{args.model} not in {args.evaluation}")
            return args.model, match[0]["final_params"], doc["best"]["seed"]
        return doc["best"]["model_id"], doc["best"]["params"], doc["best"]["seed"]
    if not args.model:
        raise InputError("give --evaluation or --model")
    params = json.loads(args.params) if args.params else {}
    return args.model, params, 0


def cmd_explain(args, cfg):
    t = _read_table(args.table, args.binary)
    train = _train_part(t)
    target = _test_part(t) if len(_test_part(t)) else train
    mid, params, mseed = _model_spec(args)
    seed = _seed(args, cfg)
    prep = F.Preprocessor.fit(train.matrix())
    Xtr = prep.transform(train.matrix())
    model = M.fit(mid, params, Xtr, train.grades(), seed=mseed)
    bg = X.background_rows(Xtr, X.BACKGROUND_SIZE, seed)
    rows = prep.transform(target.matrix())[: int(opt(args, cfg, "max_samples", 10))]
    names = list(train.feature_names)
    perms = int(opt(args, cfg, "permutations", 100))
    exps = []
    for i, x in enumerate(rows):
        if len(names) <= X.MAX_EXACT:
            e = X.shapley_exact(model, bg, x, args.class_index, names)
        else:
            e = X.shapley_sampled(model, bg, x, args.class_index, perms, seed=seed + i, names=names)
        exps.append(e)
    ranked = X.aggregate_importance(exps)
    prov = R.provenance("explain", {"model_id": mid, "params": params, "permutations": perms,
                                    "background": len(bg), "class_index": args.class_index},
                        {"seed": seed, "model_seed": mseed}, {"table": args.table})
    ids = target.ids()
    doc = {"provenance": prov, **_task(train),
           "explanations": [{"image_id": ids[i], **e.to_dict()} for i, e in enumerate(exps)],
           "aggregate": [{"feature": f, "mean_abs_phi": v} for f, v in ranked]}
    out = _out(args)
    R.write_json(out / "explain.json", doc, args.force)
    R.write_text(out / "importance.csv", X.importance_csv(ranked), args.force)
    title = f"{train.schema.disease} {_task(train)['view']} feature importance ({mid})"
    R.write_text(out / "importance.svg", R.bar_chart_svg(ranked[:15], title, prov, not args.deterministic), args.force)
    for f, v in ranked[:15]:
        print(f"{f:>12s}  {v:.4g}")


def cmd_tsne(args, cfg):
    t = _read_table(args.table, args.binary)
    seed = _seed(args, cfg)
    perp = float(opt(args, cfg, "perplexity", 30.0))
    iters = int(opt(args, cfg, "iterations", 1000))
    Xs = F.Preprocessor.fit(t.matrix()).transform(t.matrix())
    res = tsne_embed(Xs, perp, iters, seed)
    prov = R.provenance("tsne", {"perplexity": perp, "iterations": iters}, {"seed": seed}, {"table": args.table})
    doc = {"provenance": prov, "kl_initial": res.kl_initial, "kl_final": res.kl_final,
           "points": [{"image_id": i, "grade": int(g), "x": float(p[0]), "y": float(p[1])}
                      for i, g, p in zip(t.ids(), t.grades(), res.embedding)]}
    out = _out(args)
    R.write_json(out / "tsne.json", doc, args.force)
    names = dict(t.schema.grades)
    svg = R.scatter_svg(res.embedding, t.grades().tolist(), f"t-SNE of {t.schema.disease} features", prov,
                        not args.deterministic, {g: f"{g}: {n[:28]}" for g, n in names.items()})
    R.write_text(out / "tsne.svg", svg, args.force)
    print(f"KL {res.kl_initial:.4f} -> {res.kl_final:.4f}; wrote {out / 'tsne.svg'}")


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (default: current)")
    common.add_argument("--deterministic", action="store_true", help="omit timestamps and wall-clock times")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")

    p = argparse.ArgumentParser(prog="retina-vasc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sy = sub.add_parser("synth", help="synthetic fixtures")
    sys_ = sy.add_subparsers(dest="what", required=True)
    st = sys_.add_parser("tree", parents=[common], help="vessel tree graph + ground truth")
    st.add_argument("--n-arterioles", dest="n_arterioles", type=int)
    st.add_argument("--n-venules", dest="n_venules", type=int)
    st.add_argument("--depth", type=int)
    st.add_argument("--tortuosity", dest="tortuosity_amplitude", type=float)
    st.add_argument("--asymmetry", type=float)
    st.add_argument("--murray-exponent", dest="murray_exponent", type=float)
    st.add_argument("--branch-angle", dest="branch_angle", type=float)
    st.add_argument("--trunk-width", dest="trunk_width", type=float)
    st.add_argument("--name")
    st.set_defaults(func=cmd_synth_tree)
    sk = sys_.add_parser("koch", parents=[common], help="Koch curve raster (PBM)")
    sk.add_argument("--level", type=int)
    sk.add_argument("--size", type=int)
    sk.set_defaults(func=cmd_synth_koch)
    sd = sys_.add_parser("dataset", parents=[common], help="separable feature table")
    sd.add_argument("--counts", help="comma-separated class sizes")
    sd.add_argument("--like", help="use the reference class counts of DR, ME or HTR")
    sd.add_argument("--disease")
    sd.add_argument("--n-features", dest="n_features", type=int)
    sd.add_argument("--separation", type=float)
    sd.add_argument("--test-fraction", dest="test_fraction", type=float)
    sd.add_argument("--name")
    sd.set_defaults(func=cmd_synth_dataset)

    q = sub.add_parser("quantify", parents=[common], help="vessel graphs -> feature CSV")
    q.add_argument("graphs", nargs="+")
    q.add_argument("--csv", help="output CSV name inside --out (default features.csv)")
    q.add_argument("--zones")
    q.add_argument("--disease")
    q.add_argument("--grade", type=int, help="grade for graphs without a label")
    q.add_argument("--labels", help="CSV with image_id,grade")
    q.set_defaults(func=cmd_quantify)

    r = sub.add_parser("regress", parents=[common], help="stepwise regression + VIF")
    r.add_argument("table")
    r.add_argument("--split", default="all", choices=["all", "train", "test", "unassigned"])
    r.add_argument("--p-enter", dest="p_enter", type=float)
    r.add_argument("--p-remove", dest="p_remove", type=float)
    r.set_defaults(func=cmd_regress)

    for name, func, hlp in (("train", cmd_train, "nested CV over model grids"), ("evaluate", cmd_evaluate, "top models on the test split")):
        c = sub.add_parser(name, parents=[common], help=hlp)
        c.add_argument("table")
        c.add_argument("--binary", action="store_true", help="absent vs present view")
        if name == "train":
            c.add_argument("--models", help="comma-separated model ids")
            c.add_argument("--grid", help="grid JSON (default: packaged listing)")
            c.add_argument("--outer", type=int)
            c.add_argument("--inner", type=int)
            c.add_argument("--top", type=int)
        else:
            c.add_argument("--report", required=True, help="train.json")
            c.add_argument("--test", help="separate test table")
        c.set_defaults(func=func)

    e = sub.add_parser("explain", parents=[common], help="Shapley importance + SVG")
    e.add_argument("table")
    e.add_argument("--binary", action="store_true")
    e.add_argument("--evaluation", help="evaluate.json; explains its best model")
    e.add_argument("--model", help="model id (with --params, or to pick from --evaluation)")
    e.add_argument("--params", help="JSON hyperparameters")
    e.add_argument("--class-index", dest="class_index", type=int)
    e.add_argument("--permutations", type=int)
    e.add_argument("--max-samples", dest="max_samples", type=int)
    e.set_defaults(func=cmd_explain)

    ts = sub.add_parser("tsne", parents=[common], help="t-SNE scatter SVG")
    ts.add_argument("table")
    ts.add_argument("--binary", action="store_true")
    ts.add_argument("--perplexity", type=float)
    ts.add_argument("--iterations", type=int)
    ts.set_defaults(func=cmd_tsne)
    return p


_INPUT_ERRORS = (InputError, ValueError, KeyError, FileExistsError, FileNotFoundError, json.JSONDecodeError,
                 V.GraphError, F.CsvError, cv.LeakageError, cv.StratificationError, M.UnsupportedModel)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except AssertionError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except _INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
