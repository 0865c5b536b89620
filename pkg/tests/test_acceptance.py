"""Acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line (also repeated in
the pytest terminal summary). Run directly with ``python3 tests/test_acceptance.py``
to get just the lines.
"""

import contextlib
import os
import subprocess
import sys
import tempfile
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from retina_vasc import explain as E
from retina_vasc import features as F
from retina_vasc import params as P
from retina_vasc import stats as S
from retina_vasc import synth
from retina_vasc import vessel as V
from retina_vasc.cli import TABLE_HEADER, _summary_rows, main
from retina_vasc.ml import cv
from retina_vasc.ml.grids import load_specs
from retina_vasc.ml.metrics import roc_auc_binary
from retina_vasc.report import text_table

sys.path.insert(0, str(Path(__file__).parent))
from fixtures import shapley_fixture  # noqa: E402
from oracles import auc_pairs, box_count_bruteforce, fd_bruteforce, knudtson_by_hand, stepwise_oracle  # noqa: E402

RESULTS: list[str] = []


def record(n: int, ok: bool, detail: str):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


def _rel(a, b):
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


# --------------------------------------------------------------------------- 1


JUNCTION = ("JE", "BC", "AF", "BA", "AA")
GEOMETRY = ("MW", "STDW", "TORT")


def _tree_spec(i, tortuosity=0.0):
    rng = np.random.default_rng(500 + i)
    return synth.TreeSpec(
        n_arterioles=1 + i % 3,
        n_venules=1 + (i // 3) % 3,
        depth=1 + i % 4,
        murray_exponent=float(rng.uniform(2.0, 4.0)),
        asymmetry=float(rng.uniform(0.4, 1.0)),
        branch_angle=float(rng.uniform(50, 100)),
        tortuosity_amplitude=tortuosity,
        seed=i,
    )


def _worst(specs):
    worst = {"junction": 0.0, "geometry": 0.0}
    keys = 0
    for spec in specs:
        g, gt = synth.generate_tree(spec)
        fv = P.quantify(g, [V.ZONE_W])
        for k, want in gt.values.items():
            param = k.split("-")[0]
            group = "junction" if param in JUNCTION else "geometry" if param in GEOMETRY else None
            if group is None:
                continue
            worst[group] = max(worst[group], _rel(fv[k], want))
            keys += 1
    return worst, keys


def test_criterion_1_parameter_oracles():
    t0 = time.perf_counter()
    worst, keys = _worst([_tree_spec(i) for i in range(50)])
    elapsed = time.perf_counter() - t0
    # context only: tortuous trees carry polyline discretisation error in TORT
    tort, _ = _worst([_tree_spec(i, 0.15) for i in range(10)])
    ok = worst["junction"] <= 1e-9 and worst["geometry"] <= 1e-6 and elapsed < 10
    record(1, ok, f"50 trees, {keys} values; max rel err junction {worst['junction']:.2e} (<=1e-9), "
                  f"MW/STDW/TORT {worst['geometry']:.2e} (<=1e-6); {elapsed:.2f}s (<10s); "
                  f"[info: sinusoidal trees MW/STDW/TORT {tort['geometry']:.1e}]")


# --------------------------------------------------------------------------- 2


def test_criterion_2_knudtson():
    a = P.vessel_equivalent([1.0] * 6, "arteriole")
    v = P.vessel_equivalent([1.0] * 6, "venule")
    ha = knudtson_by_hand([1.0] * 6, 0.88)
    hv = knudtson_by_hand([1.0] * 6, 0.95)
    agree = abs(a - ha) <= 1e-12 and abs(v - hv) <= 1e-12
    ok_a, ok_v = abs(a - 1.7485) <= 1e-4, abs(v - 2.0395) <= 1e-4
    record(2, agree and ok_a and ok_v,
           f"arteriole {a:.6f} vs 1.7485 ({'ok' if ok_a else 'off'}); venule {v:.6f} vs 2.0395 "
           f"({'ok' if ok_v else f'off by {v - 2.0395:+.4f}'}); hand pairing agrees: {agree}")


# --------------------------------------------------------------------------- 3


def test_criterion_3_fractal_dimension():
    rasters = {"line": synth.line_raster(1024), "square": synth.square_raster(1024), "koch5": synth.koch_raster(5, 1024)}
    fd = {k: P.fractal_dimension(r) for k, r in rasters.items()}
    brute = {k: fd_bruteforce(r, P.FD_BOXES) for k, r in rasters.items()}
    counts_ok = all(
        list(P.box_counts(r, P.FD_BOXES)) == [box_count_bruteforce(r, s) for s in P.FD_BOXES] for r in rasters.values()
    )
    cross = max(abs(fd[k] - brute[k]) for k in fd)
    ok = (abs(fd["line"] - 1.0) <= 0.05 and fd["square"] >= 1.9 and abs(fd["koch5"] - 1.26) <= 0.08
          and counts_ok and cross <= 1e-12)
    record(3, ok, f"line {fd['line']:.4f}, square {fd['square']:.4f}, Koch L5 {fd['koch5']:.4f} "
                  f"(1.26 +/- 0.08); brute-force box counts equal: {counts_ok}, FD diff {cross:.1e}")


# --------------------------------------------------------------------------- 4


def test_criterion_4_auc():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 201))
        y = rng.integers(0, 2, n)
        y[rng.choice(n, 2, replace=False)] = [0, 1]
        # coarse rounding forces ties on many instances
        s = np.round(rng.normal(size=n), int(rng.integers(0, 4)))
        worst = max(worst, abs(roc_auc_binary(y, s) - auc_pairs(y, s)))
    ex = roc_auc_binary([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8])
    record(4, worst <= 1e-12 and ex == 0.75, f"1000 instances max |diff| {worst:.1e}; example {ex!r}")


# --------------------------------------------------------------------------- 5


def _axioms(i):
    """Fixture i truncated to at most 9 columns, plus a symmetric pair and a dummy, exact method."""
    model, B, x, ci = shapley_fixture(i)
    f, _ = E.output_fn(model, ci, x)
    p = min(len(x), 9)
    rng = np.random.default_rng(i)
    col = rng.normal(size=len(B))
    B2 = np.column_stack([B[:, :p], col, col, rng.normal(size=len(B))])
    s = float(rng.normal())
    x2 = np.concatenate([x[:p], [s, s, rng.normal()]])
    rest = np.asarray(x[p:], dtype=float)

    def g(Z):
        head = np.concatenate([Z[:, :p], np.repeat(rest[None], len(Z), 0)], axis=1)
        a, b = Z[:, p], Z[:, p + 1]
        return f(head) + np.sin(a + b) * a * b

    e = E.shapley_exact(g, B2, x2)
    return abs(e.gap()), abs(e.phi[p] - e.phi[p + 1]), abs(e.phi[p + 2])


def test_criterion_5_shapley():
    n_cmp, miss, worst_z = 0, 0, 0.0
    for i in range(20):
        model, B, x, ci = shapley_fixture(i)
        ex = E.shapley_exact(model, B, x, ci)
        s = E.shapley_sampled(model, B, x, ci, n_permutations=200, seed=i)
        d = np.abs(s.phi - ex.phi)
        z = np.where(s.se > 0, d / np.where(s.se > 0, s.se, 1), np.where(d > 1e-12, np.inf, 0.0))
        worst_z = max(worst_z, float(z.max()))
        miss += int((z > 3).sum())
        n_cmp += len(x)
    ax = [_axioms(i) for i in range(20)]
    gap, sym, dummy = (max(a[j] for a in ax) for j in range(3))
    ok = miss == 0 and gap <= 1e-12 and sym <= 1e-12 and dummy == 0.0
    record(5, ok, f"20 fixtures, {n_cmp} attributions: {miss} outside 3 SE (max {worst_z:.2f} SE); "
                  f"exact axioms: efficiency gap {gap:.1e}, symmetry diff {sym:.1e}, dummy |phi| {dummy:.1e}")


# --------------------------------------------------------------------------- 6


def test_criterion_6_stepwise():
    exact_ok = oracle_ok = scale_ok = 0
    for i in range(20):
        rng = np.random.default_rng(300 + i)
        p = 5 + i % 4
        X = rng.normal(size=(60, p))
        S_true = sorted(rng.choice(p, 1 + i % 3, replace=False).tolist())
        w = rng.uniform(0.5, 2.0, len(S_true)) * rng.choice([-1, 1], len(S_true))
        y = X[:, S_true] @ w + 1.5
        got = sorted(int(n[1:]) - 1 for n in S.stepwise_select(X, y).selected_features)
        exact_ok += got == S_true
    for i in range(30):
        rng = np.random.default_rng(400 + i)
        p = 2 + i % 7
        X = rng.normal(size=(50, p))
        y = X @ (rng.normal(size=p) * (rng.random(p) < 0.5)) * 0.5 + rng.normal(size=50)
        got = sorted(int(n[1:]) - 1 for n in S.stepwise_select(X, y).selected_features)
        oracle_ok += got == stepwise_oracle(X, y)
        scale = rng.uniform(0.01, 100, p)
        shift = rng.uniform(-50, 50, p)
        got2 = sorted(int(n[1:]) - 1 for n in S.stepwise_select(X * scale + shift, y).selected_features)
        scale_ok += got2 == got
    ok = exact_ok == 20 and oracle_ok == 30 and scale_ok == 30
    record(6, ok, f"noise-free recovery {exact_ok}/20; exhaustive oracle (<=8 candidates) {oracle_ok}/30; "
                  f"rescaling invariance {scale_ok}/30")


# --------------------------------------------------------------------------- 7


def _pipeline(separation, seed=7):
    t0 = time.perf_counter()
    tc = F.TABLE_COUNTS["DR"]
    counts = [a + b for a, b in zip(tc["train"], tc["test"])]
    tab = F.stratified_split(synth.make_separable_dataset(counts, 5, 88, separation, seed), 0.3, seed)
    tr, te = tab.split_part("train"), tab.split_part("test")
    specs = {s.model_id: s for s in load_specs(models=["RFC", "XGB"])}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reps = [cv.nested_cv(specs[m], tr.matrix(), tr.grades(), 6, 4, seed=0) for m in ("RFC", "XGB")]
        out = cv.evaluate_test(reps, specs, tr, te, 4, seed=0)
    return {r.model_id: (r.mean, r.test_score) for r in out}, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_7_end_to_end():
    sig, t_sig = _pipeline(6.0)
    null, t_null = _pipeline(0.0)
    ok_sig = all(m >= 0.90 and t >= 0.90 for m, t in sig.values())
    ok_null = all(abs(m - 0.5) <= 0.1 and abs(t - 0.5) <= 0.1 for m, t in null.values())
    ok = ok_sig and ok_null and t_sig < 300 and t_null < 300
    fmt = lambda d: ", ".join(f"{k} cv {m:.3f} test {t:.3f}" for k, (m, t) in sorted(d.items()))
    record(7, ok, f"separation 6: {fmt(sig)} (>=0.90) in {t_sig:.0f}s; "
                  f"separation 0: {fmt(null)} (0.5 +/- 0.1) in {t_null:.0f}s; limit 300s each")


# --------------------------------------------------------------------------- 8


@contextlib.contextmanager
def _record_preprocessors():
    fitted = []
    real = cv.Preprocessor

    class Spy:
        @staticmethod
        def fit(X):
            pre = real.fit(X)
            fitted.append((pre.imputer.medians.copy(), pre.scaler.min_.copy(), pre.scaler.max_.copy()))
            return pre

    cv.Preprocessor = Spy
    try:
        yield fitted
    finally:
        cv.Preprocessor = real


def _same(a, b):
    return all(np.array_equal(u, v) for u, v in zip(a, b))


def test_criterion_8_leakage():
    t = synth.make_separable_dataset((40, 16, 36, 26, 20), 5, 10, 3.0, seed=11)
    t = F.stratified_split(t, 0.3, 11)
    tr, te = t.split_part("train"), t.split_part("test")
    X, y = tr.matrix(), tr.grades()
    specs = {s.model_id: s for s in load_specs(models=["DTC", "KNC"])}
    checks = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for mid, spec in specs.items():
            _, te_idx = cv.stratified_kfold(y, 6, 0)[0]
            X2 = X.copy()
            X2[te_idx] = X2[te_idx] * -40 + 1e3
            with _record_preprocessors() as fa:
                a = cv.nested_cv(spec, X, y, 6, 4, seed=0, timed=False)
            with _record_preprocessors() as fb:
                b = cv.nested_cv(spec, X2, y, 6, 4, seed=0, timed=False)
            checks.append(_same(fa[0], fb[0]) and a.fold_params[0] == b.fold_params[0])

        reps = [cv.nested_cv(s, X, y, 6, 4, seed=0, timed=False) for s in specs.values()]
        te2 = te.with_records(replace(r, features={k: v * 7 - 100 for k, v in r.features.items()}) for r in te.records)
        with _record_preprocessors() as fa:
            ea = cv.evaluate_test(reps, specs, tr, te, 4, seed=0)
        with _record_preprocessors() as fb:
            eb = cv.evaluate_test(reps, specs, tr, te2, 4, seed=0)
    checks.append(_same(fa[0], fb[0]) and [r.final_params for r in ea] == [r.final_params for r in eb])

    with tempfile.TemporaryDirectory() as d:
        d = Path(d)
        stolen = tr.records[0]
        leak = te.with_records([*te.records, F.Record(stolen.image_id, stolen.features, stolen.grade, split="test")])
        F.write_csv(t, d / "t.csv")
        F.write_csv(leak, d / "leak.csv")
        quiet = dict(stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
        with contextlib.redirect_stdout(open(os.devnull, "w")), contextlib.redirect_stderr(open(os.devnull, "w")):
            rc_train = main(["train", str(d / "t.csv"), "--models", "GNB", "--outer", "3", "--inner", "3", "--out", str(d)])
        r = subprocess.run([sys.executable, "-m", "retina_vasc.cli", "evaluate", str(d / "t.csv"), "--report",
                            str(d / "train.json"), "--test", str(d / "leak.csv"), "--out", str(d)], **quiet)
    ok = all(checks) and rc_train == 0 and r.returncode == 2
    record(8, ok, f"outer-test mutation (DTC, KNC): scaler and params unchanged {checks[:2]}; "
                  f"test mutation in evaluate_test unchanged {checks[2]}; overlapping id exit code {r.returncode}")


# --------------------------------------------------------------------------- 9


REFERENCE_ROWS = [
    ("DR", "detection", "XGB", 0.776, 0.095, 0.602, ".776±.095", ".602"),
    ("HTR", "detection", "XGB", 0.986, 0.027, 0.937, ".986±.027", ".937"),
    ("ME", "detection", "XGB", 0.650, 0.115, 0.620, ".650±.115", ".620"),
    ("DR", "grading", "RFC", 0.799, 0.049, 0.721, ".799±.049", ".721"),
    ("HTR", "grading", "RFC", 0.976, 0.009, 0.889, ".976±.009", ".889"),
    ("ME", "grading", "ABC", 0.486, 0.077, 0.572, ".486±.077", ".572"),
]


def test_criterion_9_report_fidelity():
    import re

    cells_ok = True
    for dis, view, mid, m, s, ts, want_tr, want_te in REFERENCE_ROWS:
        rep = cv.EvalReport(mid, [m], m, s, [{}], 6, 4, 0, test_score=ts)
        row = _summary_rows({"disease": dis, "view": view}, [rep])[0]
        cells_ok &= row[1:4] == [mid, want_tr, want_te]
    table = text_table(TABLE_HEADER, [_summary_rows({"disease": "DR", "view": "grading"},
                                                    [cv.EvalReport("RFC", [0.8], 0.799, 0.049, [{}], 6, 4, 0, 0.721, None, 2.675)])[0]])
    golden = ("Task        Best Model  Train Perf. ROCAUC  Test Perf. ROCAUC  Train Time in min\n"
              "----------  ----------  ------------------  -----------------  -----------------\n"
              "DR grading  RFC         .799±.049           .721               2.675\n")
    table_ok = table == golden
    # regress sentence against the shape used in the text
    rng = np.random.default_rng(1)
    X = rng.normal(size=(290, 6))
    y = X[:, 0] * 0.8 + X[:, 3] * 0.4 + rng.normal(size=290)
    sentence = S.stepwise_select(X, y).sentence()
    pat = r"F\(\d+, \d+\) = \d+\.\d{3}, (p<\.0005|p = \.\d{3}), R² = \.\d{3}"
    paper = "F(51, 238) = 3.118, p<.0005, R² = .401"
    sent_ok = bool(re.fullmatch(pat, sentence)) and bool(re.fullmatch(pat, paper))
    ok = cells_ok and table_ok and sent_ok
    record(9, ok, f"reference results cells reproduced: {cells_ok}; golden table text: {table_ok}; "
                  f"regress sentence {sentence!r} matches shape: {sent_ok}")


# --------------------------------------------------------------------------- 10


PIPELINE = [
    ["synth", "tree", "--seed", "1", "--depth", "3", "--tortuosity", "0.1", "--name", "g1"],
    ["synth", "tree", "--seed", "2", "--depth", "2", "--asymmetry", "0.7", "--name", "g2"],
    ["quantify", "g1.json", "g2.json", "--csv", "quantified.csv"],
    ["synth", "dataset", "--counts", "30,12,24,18,14", "--n-features", "12", "--separation", "4", "--seed", "5", "--name", "d"],
    ["regress", "d.csv"],
    ["train", "d.csv", "--seed", "5"],
    ["evaluate", "d.csv", "--report", "train.json"],
    ["explain", "d.csv", "--evaluation", "evaluate.json", "--max-samples", "5"],
    ["tsne", "d.csv", "--iterations", "500"],
]


def _run_pipeline(workdir: Path, threads: int) -> dict:
    env = dict(os.environ, RETINA_VASC_THREADS=str(threads))
    for cmd in PIPELINE:
        r = subprocess.run([sys.executable, "-m", "retina_vasc.cli", *cmd, "--deterministic"], cwd=workdir, env=env,
                           stdout=subprocess.DEVNULL, stderr=subprocess.PIPE, text=True)
        if r.returncode != 0:
            raise AssertionError(f"{cmd[0]} failed ({r.returncode}): {r.stderr}")
    return {p.name: p.read_bytes() for p in sorted(workdir.iterdir())}


@pytest.mark.slow
def test_criterion_10_determinism():
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        ra = _run_pipeline(Path(a), 1)
        rb = _run_pipeline(Path(b), 8)
    data = [n for n in ra if n.endswith((".json", ".csv"))]
    diff = [n for n in ra if ra[n] != rb.get(n)]
    ok = set(ra) == set(rb) and not diff and len(data) >= 10
    record(10, ok, f"threads 1 vs 8: {len(ra)} artifacts ({len(data)} JSON/CSV) compared, "
                   f"{'all byte-identical' if not diff else 'differ: ' + ', '.join(diff)}")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted((k, v) for k, v in list(globals().items()) if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
