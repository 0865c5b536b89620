import math
from dataclasses import replace

import numpy as np
import pytest

from retina_vasc import features as F
from retina_vasc.features import CsvError, Record


def small_table(n=12, seed=0, disease="DR"):
    rng = np.random.default_rng(seed)
    names = ["CRAE-B", "FD-Ca", "cTORT-Bv", "NA-C"]
    X = rng.normal(size=(n, len(names)))
    X[1, 2] = math.nan
    y = np.arange(n) % len(F.get_schema(disease).grades)
    return F.table_from_arrays(X, y, names, F.get_schema(disease))


def test_feature_names_registry():
    names = F.feature_names(("B",))
    assert names[:3] == ["CRAE-B", "CRVE-B", "AVR-B"]
    assert "cTORT-Bv" in names and "NFB-Bt" in names and "NV-B" in names
    assert len(names) == 3 + 13 * 3 + 2
    assert F.parse_feature("FD-Ca") == ("FD", "C", "a")
    for bad in ("FD-Cq", "XX-B", "CRAE-Ba", "FD-C", "NA-Bv"):
        assert not F.is_feature(bad)


def test_csv_round_trip():
    t = small_table()
    text = F.dumps_csv(t)
    back = F.loads_csv(text)
    assert back == t
    assert F.dumps_csv(back) == text
    assert math.isnan(back.records[1].features["cTORT-Bv"])


def test_csv_round_trip_file(tmp_path):
    t = F.stratified_split(small_table(20), 0.25, 1)
    p = tmp_path / "t.csv"
    F.write_csv(t, p, provenance={"tool": "x"})
    back = F.read_csv(p)
    assert back == t
    assert back.meta["provenance"] == {"tool": "x"}


def test_invalid_grade_names_row():
    text = F.dumps_csv(small_table(4))
    lines = text.splitlines()
    cells = lines[4].split(",")
    cells[1] = "5"
    lines[4] = ",".join(cells)
    with pytest.raises(CsvError) as e:
        F.loads_csv("\n".join(lines))
    # header is row 1; comment lines are not counted
    assert e.value.row == 3 and e.value.column == "grade"
    assert "row 3" in str(e.value)


def test_unknown_column_and_bad_number():
    text = F.dumps_csv(small_table(3))
    with pytest.raises(CsvError) as e:
        F.loads_csv(text.replace("FD-Ca", "FD-Zq"))
    assert e.value.column == "FD-Zq"
    lines = text.splitlines()
    cells = lines[3].split(",")
    cells[-1] = "abc"
    lines[3] = ",".join(cells)
    with pytest.raises(CsvError) as e:
        F.loads_csv("\n".join(lines))
    assert (e.value.row, e.value.column) == (2, "NA-C")


def test_table_rejects_mismatched_columns():
    s = F.get_schema("ME")
    with pytest.raises(ValueError):
        F.FeatureTable(s, ("CRAE-B",), (Record("a", {"CRAE-B": 1.0, "FD-Ca": 2.0}, 0),))
    with pytest.raises(ValueError):
        F.FeatureTable(s, ("CRAE-B",), (Record("a", {"CRAE-B": 1.0}, 3),))


def test_table1_counts():
    counts = F.TABLE_COUNTS["DR"]["train"]
    y = np.repeat(np.arange(5), counts)
    t = F.table_from_arrays(np.zeros((len(y), 1)), y, ["CRAE-B"], F.get_schema("DR"), split="train")
    assert tuple(F.loads_csv(F.dumps_csv(t)).class_counts()["train"].values()) == (52, 20, 51, 40, 32)


def test_binary_view():
    t = small_table(10).binary_view()
    assert t.schema.binary and t.schema.grade_ids == [0, 1]
    assert set(t.grades()) == {0, 1}
    assert F.loads_csv(F.dumps_csv(t)).schema.binary


def test_filter_gradable():
    t = small_table(10)
    same, rep = F.filter_gradable(t)
    assert same == t and rep["dropped"] == 0
    recs = list(t.records)
    recs[2] = replace(recs[2], gradable=False)
    recs[5] = replace(recs[5], comorbidity_flag=True)
    recs[7] = replace(recs[7], gradable=False, comorbidity_flag=True)
    kept, rep = F.filter_gradable(t.with_records(recs))
    assert rep["dropped"] == 3 and len(kept) == 7
    assert rep["dropped_by_reason"] == {"ungradable": 2, "comorbidity": 2}


def test_controls_only_comorbidity_free():
    t = small_table(40, disease="HTR")
    recs = [replace(r, comorbidity_flag=(i % 3 == 0)) for i, r in enumerate(t.records)]
    t = t.with_records(recs)
    ctl = F.select_controls(t, 4, seed=2)
    assert len(ctl) == 4
    assert all(r.grade == 0 and not r.comorbidity_flag for r in ctl.records)
    with pytest.raises(ValueError):
        F.select_controls(t, 50, seed=2)


def _counts_table(counts, disease="HTR"):
    y = np.repeat(np.arange(len(counts)), counts)
    return F.table_from_arrays(np.zeros((len(y), 1)), y, ["CRAE-B"], F.get_schema(disease))


def test_split_balanced():
    t = _counts_table((50, 50), "ME")
    # ME has three grades; grade 2 is simply empty here
    s = F.stratified_split(t, 0.2, seed=0)
    cc = s.class_counts()
    assert cc["test"][0] == cc["test"][1] == 10
    assert cc["train"][0] == cc["train"][1] == 40
    assert F.stratified_split(t, 0.2, seed=0) == s
    assert F.stratified_split(t, 0.2, seed=1) != s


def test_split_htr_counts():
    s = F.stratified_split(_counts_table((85, 11, 15, 20, 16)), 0.2, seed=4)
    got = [s.class_counts()["test"][g] for g in range(5)]
    for g, want in zip(got, (17, 2, 3, 4, 3)):
        assert abs(g - want) <= 1


def test_split_guards():
    with pytest.raises(ValueError, match=r"\[1\]"):
        F.stratified_split(_counts_table((5, 1)), 0.2, 0)
    with pytest.raises(ValueError):
        F.stratified_split(_counts_table((5, 5)), 1.0, 0)


def test_scaler_examples():
    s = F.scaler_fit([[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]])
    out = F.scaler_apply(s, [[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]])
    assert out[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert out[:, 1].tolist() == [0.0, 0.0, 0.0]
    assert F.scaler_apply(s, [[8.0, 7.0]]).tolist() == [[1.5, 0.0]]


def test_scaler_train_columns_in_unit_interval():
    X = np.random.default_rng(3).normal(size=(30, 5)) * 7 + 2
    out = F.scaler_apply(F.scaler_fit(X), X)
    assert out.min() >= 0 and out.max() <= 1


def test_preprocessor_ignores_test_rows():
    rng = np.random.default_rng(1)
    train = rng.normal(size=(20, 3))
    train[0, 1] = math.nan
    a = F.Preprocessor.fit(train)
    test = rng.normal(size=(5, 3)) * 100
    b = F.Preprocessor.fit(train)
    assert np.array_equal(a.scaler.min_, b.scaler.min_) and np.array_equal(a.imputer.medians, b.imputer.medians)
    out = a.transform(test)
    assert np.isfinite(out).all()
    assert a.transform(train)[0, 1] == pytest.approx(
        (np.nanmedian(train[:, 1]) - np.nanmin(train[:, 1])) / (np.nanmax(train[:, 1]) - np.nanmin(train[:, 1]))
    )


def test_unknown_disease():
    with pytest.raises(ValueError):
        F.get_schema("glaucoma")
