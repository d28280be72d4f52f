import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from hetfuse.dataset import (DatasetError, FusedDataset, ManifestEntry, SourceDataset, SplitSpec,
                             Standardizer, fit_standardizer, load_csv, load_manifest_sources,
                             read_manifest, split, write_csv, write_manifest)


def _csv(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_three_rows(tmp_path):
    p = _csv(tmp_path, "R,r,deflection\n0.1,0.05,1e-4\n0.2,0.1,2e-5\n0.15,0.03,5e-5\n")
    ds = load_csv(p, ["R", "r"], "deflection", "HCB")
    assert (ds.n, ds.d) == (3, 2)
    assert ds.source_id == "HCB"
    assert ds.y[1] == 2e-5


def test_header_only_is_empty(tmp_path):
    p = _csv(tmp_path, "R,r,deflection\n")
    with pytest.raises(DatasetError, match="empty dataset"):
        load_csv(p, ["R", "r"], "deflection")


def test_nan_names_row(tmp_path):
    p = _csv(tmp_path, "R,r,deflection\n0.1,0.05,1e-4\n0.2,NaN,2e-5\n")
    with pytest.raises(DatasetError, match="row 2"):
        load_csv(p, ["R", "r"], "deflection")


@pytest.mark.parametrize("text,msg", [
    ("R,R,deflection\n1,2,3\n", "duplicate"),
    ("R,deflection\n1,2\n", "missing columns"),
    ("R,r,deflection\n1,abc,3\n", "row 1"),
])
def test_schema_errors(tmp_path, text, msg):
    with pytest.raises(DatasetError, match=msg):
        load_csv(_csv(tmp_path, text), ["R", "r"], "deflection")


def test_missing_file(tmp_path):
    with pytest.raises(DatasetError, match="missing file"):
        load_csv(tmp_path / "nope.csv", ["a"], "y")


def test_csv_round_trip_exact(tmp_path, rng):
    ds = SourceDataset("S", ("a", "b"), rng.normal(size=(7, 2)) * 1e-3, rng.normal(size=7), "out")
    write_csv(ds, tmp_path / "s.csv")
    back = load_csv(tmp_path / "s.csv", ["a", "b"], "out", "S")
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.y, ds.y)


def test_standardizer_hand_values():
    st_ = fit_standardizer([[0.0], [2.0]])
    assert st_.means.tolist() == [1.0] and st_.stds.tolist() == [1.0]
    assert st_.transform([[0.0], [2.0]]).tolist() == [[-1.0], [1.0]]


def test_standardizer_constant_column():
    with pytest.raises(DatasetError, match="constant"):
        fit_standardizer([[5.0], [5.0]])


def test_standardizer_idempotent_on_standardized(rng):
    X = rng.normal(size=(20, 3))
    Z = fit_standardizer(X).transform(X)
    assert np.allclose(fit_standardizer(Z).transform(Z), Z, atol=1e-10)


@given(arrays(np.float64, (6, 2), elements=st.floats(-1e3, 1e3)))
def test_standardizer_round_trip(X):
    if np.any(np.ptp(X, axis=0) < 1e-3):
        return
    s = fit_standardizer(X)
    Z = s.transform(X)
    assert np.allclose(Z.mean(axis=0), 0, atol=1e-9)
    assert np.allclose(Z.std(axis=0), 1, atol=1e-9)
    assert np.allclose(s.inverse(Z), X, rtol=1e-12, atol=1e-12 * np.abs(X).max())
    back = Standardizer.from_dict(json.loads(json.dumps(s.to_dict())))
    assert np.array_equal(back.means, s.means) and np.array_equal(back.stds, s.stds)


def test_split_examples():
    ds = SourceDataset("S", ("x",), np.arange(10.0), np.arange(10.0))
    tr, te = split(ds, SplitSpec(0.8, 7))
    assert (tr.n, te.n) == (8, 2)
    tr2, te2 = split(ds, SplitSpec(0.8, 7))
    assert np.array_equal(tr.X, tr2.X) and np.array_equal(te.X, te2.X)
    tr, te = split(ds, SplitSpec(1.0, 0))
    assert (tr.n, te.n) == (10, 0)
    one = SourceDataset("S", ("x",), [[1.0]], [2.0])
    tr, te = split(one, SplitSpec(0.1, 0))
    assert (tr.n, te.n) == (1, 0)


@given(st.integers(1, 50), st.floats(0.01, 1.0), st.integers(0, 1000))
def test_split_partitions(n, f, seed):
    ds = SourceDataset("S", ("x",), np.arange(float(n)), np.zeros(n))
    tr, te = split(ds, SplitSpec(f, seed))
    assert tr.n + te.n == n and tr.n >= 1
    assert sorted(np.concatenate([tr.X[:, 0], te.X[:, 0]]).tolist()) == list(range(n))


def test_fused_rejects_empty_label():
    with pytest.raises(DatasetError, match="empty"):
        FusedDataset(np.zeros((2, 1)), ["A", ""], [1.0, 2.0], "A", ("x",), Standardizer.identity(1))


def test_manifest_round_trip(tmp_path, rng):
    ds = SourceDataset("A", ("p",), rng.normal(size=(4, 1)), rng.normal(size=4), "y")
    sub = tmp_path / "d"
    sub.mkdir()
    write_csv(ds, sub / "a.csv")
    write_manifest([ManifestEntry("A", "a.csv", ("p",), "y")], sub / "m.json", {"note": 1})
    assert read_manifest(sub / "m.json")[0].csv_path == "a.csv"
    (loaded,) = load_manifest_sources(sub / "m.json")
    assert np.array_equal(loaded.X, ds.X)
    assert load_manifest_sources(sub / "m.json", "test") == []
