import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetfuse.benchmarks import (BASE_FUNCTIONS, PAPER_SUITE, BeamSpec, InfeasibleSpecError,
                                SyntheticFamilySpec, beam_deflections, gen_beam, gen_paper_suite,
                                gen_synthetic_family, second_moment, suite_pairs)

from oracles import beam_deflection

PHYS = dict(P=1e4, L=1.0, E=2e11)


def test_rectangular_closed_form():
    I = 0.1 * 0.2 ** 3 / 12
    assert second_moment("rectangular", {"B": 0.1, "H": 0.2}) == pytest.approx(6.6667e-5, rel=1e-4)
    d = beam_deflections(BeamSpec("rectangular"), np.array([[0.1, 0.2]]))[0]
    assert d == pytest.approx(beam_deflection(I=I, **PHYS), rel=1e-14)
    assert d == pytest.approx(2.5e-4, rel=1e-12)


def test_hollow_rect_closed_form():
    I = (0.1 * 0.2 ** 3 - 0.05 * 0.1 ** 3) / 12
    assert I == pytest.approx(6.25e-5, rel=1e-12)
    d = beam_deflections(BeamSpec("hollow_rect"), np.array([[0.1, 0.2, 0.05, 0.1]]))[0]
    assert d == pytest.approx(beam_deflection(I=I, **PHYS), rel=1e-14)
    assert d == pytest.approx(2.6667e-4, rel=1e-4)


def test_hollow_circ_closed_form():
    I = math.pi * (0.1 ** 4 - 0.05 ** 4) / 4
    assert I == pytest.approx(7.3631e-5, rel=1e-4)
    d = beam_deflections(BeamSpec("hollow_circ"), np.array([[0.1, 0.05]]))[0]
    assert d == pytest.approx(beam_deflection(I=I, **PHYS), rel=1e-14)
    assert d == pytest.approx(2.2635e-4, rel=1e-4)


def test_suite_counts_and_metadata():
    suite = gen_paper_suite(0)
    assert [(d.source_id, d.metadata["split"], d.n) for d in suite] == [
        ("RB", "train", 30), ("RB", "test", 1000), ("HRB", "train", 25), ("HRB", "test", 1000),
        ("HCB", "train", 8), ("HCB", "test", 1000)]
    assert suite_pairs(suite)["HCB"][0].input_names == ("R", "r")
    meta = suite[0].metadata
    assert meta["P_N"] == 1e4 and meta["E_Pa"] == 2e11 and meta["L_m"] == 1.0
    assert [s[2] for s in PAPER_SUITE] == [30, 25, 8]


def test_suite_deterministic():
    a, b = gen_paper_suite(5), gen_paper_suite(5)
    assert all(np.array_equal(x.X, y.X) and np.array_equal(x.y, y.y) for x, y in zip(a, b))
    c = gen_paper_suite(6)
    assert not np.array_equal(a[0].X, c[0].X)


def test_geometry_invariants():
    for ds in gen_paper_suite(1):
        X = ds.X
        assert np.all(X > 0)
        if ds.source_id == "HRB":
            assert np.all(X[:, 2] < X[:, 0]) and np.all(X[:, 3] < X[:, 1])
        if ds.source_id == "HCB":
            assert np.all(X[:, 1] < X[:, 0])
            assert np.all((X[:, 0] >= 0.05) & (X[:, 0] <= 0.2))


def test_absolute_ranges_rejection_sampling():
    spec = BeamSpec("hollow_circ", ranges={"R": (0.05, 0.2), "r": (0.01, 0.15)}, inner_ratio=None, seed=3)
    ds = gen_beam(spec, 50)
    assert ds.n == 50 and np.all(ds.X[:, 1] < ds.X[:, 0])
    bad = BeamSpec("hollow_circ", ranges={"R": (0.05, 0.1), "r": (0.2, 0.3)}, inner_ratio=None)
    with pytest.raises(InfeasibleSpecError):
        gen_beam(bad, 5)


@settings(max_examples=100)
@given(st.floats(0.05, 0.3), st.floats(0.05, 0.3), st.floats(1.001, 1.5))
def test_rectangular_monotone(B, H, k):
    spec = BeamSpec("rectangular")
    base = beam_deflections(spec, np.array([[B, H]]))[0]
    assert beam_deflections(spec, np.array([[B * k, H]]))[0] < base
    assert beam_deflections(spec, np.array([[B, H * k]]))[0] < base


@given(st.floats(0.05, 0.3), st.floats(0.05, 0.3))
def test_hollow_nests_rectangular(B, H):
    solid = beam_deflections(BeamSpec("rectangular"), np.array([[B, H]]))[0]
    thin = beam_deflections(BeamSpec("hollow_rect"), np.array([[B, H, 1e-4 * B, 1e-4 * H]]))[0]
    assert abs(thin - solid) / solid < 1e-6


def test_synthetic_identity_family():
    ref, src, (A, b) = gen_synthetic_family(SyntheticFamilySpec(A=np.eye(2), b=np.zeros(2), seed=2), 10, 10)
    f = BASE_FUNCTIONS["trig"]
    assert np.allclose(src.y, f(src.X), atol=0) and np.allclose(ref.y, f(ref.X), atol=0)


def test_synthetic_hidden_map_and_noise():
    ref, src, (A, b) = gen_synthetic_family(SyntheticFamilySpec(d_ref=2, d_s=3, seed=1), 20, 15)
    assert A.shape == (2, 3) and b.shape == (2,)
    mapped = src.X @ A.T + b
    assert np.all(np.abs(mapped) <= 1.0)
    assert np.allclose(src.y, BASE_FUNCTIONS["trig"](mapped))
    noisy = gen_synthetic_family(SyntheticFamilySpec(d_ref=2, d_s=3, seed=1, noise_sigma=0.1), 20, 15)[1]
    assert not np.allclose(noisy.y, src.y)
    with pytest.raises(ValueError):
        SyntheticFamilySpec(noise_sigma=-1)
