import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetfuse.dataset import fit_standardizer
from hetfuse.gp import (GpConfig, KernelParams, NuggetError, build_correlation_matrix, condition,
                        correlation, correlation_matrix, factorize, fit_gp, neg_log_likelihood,
                        nugget_ladder, output_scaling, predict, profile_likelihood)

from oracles import dense_corr, dense_nll, grid_fit_1d


def test_correlation_hand_values():
    assert correlation([0.3, -1.0], [0.3, -1.0], KernelParams(np.array([2.0, 5.0]))) == 1.0
    assert correlation([0.0], [1.0], KernelParams(np.array([1.0]))) == pytest.approx(math.exp(-1), abs=1e-15)
    assert correlation([0, 0], [1, 1], KernelParams(np.array([2.0, 3.0]))) == pytest.approx(0.0067379, abs=1e-7)


def test_correlation_length_mismatch():
    with pytest.raises(ValueError):
        correlation([0, 0], [1], KernelParams(np.array([1.0, 1.0])))


def test_kernel_params_reject_nonpositive():
    with pytest.raises(ValueError):
        KernelParams(np.array([1.0, 0.0]))


def test_single_point_matrix():
    assert correlation_matrix([[0.4, 2.0]], [1.0, 1.0], 1e-8).tolist() == [[1.0 + 1e-8]]


def test_duplicate_rows_escalate():
    X = np.array([[0.1], [0.1], [0.5]])
    _, nug = factorize(X, [1.0], 0.0, 1e-3)
    assert nug > 0
    C = build_correlation_matrix(X, [1.0], 0.0)
    assert np.all(np.linalg.eigvalsh(C) > 0)


def test_escalation_exhausted():
    X = np.array([[0.1], [0.1]])
    with pytest.raises(NuggetError):
        factorize(X, [1.0], 0.0, 0.0)


def test_two_point_eigenvalues():
    phi = [math.log(2.0)]  # exp(-phi) = 0.5 at unit distance
    C = correlation_matrix([[0.0], [1.0]], phi, 1e-8)
    ev = np.sort(np.linalg.eigvalsh(C))
    assert ev == pytest.approx([0.5 + 1e-8, 1.5 + 1e-8], abs=1e-12)


def test_nugget_ladder():
    assert nugget_ladder(1e-8, 1e-3) == pytest.approx([1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3])
    assert nugget_ladder(0.0, 1e-6)[:2] == [0.0, 1e-8]


@settings(max_examples=200)
@given(st.integers(1, 12), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_correlation_matrix_symmetric_psd(n, m, seed):
    r = np.random.default_rng(seed)
    X = r.uniform(-2, 2, size=(n, m))
    phi = 10 ** r.uniform(-3, 2, size=m)
    C = correlation_matrix(X, phi, 1e-8)
    assert np.array_equal(C, C.T)
    assert np.all(np.diag(C) == 1 + 1e-8)
    assert np.linalg.eigvalsh(C).min() > -1e-10


@given(st.integers(0, 2**31 - 1))
def test_nugget_raises_min_eigenvalue(seed):
    r = np.random.default_rng(seed)
    X = r.uniform(0, 1, size=(6, 2))
    lam = [np.linalg.eigvalsh(correlation_matrix(X, [5.0, 5.0], g)).min() for g in (0.0, 1e-6, 1e-3)]
    assert lam[0] < lam[1] < lam[2]


def test_nll_distant_points_hand_value():
    val = neg_log_likelihood([1.0], [[0.0], [100.0]], [-1.0, 1.0])
    assert val == pytest.approx(math.log(2 * math.pi) + 1, abs=1e-6)
    assert val == pytest.approx(2.83788, abs=1e-5)


def test_nll_constant_response_floors_variance():
    prof = profile_likelihood(np.array([[0.0], [1.0], [2.0]]), np.full(3, 4.0), [1.0])
    assert prof.sigma2 == 1e-12
    assert math.isfinite(prof.nll)


def test_nll_needs_two_rows():
    with pytest.raises(ValueError):
        neg_log_likelihood([1.0], [[0.0]], [1.0])


def test_nll_n3_dense_oracle():
    r = np.random.default_rng(3)
    X = r.uniform(0, 1, size=(3, 2))
    y = r.normal(size=3)
    phi = [2.0, 0.7]
    assert neg_log_likelihood(phi, X, y) == pytest.approx(dense_nll(X, y, phi), abs=1e-8)


@given(st.integers(2, 8), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_nll_matches_dense_oracle(n, m, seed):
    r = np.random.default_rng(seed)
    X = r.uniform(0, 1, size=(n, m))
    y = r.normal(size=n)
    phi = 10 ** r.uniform(0, 1.5, size=m)
    if np.linalg.cond(dense_corr(X, phi, 1e-8)) > 1e6:
        return
    assert neg_log_likelihood(phi, X, y) == pytest.approx(dense_nll(X, y, phi), abs=1e-8)


def test_optimizer_dominates_true_phi():
    r = np.random.default_rng(11)
    X = r.uniform(0, 1, size=(40, 2))
    phi_true = np.array([3.0, 8.0])
    C = dense_corr(X, phi_true, 1e-8)
    y = np.linalg.cholesky(C) @ r.normal(size=40)
    model = fit_gp(X, y, GpConfig(seed=0))
    xs = fit_standardizer(X)
    yc, ys = output_scaling(y)
    # the same kernel written in standardized coordinates
    nll_true = neg_log_likelihood(phi_true * xs.stds ** 2, xs.transform(X), (y - yc) / ys)
    assert model.trace["best_value"] <= nll_true + 1e-9


def test_constant_response_predicts_constant():
    X = np.linspace(0, 1, 6).reshape(-1, 1)
    model = fit_gp(X, np.full(6, 3.5), GpConfig(restarts=3))
    mean, var = model.predict(np.array([[0.13], [0.77], [2.0]]))
    assert mean == pytest.approx(3.5, abs=1e-9)
    assert np.all(var < 1e-9)


def test_sine_interpolation_against_grid_oracle():
    x = np.linspace(0, 1, 12)
    y = np.sin(2 * np.pi * x)
    grid = np.linspace(0, 1, 201)
    truth = np.sin(2 * np.pi * grid)
    oracle, _ = grid_fit_1d(x, y, 10 ** np.linspace(-3, 2, 121))
    oracle_rmse = float(np.sqrt(np.mean((oracle(grid) - truth) ** 2)))
    assert oracle_rmse < 0.05
    model = fit_gp(x.reshape(-1, 1), y)
    rmse = float(np.sqrt(np.mean((model.predict_mean(grid.reshape(-1, 1)) - truth) ** 2)))
    assert rmse < 0.05


def test_prediction_at_training_points():
    r = np.random.default_rng(5)
    X = r.uniform(0, 1, size=(15, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    model = fit_gp(X, y, GpConfig(restarts=4))
    mean, var = predict(model, X)
    assert np.all(np.abs(mean - y) <= 1e-6 * np.abs(y).max())
    assert np.all(var <= model.y_scale ** 2 * model.sigma2 * 10 * model.nugget)


def test_far_query_limit():
    X = np.array([[0.0], [0.3], [0.7], [1.0]])
    y = np.array([1.0, 2.0, 0.5, 1.5])
    model = condition(X, y, [4.0], fit_standardizer(X))
    mean, var = model.predict([[1e4]])
    assert mean[0] == pytest.approx(model.y_center + model.y_scale * model.mu, abs=1e-12)
    expect = model.y_scale ** 2 * model.sigma2 * (1 + 1 / model.one_Ci_one)
    assert var[0] == pytest.approx(expect, rel=1e-10)


def test_symmetric_midpoint_is_average():
    X = np.array([[0.0], [1.0]])
    y = np.array([2.0, 6.0])
    model = condition(X, y, [1.3], fit_standardizer(X))
    assert model.predict_mean([[0.5]])[0] == pytest.approx(4.0, abs=1e-12)


def test_query_dimension_checked():
    X = np.array([[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]])
    model = condition(X, [1.0, 2.0, 3.0], [1.0, 1.0], fit_standardizer(X))
    with pytest.raises(ValueError):
        model.predict([[0.1]])


def test_fit_is_seed_deterministic():
    r = np.random.default_rng(0)
    X = r.uniform(size=(10, 2))
    y = X.sum(axis=1) ** 2
    a = fit_gp(X, y, GpConfig(seed=4, restarts=3))
    b = fit_gp(X, y, GpConfig(seed=4, restarts=3))
    assert np.array_equal(a.phi, b.phi) and a.mu == b.mu
