import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import kkt_violation, naive_kernel
from pemsbench.svr import (
    SvrConfig,
    SvrModel,
    dual_objective,
    fit_svr,
    gamma_scale,
    kernel_matrix,
    predict_svr,
    rbf_kernel,
)


def _fit_traced(X, y, cfg):
    states = []
    m = fit_svr(X, y, cfg, trace=states.append)
    return m, states


def test_gamma_scale_examples():
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(500, 13))
    Z = (Z - Z.mean(0)) / Z.std(0)
    assert gamma_scale(Z) == pytest.approx(1 / 13)
    assert gamma_scale(np.array([[-2.0], [2.0]])) == pytest.approx(0.25)
    X = rng.normal(size=(30, 3))
    assert gamma_scale(np.vstack([X, X])) == pytest.approx(gamma_scale(X), rel=1e-12)
    with pytest.raises(ValueError):
        gamma_scale(np.ones((4, 2)))


def test_rbf_kernel_examples():
    assert rbf_kernel([1.0, 2.0], [1.0, 2.0], 0.7) == 1.0
    assert rbf_kernel([0.0], [1.0], 1.0) == pytest.approx(math.exp(-1), abs=1e-15)
    assert rbf_kernel([0.0, 0.0], [0.6, 0.8], 1.0) == pytest.approx(0.36788, abs=1e-5)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 5.0))
def test_rbf_symmetry_and_range(seed, gamma):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=4), rng.normal(size=4)
    k = rbf_kernel(a, b, gamma)
    assert k == rbf_kernel(b, a, gamma)
    assert 0.0 <= k <= 1.0


@pytest.mark.parametrize("kernel", ["rbf", "linear"])
def test_kernel_matrix_matches_double_loop(kernel):
    rng = np.random.default_rng(1)
    A, B = rng.normal(size=(7, 3)), rng.normal(size=(5, 3))
    np.testing.assert_allclose(kernel_matrix(A, B, kernel, 0.4), naive_kernel(A, B, kernel, 0.4), atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_kkt_audit_random_problems(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 3))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] ** 2 + 0.1 * rng.normal(size=40)
    cfg = SvrConfig(C=float(rng.choice([0.5, 2.0, 10.0])), epsilon=0.1, tol=1e-4)
    m, states = _fit_traced(X, y, cfg)
    assert m.converged
    n = len(X)
    beta = states[-1][:n] - states[-1][n:]
    assert kkt_violation(X, y, beta, m.bias, cfg.C, cfg.epsilon, cfg.kernel, m.gamma) <= 1e-3


def test_model_invariants():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(60, 2))
    y = X[:, 0] - X[:, 1] ** 3
    cfg = SvrConfig(C=1.0)
    m = fit_svr(X, y, cfg)
    assert abs(m.dual_coef.sum()) < 1e-6
    assert np.all(np.abs(m.dual_coef) <= cfg.C + 1e-9)


def test_feasibility_and_ascent_after_every_update():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 2))
    y = np.cos(2 * X[:, 0]) + X[:, 1]
    cfg = SvrConfig(C=3.0, epsilon=0.05)
    _, states = _fit_traced(X, y, cfg)
    K = naive_kernel(X, X, "rbf", gamma_scale(X))
    n = len(X)
    prev = 0.0
    assert states
    for a in states:
        assert np.all(a >= -1e-12) and np.all(a <= cfg.C + 1e-12)
        assert abs(a[:n].sum() - a[n:].sum()) < 1e-9
        obj = dual_objective(a, K, y, cfg.epsilon)
        assert obj >= prev - 1e-10
        prev = obj


def test_linear_toy():
    x = np.linspace(-1, 1, 21)[:, None]
    m = fit_svr(x, 2 * x[:, 0], SvrConfig(C=1000.0, kernel="linear", epsilon=0.01))
    xt = np.linspace(-0.95, 0.95, 9)[:, None]
    np.testing.assert_allclose(m.predict(xt), 2 * xt[:, 0], atol=0.05)


def test_linear_zero_epsilon_approaches_least_squares():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(25, 2))
    y = X @ np.array([1.5, -0.5]) + 0.3
    m = fit_svr(X, y, SvrConfig(C=1e4, kernel="linear", epsilon=0.0, tol=1e-6))
    np.testing.assert_allclose(m.predict(X), y, atol=0.05)


def test_duplicated_single_point_inside_tube():
    # "scale" is undefined on zero-variance input, so gamma is fixed
    X = np.array([[0.3, 0.1], [0.3, 0.1]])
    cfg = SvrConfig(gamma=1.0, epsilon=0.1)
    m = fit_svr(X, np.array([2.0, 2.0]), cfg)
    assert abs(m.predict(X[:1])[0] - 2.0) <= cfg.epsilon + 1e-9


def test_free_support_vectors_sit_on_tube_edge():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 2))
    y = np.sin(X[:, 0]) + X[:, 1]
    cfg = SvrConfig(C=1.0, epsilon=0.1)
    m = fit_svr(X, y, cfg)
    free = (np.abs(m.dual_coef) > 1e-9) & (np.abs(m.dual_coef) < cfg.C - 1e-9)
    assert free.any()
    idx = [int(np.flatnonzero((X == sv).all(1))[0]) for sv in m.support_vectors[free]]
    resid = np.abs(m.predict(m.support_vectors[free]) - y[idx])
    np.testing.assert_allclose(resid, cfg.epsilon, atol=cfg.tol)


def test_zero_coefficients_give_bias():
    m = SvrModel(np.zeros((0, 3)), np.zeros(0), 1.25, "rbf", 0.5)
    np.testing.assert_array_equal(predict_svr(m, np.ones((4, 3))), [1.25] * 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["rbf", "linear"]))
def test_predict_matches_kernel_sum_oracle(seed, kernel):
    rng = np.random.default_rng(seed)
    sv = rng.normal(size=(6, 3))
    m = SvrModel(sv, rng.uniform(-2, 2, 6), float(rng.normal()), kernel, float(rng.uniform(0.1, 2)))
    Xq = rng.normal(size=(5, 3))
    oracle = [sum(c * k for c, k in zip(m.dual_coef, row)) + m.bias for row in naive_kernel(Xq, sv, kernel, m.gamma)]
    np.testing.assert_allclose(predict_svr(m, Xq), oracle, atol=1e-6)


def test_non_convergence_flag():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(40, 2))
    m = fit_svr(X, X[:, 0] ** 2, SvrConfig(C=10.0, max_iter=3))
    assert not m.converged and m.iterations == 3
    assert np.isfinite(m.predict(X)).all()


def test_errors():
    with pytest.raises(ValueError):
        SvrConfig(C=0)
    with pytest.raises(ValueError):
        SvrConfig(epsilon=-0.1)
    with pytest.raises(ValueError):
        SvrConfig(kernel="poly")
    with pytest.raises(ValueError):
        SvrConfig(gamma="auto")
    with pytest.raises(ValueError):
        fit_svr(np.array([[np.inf], [1.0]]), np.zeros(2))
    with pytest.raises(ValueError):
        fit_svr(np.zeros((1, 1)), np.zeros(1))


def test_dict_round_trip():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 2))
    m = fit_svr(X, X.sum(1))
    back = SvrModel.from_dict(m.to_dict())
    np.testing.assert_array_equal(back.predict(X), m.predict(X))
