from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from conftest import make_instance
from elm_core import argmax_rows, hidden_map, one_hot, predict, train_elm
from errors import ClassMismatch, ConfigError, DegenerateWeights, DimensionMismatch, EmptyDomain
from numerics import l21_norm
from ptelm_solver import (PtelmHyperparams, beta_stationarity_residual, build_layers, count_small_rows,
                          fit_projection, gram_delta, iterate_beta_s, m_stationarity_residual, objective,
                          predict_target, smoothed_objective, smoothed_row_penalty, solve_beta_s,
                          subgradient_D, train_ptelm, transformed_objective, transformed_target_hidden,
                          update_beta_s, update_M)


def test_hyperparams_defaults_and_validation():
    hp = PtelmHyperparams()
    assert (hp.lambda1, hp.lambda2, hp.lambda3, hp.hidden_nodes) == (1.0, 30.0, 10.0, 500)
    assert PtelmHyperparams(lambda2=0.0, lambda3=0.0).lambda3 == 0.0
    for bad in ({"lambda1": 0.0}, {"lambda2": -1.0}, {"epsilon": 0.0}, {"hidden_nodes": 0},
                {"inner_max_iters": 2.5}, {"activation": "softplus"}, {"lambda3": float("nan")}):
        with pytest.raises(ConfigError):
            PtelmHyperparams(**bad)


def test_hyperparams_from_dict_ignores_foreign_keys():
    hp = PtelmHyperparams.from_dict({"lambda2": 5.0, "trials": 3})
    assert hp.lambda2 == 5.0
    assert hp.with_overrides(hidden_nodes=7).hidden_nodes == 7


def test_objective_components(instance):
    H_s, Y_s, H_t, Y_t = instance
    L, c = H_s.shape[1], Y_s.shape[1]
    hp = PtelmHyperparams(lambda1=2.0, lambda2=3.0, lambda3=0.5)
    beta = np.random.default_rng(0).normal(size=(L, c))
    M = np.eye(L)
    expected = (0.5 * np.sum((H_t @ beta - Y_t) ** 2) + np.sum((H_s @ beta - Y_s) ** 2)
                + 1.5 * l21_norm(beta) + 0.25 * np.sum(beta ** 2))
    assert objective(H_s, Y_s, H_t, Y_t, beta, M, hp) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(DimensionMismatch):
        objective(H_s, Y_s, H_t, Y_t, beta, np.eye(L + 1), hp)


def test_smoothed_penalty_lower_bounds_l21():
    beta = np.random.default_rng(1).normal(size=(6, 3))
    beta[2] = 0.0
    value = smoothed_row_penalty(beta, 1e-8)
    assert value <= l21_norm(beta)
    assert value == pytest.approx(l21_norm(beta), abs=1e-6)
    assert smoothed_row_penalty(np.zeros((3, 2)), 1e-8) == 0.0


def test_subgradient_D():
    beta = np.array([[3.0, 4.0], [0.0, 0.0]])
    np.testing.assert_allclose(np.diag(subgradient_D(beta, 1e-8)), [1.0 / (10.0 + 1e-8), 1e8])
    with pytest.raises(ConfigError):
        subgradient_D(beta, 0.0)


# ========== STATIONARITY ==========

@settings(max_examples=100, deadline=None)
@given(m=st.integers(1, 50), n=st.integers(0, 50), L=st.integers(1, 20), c=st.integers(1, 5),
       lambda1=st.floats(0.1, 10.0), lambda2=st.floats(0.1, 10.0), lambda3=st.floats(0.0, 10.0),
       seed=st.integers(0, 2**31))
def test_update_beta_s_stationarity(m, n, L, c, lambda1, lambda2, lambda3, seed):
    r = np.random.default_rng(seed)
    H_s, H_t = r.uniform(size=(m, L)), r.uniform(size=(n, L))
    Y_s, Y_t = r.uniform(-1, 1, size=(m, c)), r.uniform(-1, 1, size=(n, c))
    M = r.uniform(-1, 1, size=(L, L))
    D = subgradient_D(r.uniform(0.5, 1.5, size=(L, c)), 1e-8)
    hp = PtelmHyperparams(lambda1=lambda1, lambda2=lambda2, lambda3=lambda3)
    beta = update_beta_s(H_s, H_t, M, Y_s, Y_t, D, hp)
    bound = 1e-6 * (1 + np.linalg.norm(Y_s) + np.linalg.norm(Y_t))
    assert beta_stationarity_residual(H_s, H_t, M, Y_s, Y_t, D, beta, hp) <= bound


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 50), L=st.integers(1, 20), c=st.integers(1, 5),
       lambda3=st.floats(0.1, 10.0), seed=st.integers(0, 2**31))
def test_update_M_stationarity(n, L, c, lambda3, seed):
    r = np.random.default_rng(seed)
    H_t = r.uniform(size=(n, L))
    Y_t = r.uniform(-1, 1, size=(n, c))
    beta = r.uniform(-1, 1, size=(L, c))
    delta = gram_delta(beta, 1e-3)
    M = update_M(H_t, Y_t, beta, lambda3, delta)
    scale = 1 + np.linalg.norm(H_t.T @ Y_t @ beta.T)
    assert m_stationarity_residual(H_t, Y_t, beta, M, lambda3, delta) <= 1e-6 * scale


def test_update_M_stationarity_default_delta():
    r = np.random.default_rng(3)
    H_t, beta = r.uniform(size=(10, 3)), r.uniform(-1, 1, size=(3, 4))
    Y_t = one_hot(np.arange(10) % 4, 4)
    delta = gram_delta(beta, 1e-8)
    M = update_M(H_t, Y_t, beta, 2.0, delta)
    assert m_stationarity_residual(H_t, Y_t, beta, M, 2.0, delta) <= 1e-6 * (1 + np.linalg.norm(H_t.T @ Y_t))


def test_update_M_identity_case():
    Y_t = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(update_M(np.eye(2), Y_t, np.eye(2), 0.0, 0.0), Y_t)


def test_update_M_recovers_planted_projection():
    r = np.random.default_rng(8)
    H_t = r.uniform(size=(12, 3))
    beta = r.uniform(-1, 1, size=(3, 4))
    M0 = r.uniform(-1, 1, size=(3, 3))
    M = update_M(H_t, H_t @ M0 @ beta, beta, 0.0, 0.0)
    np.testing.assert_allclose(M, M0, rtol=1e-8, atol=1e-8)


def test_update_M_errors():
    with pytest.raises(DegenerateWeights):
        update_M(np.ones((3, 2)), np.ones((3, 2)), np.zeros((2, 2)), 1.0, 0.0)
    with pytest.raises(DimensionMismatch):
        update_M(np.ones((3, 2)), np.ones((3, 2)), np.ones((4, 2)), 1.0, 0.0)


def test_gram_delta():
    assert gram_delta(np.eye(4), 1e-8) == pytest.approx(1e-8)
    assert gram_delta(np.zeros((3, 2)), 1e-8) == 0.0


# ========== DESCENT ==========

DESCENT_HP = PtelmHyperparams(lambda1=1.0, lambda2=1.0, lambda3=1.0, epsilon=1e-12, delta=1e-12,
                              outer_max_iters=10, outer_tol=1e-14)
DEFAULT_SMOOTHING_HP = DESCENT_HP.with_overrides(epsilon=1e-8, delta=1e-8)


@pytest.mark.parametrize("hp", [DESCENT_HP, DEFAULT_SMOOTHING_HP], ids=["tight", "default"])
@pytest.mark.parametrize("seed", range(20))
def test_outer_objective_non_increasing(seed, hp):
    H_s, Y_s, H_t, Y_t = make_instance(seed, m=30, n=9, L=10, c=3)
    fit = fit_projection(H_s, Y_s, H_t, Y_t, hp)
    trace = fit.objective_trace
    assert len(trace) >= 2
    tol = 1e-10 * (1 + abs(trace[0]))
    for prev, cur in zip(trace, trace[1:]):
        assert cur <= prev + tol


@pytest.mark.parametrize("hp", [DESCENT_HP, DEFAULT_SMOOTHING_HP], ids=["tight", "default"])
@pytest.mark.parametrize("seed", range(20))
def test_inner_reweighting_non_increasing(seed, hp):
    H_s, Y_s, H_t, Y_t = make_instance(100 + seed, m=30, n=9, L=10, c=3)
    M = np.random.default_rng(seed).uniform(-1, 1, size=(10, 10))
    values = [smoothed_objective(H_s, Y_s, H_t, Y_t, beta, M, hp)
              for beta, _ in iterate_beta_s(H_s, H_t, M, Y_s, Y_t, hp)]
    tol = 1e-10 * (1 + abs(values[0]))
    # the first iterate comes from D = I, every later one is a majorize-minimize step
    for prev, cur in zip(values[1:], values[2:]):
        assert cur <= prev + tol


def test_iterate_beta_s_warm_start_uses_beta_init(instance):
    H_s, Y_s, H_t, Y_t = instance
    M = np.eye(H_s.shape[1])
    beta0 = np.ones((H_s.shape[1], 3))
    _, D = next(iterate_beta_s(H_s, H_t, M, Y_s, Y_t, DESCENT_HP, beta_init=beta0))
    np.testing.assert_allclose(D, subgradient_D(beta0, DESCENT_HP.epsilon))
    _, D = next(iterate_beta_s(H_s, H_t, M, Y_s, Y_t, DESCENT_HP))
    np.testing.assert_array_equal(D, np.eye(H_s.shape[1]))


# ========== ORACLE ==========

def _lbfgs_best(H_s, Y_s, H_t, Y_t, M, hp, starts=10):
    L, c = H_s.shape[1], Y_s.shape[1]
    r = np.random.default_rng(0)
    best = np.inf
    for _ in range(starts):
        x0 = r.normal(scale=0.5, size=L * c)
        res = minimize(lambda x: smoothed_objective(H_s, Y_s, H_t, Y_t, x.reshape(L, c), M, hp), x0,
                       method="L-BFGS-B", options={"maxiter": 5000, "gtol": 1e-10, "ftol": 1e-15})
        best = min(best, objective(H_s, Y_s, H_t, Y_t, res.x.reshape(L, c), M, hp))
    return best


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_solve_beta_s_matches_direct_minimization(seed):
    H_s, Y_s, H_t, Y_t = make_instance(200 + seed, m=20, n=6, L=5, c=3)
    M = np.random.default_rng(seed).uniform(-1, 1, size=(5, 5))
    hp = PtelmHyperparams(lambda1=1.0, lambda2=0.5, lambda3=1.0, inner_max_iters=500, inner_tol=1e-13)
    beta = solve_beta_s(H_s, H_t, M, Y_s, Y_t, hp)
    ours = objective(H_s, Y_s, H_t, Y_t, beta, M, hp)
    assert ours <= _lbfgs_best(H_s, Y_s, H_t, Y_t, M, hp) * (1 + 1e-4)


# ========== TRANSFORM VIEW ==========

def test_transformed_objective_agrees_without_bridge_term():
    r = np.random.default_rng(17)
    hp = PtelmHyperparams(lambda1=0.7, lambda2=2.0, lambda3=0.0)
    for k in range(50):
        H_s, Y_s, H_t, Y_t = make_instance(300 + k, m=15, n=7, L=6, c=3)
        beta = r.normal(size=(6, 3))
        M = r.normal(size=(6, 6))
        direct = objective(H_s, Y_s, H_t, Y_t, beta, M, hp)
        transformed = transformed_objective(H_s, Y_s, transformed_target_hidden(H_t, M), Y_t, beta, hp)
        assert transformed == pytest.approx(direct, rel=1e-12)


# ========== SPARSITY ==========

def _planted_instance():
    r = np.random.default_rng(2024)
    m, L, c = 300, 20, 3
    y = np.arange(m) % c
    Y = one_hot(y, c)
    H = 0.01 * r.standard_normal((m, L))
    H[:, :c] += 10.0 * Y + 0.1 * r.standard_normal((m, c))
    return H, Y


def test_row_sparsity_grows_with_lambda2():
    H, Y = _planted_instance()
    L, c = H.shape[1], Y.shape[1]
    empty_H, empty_Y, M = np.zeros((0, L)), np.zeros((0, c)), np.eye(L)
    counts = []
    for lambda2 in (0.1, 30.0, 1000.0):
        hp = PtelmHyperparams(lambda2=lambda2, lambda3=0.0, inner_max_iters=200, inner_tol=1e-12)
        beta = solve_beta_s(H, empty_H, M, Y, empty_Y, hp)
        counts.append(count_small_rows(beta, 1e-3))
    assert counts == sorted(counts)
    assert counts[-1] >= L // 2


# ========== DEGENERATE REDUCTIONS ==========

def test_source_only_step_equals_ridge_elm():
    r = np.random.default_rng(4)
    H, Y = r.uniform(size=(25, 6)), one_hot(np.arange(25) % 3, 3)
    hp = PtelmHyperparams(lambda1=2.5, lambda2=1.0, lambda3=0.0)
    beta = update_beta_s(H, np.zeros((0, 6)), np.eye(6), Y, np.zeros((0, 3)), np.eye(6), hp)
    np.testing.assert_allclose(beta, train_elm(H, Y, 2.5), rtol=1e-10)


def test_source_only_l21_solve_matches_reweighted_ridge():
    r = np.random.default_rng(5)
    H, Y = r.uniform(size=(25, 6)), one_hot(np.arange(25) % 3, 3)
    hp = PtelmHyperparams(lambda1=1.0, lambda2=2.0, lambda3=0.0, inner_max_iters=50, inner_tol=1e-300)
    beta = solve_beta_s(H, np.zeros((0, 6)), np.eye(6), Y, np.zeros((0, 3)), hp)
    # the same reweighting written out directly
    expected = np.linalg.solve(H.T @ H + 2.0 * np.eye(6), H.T @ Y)
    for _ in range(49):
        D = np.diag(1.0 / (2.0 * np.linalg.norm(expected, axis=1) + hp.epsilon))
        expected = np.linalg.solve(H.T @ H + 2.0 * D, H.T @ Y)
    np.testing.assert_allclose(beta, expected, rtol=1e-8, atol=1e-12)


def test_vanishing_lambda2_matches_train_elm():
    r = np.random.default_rng(6)
    H, Y = r.uniform(size=(40, 5)), one_hot(np.arange(40) % 3, 3)
    hp = PtelmHyperparams(lambda2=1e-10, lambda3=0.0, inner_max_iters=20)
    beta = solve_beta_s(H, np.zeros((0, 5)), np.eye(5), Y, np.zeros((0, 3)), hp)
    reference = train_elm(H, Y, 1e12)
    assert np.linalg.norm(beta - reference) <= 1e-6 * np.linalg.norm(reference)


def test_target_weights_collapse_to_target_ridge():
    # with β_s of full column rank, β_t = Mβ_s is the ridge fit of the target alone
    H_s, Y_s, H_t, Y_t = make_instance(11, m=40, n=9, L=12, c=3)
    hp = PtelmHyperparams(lambda1=1.0, lambda2=30.0, lambda3=10.0, delta=1e-10)
    fit = fit_projection(H_s, Y_s, H_t, Y_t, hp)
    reference = train_elm(H_t, Y_t, 1.0 / hp.lambda3)
    assert np.linalg.norm(fit.beta_t - reference) <= 1e-5 * np.linalg.norm(reference)


# ========== END TO END ==========

def _blobs(seed, angle_deg, per_class, d=2):
    r = np.random.default_rng(seed)
    angles = np.deg2rad(angle_deg) + 2 * np.pi * np.arange(3) / 3
    centers = 3.0 * np.column_stack([np.cos(angles), np.sin(angles)])
    y = np.repeat(np.arange(3), per_class)
    X = centers[y] + 0.3 * r.standard_normal((y.size, 2))
    if d > 2:
        X = np.hstack([X, r.standard_normal((y.size, d - 2))])
    return X, y


def test_train_ptelm_shares_layer_and_predicts():
    X_s, y_s = _blobs(0, 0.0, 30)
    X_t, y_t = _blobs(1, 30.0, 3)
    hp = PtelmHyperparams(hidden_nodes=30)
    model = train_ptelm(X_s, y_s, X_t, y_t, hp, seed=5)
    assert model.shares_layer
    assert model.beta_s.shape == (30, 3) and model.M.shape == (30, 30)
    np.testing.assert_allclose(model.beta_t, model.M @ model.beta_s)
    X_test, y_test = _blobs(2, 30.0, 20)
    pred = predict_target(model, X_test)
    assert pred.shape == (60,) and np.mean(pred == y_test) >= 0.8
    assert 0 <= model.row_sparsity() <= 30
    assert len(model.objective_trace) >= 1


def test_train_ptelm_deterministic():
    X_s, y_s = _blobs(0, 0.0, 20)
    X_t, y_t = _blobs(1, 45.0, 3)
    hp = PtelmHyperparams(hidden_nodes=20)
    a = train_ptelm(X_s, y_s, X_t, y_t, hp, seed=9)
    b = train_ptelm(X_s, y_s, X_t, y_t, hp, seed=9)
    np.testing.assert_array_equal(a.beta_s, b.beta_s)
    np.testing.assert_array_equal(a.M, b.M)


def test_build_layers_separate_for_different_dims():
    hp = PtelmHyperparams(hidden_nodes=8)
    shared = build_layers(4, 4, hp, seed=1)
    assert shared[0] is shared[1]
    source, target = build_layers(4, 6, hp, seed=1)
    assert source.n_features == 4 and target.n_features == 6
    X_s, y_s = _blobs(0, 0.0, 10)
    X_t, y_t = _blobs(1, 10.0, 3, d=5)
    model = train_ptelm(X_s, y_s, X_t, y_t, hp, seed=1)
    assert not model.shares_layer
    assert predict_target(model, X_t).shape == (9,)


def test_train_ptelm_errors():
    X_s, y_s = _blobs(0, 0.0, 5)
    hp = PtelmHyperparams(hidden_nodes=5)
    with pytest.raises(EmptyDomain):
        train_ptelm(X_s, y_s, np.zeros((0, 2)), np.zeros(0, dtype=int), hp, seed=0)
    with pytest.raises(ClassMismatch):
        train_ptelm(X_s[y_s < 2], y_s[y_s < 2], X_s, y_s, hp, seed=0, class_count=3)


def test_update_beta_s_without_projection_is_weighted_ridge(instance):
    H_s, Y_s, H_t, Y_t = instance
    L = H_s.shape[1]
    hp = PtelmHyperparams(lambda1=2.0, lambda2=0.5, lambda3=3.0)
    D = subgradient_D(np.random.default_rng(4).uniform(0.5, 1.5, size=(L, 3)), 1e-8)
    beta = update_beta_s(H_s, H_t, np.zeros((L, L)), Y_s, Y_t, D, hp)
    expected = np.linalg.solve(2.0 * H_s.T @ H_s + 0.5 * D, 2.0 * H_s.T @ Y_s)
    np.testing.assert_allclose(beta, expected, rtol=1e-8, atol=1e-12)


# ========== PREDICTION ==========

@pytest.fixture
def blob_model():
    X_s, y_s = _blobs(0, 0.0, 30)
    X_t, y_t = _blobs(1, 30.0, 3)
    model = train_ptelm(X_s, y_s, X_t, y_t, PtelmHyperparams(hidden_nodes=30), seed=5)
    X_test, _ = _blobs(2, 30.0, 20)
    return model, X_test


def test_predict_target_identity_projection_uses_beta_s(blob_model):
    model, X_test = blob_model
    identity = replace(model, M=np.eye(model.beta_s.shape[0]))
    np.testing.assert_array_equal(predict_target(identity, X_test),
                                  predict(model.source_layer, model.beta_s, X_test))


def test_predict_target_matches_composed_scores(blob_model):
    model, X_test = blob_model
    scores = hidden_map(model.target_layer, X_test) @ model.M @ model.beta_s
    top2 = np.sort(scores, axis=1)[:, -2:]
    clear = top2[:, 1] - top2[:, 0] > 1e-9
    assert clear.any()
    np.testing.assert_array_equal(predict_target(model, X_test)[clear], argmax_rows(scores)[clear])


def test_predict_target_duplicated_rows(blob_model):
    model, X_test = blob_model
    pred = predict_target(model, np.repeat(X_test[:1], 7, axis=0))
    assert pred.shape == (7,) and np.all(pred == pred[0])
