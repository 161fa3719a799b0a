import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from costuplift.errors import ShapeError, ValidationError
from costuplift.regression import RidgeModel, fit_ridge, predict


def normal_equation_oracle(X, y, w, reg):
    """Solve the augmented weighted normal equations with numpy's dense solver."""
    A = np.column_stack([X, np.ones(len(y))])
    P = np.eye(A.shape[1]) * reg
    P[-1, -1] = 0.0
    beta = np.linalg.solve(A.T @ (A * w[:, None]) + P, A.T @ (w * y))
    return beta[:-1], beta[-1]


def test_exact_line():
    X = np.arange(5.0)[:, None]
    m = fit_ridge(X, 2 * X[:, 0] + 1)
    assert m.weights[0] == pytest.approx(2, abs=1e-12) and m.intercept == pytest.approx(1, abs=1e-12)


def test_constant_target():
    X = np.random.default_rng(0).normal(size=(20, 3))
    m = fit_ridge(X, np.full(20, 4.0))
    np.testing.assert_allclose(m.weights, 0, atol=1e-12)
    assert m.intercept == pytest.approx(4.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.1, 3.0]), st.booleans())
def test_matches_dense_oracle(seed, reg, weighted):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 4))
    y = rng.normal(size=40)
    w = rng.uniform(0.1, 2, 40) if weighted else np.ones(40)
    m = fit_ridge(X, y, w if weighted else None, reg)
    wo, bo = normal_equation_oracle(X, y, w, reg)
    np.testing.assert_allclose(m.weights, wo, atol=1e-8)
    assert m.intercept == pytest.approx(bo, abs=1e-8)


def test_residual_orthogonal_to_features():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(100, 5))
    y = rng.normal(size=100)
    r = y - fit_ridge(X, y).predict(X)
    np.testing.assert_allclose(np.column_stack([X, np.ones(100)]).T @ r, 0, atol=1e-9)


def test_norm_shrinks_with_regularization():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 6))
    y = X @ rng.normal(size=6) + rng.normal(size=50)
    norms = [np.linalg.norm(fit_ridge(X, y, reg_weight=r).weights) for r in (0, 0.1, 1, 10, 100)]
    assert all(a >= b for a, b in zip(norms, norms[1:]))


def test_weight_scale_invariance_unregularized():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 2))
    y = rng.normal(size=30)
    w = rng.uniform(0.5, 1.5, 30)
    a, b = fit_ridge(X, y, w), fit_ridge(X, y, 7.0 * w)
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-10)


def test_singular_design_flagged():
    x = np.arange(6.0)
    m = fit_ridge(np.column_stack([x, 2 * x]), 3 * x)
    assert m.singular
    np.testing.assert_allclose(m.predict(np.column_stack([x, 2 * x])), 3 * x, atol=1e-9)


def test_predict_shape_error():
    m = RidgeModel(np.zeros(3), 0.0)
    with pytest.raises(ShapeError):
        predict(m, np.zeros((2, 4)))


def test_invalid_inputs():
    with pytest.raises(ValidationError):
        fit_ridge(np.zeros((3, 1)), np.zeros(3), reg_weight=-1)
    with pytest.raises(ValidationError):
        fit_ridge(np.zeros((3, 1)), np.zeros(3), sample_weights=[1, -1, 1])
    with pytest.raises(ShapeError):
        fit_ridge(np.zeros((3, 1)), np.zeros(4))


def test_dict_round_trip():
    m = fit_ridge(np.random.default_rng(0).normal(size=(10, 2)), np.arange(10.0), reg_weight=0.5)
    back = RidgeModel.from_dict(m.to_dict())
    np.testing.assert_array_equal(back.weights, m.weights)
    assert back.intercept == m.intercept and back.reg_weight == 0.5
