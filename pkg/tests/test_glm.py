import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logit

from oracles import newton_logistic
from upliftkit.data import SchemaError, UpliftDataset, UpliftWarning
from upliftkit.glm import (
    INTERCEPT,
    DesignMatrix,
    FittedLogistic,
    RankDeficiencyError,
    build_design,
    fit_logistic,
    predict_prob,
)


def design(X, names=None):
    X = np.asarray(X, float)
    names = names or [INTERCEPT] + [f"x{k}" for k in range(1, X.shape[1])]
    return DesignMatrix(list(names), X, None)


def with_intercept(x):
    x = np.asarray(x, float).reshape(len(x), -1)
    return np.column_stack([np.ones(len(x)), x])


def test_build_design_columns():
    frame = pd.DataFrame({"y": [0, 1], "treat": [1, 0], "a": [2.0, 2.0], "b": [1.0, 3.0]})
    ds = UpliftDataset(frame, "y", "treat")
    assert build_design(ds, ["a", "b"]).column_names == [INTERCEPT, "a", "b"]
    X = build_design(ds, ["a", "b"], with_treat_interactions=True)
    assert X.column_names == [INTERCEPT, "a", "b", "treat", "treat:a", "treat:b"]
    np.testing.assert_array_equal(X.values[:, 4], [2.0, 0.0])
    np.testing.assert_array_equal(X.values[:, 0], [1.0, 1.0])


def test_build_design_errors():
    frame = pd.DataFrame({"y": [0, 1], "treat": [1, 0], "a": [2.0, 2.0]})
    ds = UpliftDataset(frame, "y", "treat")
    with pytest.raises(SchemaError):
        build_design(ds, ["a", "a"])
    with pytest.raises(SchemaError):
        build_design(ds, ["treat"], with_treat_interactions=True)


def test_intercept_only_closed_form():
    y = np.array([1, 0, 0, 0] * 5)
    fit = fit_logistic(design(np.ones((20, 1))), y)
    assert fit.converged
    assert fit.coefficients[INTERCEPT] == pytest.approx(np.log(0.25 / 0.75), abs=1e-6)


def test_small_example_matches_high_precision_newton():
    # non-separated variant of the 6-point design; reference from a 40-digit Newton solve
    x = [-2, -1, 0, 0, 1, 2]
    y = [0, 1, 0, 1, 0, 1]
    fit = fit_logistic(design(with_intercept(x)), y)
    assert fit.coef[0] == pytest.approx(0.0, abs=1e-10)
    assert fit.coef[1] == pytest.approx(0.4196176249910979, abs=1e-9)


def test_quasi_separation_warns():
    x = [-2, -1, 0, 0, 1, 2]
    y = [0, 0, 0, 1, 1, 1]
    with pytest.warns(UpliftWarning, match="did not converge"):
        fit = fit_logistic(design(with_intercept(x)), y)
    assert not fit.converged


def test_complete_separation_warns():
    x = np.tile([-1.0, 1.0], 10)
    y = np.tile([0, 1], 10)
    with pytest.warns(UpliftWarning):
        fit = fit_logistic(design(with_intercept(x)), y)
    assert not fit.converged


def test_rank_deficiency_names_column():
    rng = np.random.default_rng(0)
    a = rng.normal(size=30)
    X = np.column_stack([np.ones(30), a, 2 * a])
    with pytest.raises(RankDeficiencyError, match="x2"):
        fit_logistic(design(X), rng.integers(0, 2, 30))


def test_deviance_trace_monotone_and_below_null():
    rng = np.random.default_rng(5)
    X = with_intercept(rng.normal(size=(300, 3)))
    y = rng.binomial(1, 1 / (1 + np.exp(-(X @ [0.3, 1.0, -2.0, 0.5]))))
    fit = fit_logistic(design(X), y)
    assert np.all(np.diff(fit.deviance_trace) <= 1e-9)
    assert fit.deviance <= fit.null_deviance + 1e-8


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 3))
def test_irls_matches_dense_newton(seed, d):
    rng = np.random.default_rng(seed)
    X = with_intercept(rng.normal(size=(50, d)))
    beta = rng.normal(scale=0.7, size=d + 1)
    y = rng.binomial(1, 1 / (1 + np.exp(-(X @ beta))))
    if y.min() == y.max():
        return
    with warnings.catch_warnings():
        warnings.simplefilter("error", UpliftWarning)
        try:
            fit = fit_logistic(design(X), y)
        except UpliftWarning:
            return  # separated draw; no finite optimum
    ref = newton_logistic(X, y)
    np.testing.assert_allclose(fit.coef, ref, atol=1e-6)
    score = X.T @ (y - 1 / (1 + np.exp(-(X @ fit.coef))))
    assert np.max(np.abs(score)) < 1e-6


def test_predict_prob_examples():
    fit = FittedLogistic({INTERCEPT: 0.0, "a": 1.0}, True, 1, 0.0, 0.0, 10)
    assert predict_prob(fit, {INTERCEPT: 1.0, "a": 0.0}) == 0.5
    low = FittedLogistic({INTERCEPT: -2.1557961}, True, 1, 0.0, 0.0, 10)
    assert predict_prob(low, {INTERCEPT: 1.0}) == pytest.approx(0.1038, abs=5e-5)
    high = FittedLogistic({INTERCEPT: 40.0}, True, 1, 0.0, 0.0, 10)
    assert predict_prob(high, {INTERCEPT: 1.0}) >= 1 - 1e-15


def test_predict_prob_mismatch_lists_names():
    fit = FittedLogistic({INTERCEPT: 0.0, "a": 1.0}, True, 1, 0.0, 0.0, 10)
    with pytest.raises(SchemaError, match=r"missing=\['a'\].*extra=\['b'\]"):
        predict_prob(fit, {INTERCEPT: 1.0, "b": 2.0})


@given(st.floats(-30, 30), st.floats(-5, 5))
def test_log_odds_linear_without_intercept(beta, x):
    fit = FittedLogistic({"x": beta}, True, 1, 0.0, 0.0, 10)
    p1 = predict_prob(fit, {"x": x})
    p2 = predict_prob(fit, {"x": 2 * x})
    assert 0.0 <= p1 <= 1.0
    if 1e-6 < p1 < 1 - 1e-6 and 1e-6 < p2 < 1 - 1e-6:
        assert logit(p2) == pytest.approx(2 * logit(p1), abs=1e-6)


def test_json_round_trip_is_bit_exact():
    rng = np.random.default_rng(2)
    X = with_intercept(rng.normal(size=(100, 2)))
    y = rng.integers(0, 2, 100)
    fit = fit_logistic(design(X), y)
    back = FittedLogistic.from_json(fit.to_json())
    assert back.coefficients == fit.coefficients
    assert back.columns == fit.columns
    assert back.to_json() == fit.to_json()
