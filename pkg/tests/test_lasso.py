
import numpy as np
import pandas as pd
import pytest
from scipy.special import expit

from upliftkit.data import UpliftDataset, UpliftWarning, encode_all_dummies
from upliftkit.estimators import inter_predict, inter_uplift_fit
from upliftkit.glm import INTERCEPT
from upliftkit.lasso import best_features, lasso_path, refit_selected, soft_threshold
from upliftkit.qini import qini_area, qini_table_arrays
from upliftkit.synthetic import make_uplift_frame


def ds_from(frame):
    return UpliftDataset(frame, "y", "treat")


def kkt_violation(path, ds, predictors, k):
    """Largest KKT residual of path point k in the standardized coordinates."""
    from upliftkit.glm import build_design

    A = build_design(ds, predictors, with_treat_interactions=True).values
    Z = (A - path.center) / path.scale
    Z[:, 0] = 1.0
    b = path.std_coefs[k]
    lam = path.lambdas[k]
    score = Z.T @ (ds.y - expit(Z @ b)) / ds.n
    worst = abs(score[0])
    for j in range(1, len(b)):
        if path.scale[j] == 1.0 and np.all(Z[:, j] == Z[0, j]):
            continue
        if b[j] == 0.0:
            worst = max(worst, abs(score[j]) - lam)
        else:
            worst = max(worst, abs(score[j] - lam * np.sign(b[j])))
    return worst


def test_soft_threshold():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0


def test_head_of_path_is_intercept_only(small_ds):
    path = lasso_path(small_ds, ["x1", "x2", "x3"], nb_lambda=10)
    assert np.all(path.coefs[0, 1:] == 0.0)
    ybar = small_ds.y.mean()
    assert path.coefs[0, 0] == pytest.approx(np.log(ybar / (1 - ybar)), abs=1e-12)
    assert path.active_set(0) == []
    assert path.lambdas[0] == path.lambda_max
    assert path.lambdas[-1] == pytest.approx(path.lambda_max * 1e-4)


def test_tail_approaches_mle():
    ds = ds_from(make_uplift_frame(200, 2, seed=21))
    path = lasso_path(ds, ["x1", "x2"], nb_lambda=100)
    mle = inter_uplift_fit(ds, ["x1", "x2"]).model.coef
    np.testing.assert_allclose(path.coefs[-1], mle, atol=1e-3)


@pytest.mark.parametrize("seed", range(5))
def test_kkt_along_path(seed):
    ds = ds_from(make_uplift_frame(150, 3, seed=seed))
    preds = ["x1", "x2", "x3"]
    path = lasso_path(ds, preds, nb_lambda=25)
    for k in range(len(path)):
        assert kkt_violation(path, ds, preds, k) < 1e-6


def test_warm_and_cold_starts_agree():
    ds = ds_from(make_uplift_frame(200, 3, seed=5))
    warm = lasso_path(ds, ["x1", "x2", "x3"], nb_lambda=20)
    cold = lasso_path(ds, ["x1", "x2", "x3"], nb_lambda=20, warm_start=False)
    np.testing.assert_allclose(warm.coefs, cold.coefs, atol=1e-6)


def test_scale_invariance_of_active_sets():
    frame = make_uplift_frame(300, 3, seed=6)
    ds = ds_from(frame)
    scaled = ds_from(frame.assign(x2=frame["x2"] * 1000.0))
    a = lasso_path(ds, ["x1", "x2", "x3"], nb_lambda=30)
    b = lasso_path(scaled, ["x1", "x2", "x3"], nb_lambda=30)
    assert a.active_sets == b.active_sets
    np.testing.assert_allclose(a.lambdas, b.lambdas, rtol=1e-12)


def test_planted_interaction_is_selected():
    rng = np.random.default_rng(0)
    n = 2000
    X = rng.normal(size=(n, 3))
    t = rng.integers(0, 2, n)
    y = rng.binomial(1, expit(-0.3 + 1.5 * t * X[:, 0]))
    frame = pd.DataFrame(X, columns=["x1", "x2", "x3"]).assign(treat=t, y=y)
    scan = best_features(ds_from(frame), ["x1", "x2", "x3"], nb_lambda=30)
    assert "treat:x1" in scan.selected_terms
    assert scan.best_q > scan.q_values[0]
    assert scan.best_q == np.max(scan.q_values)


def test_selection_is_grid_argmax_exactly(small_ds):
    scan = best_features(small_ds, ["x1", "x2", "x3"], nb_lambda=15, nb_group=5)
    recomputed = []
    for k in range(len(scan.lambdas)):
        pred = inter_predict(scan.path.fit_at(k), small_ds)
        recomputed.append(qini_area(qini_table_arrays(small_ds.y, small_ds.t, pred, 5)).q)
    assert max(recomputed) == scan.best_q
    assert recomputed == list(scan.q_values)


def test_degenerate_grid_warns(small_ds):
    lmax = lasso_path(small_ds, ["x1"], nb_lambda=2).lambda_max
    with pytest.warns(UpliftWarning, match="empty active set"):
        scan = best_features(small_ds, ["x1"], lambdas=[2 * lmax, lmax])
    assert scan.selected_terms == []


def test_validation_split_scores_holdout(small_ds):
    a = best_features(small_ds, ["x1", "x2"], nb_lambda=10, validation=True, p=0.3, seed=1)
    b = best_features(small_ds, ["x1", "x2"], nb_lambda=10, validation=True, p=0.3, seed=1)
    assert a.best_q == b.best_q and a.selected_terms == b.selected_terms
    with pytest.raises(ValueError):
        best_features(small_ds, ["x1"], validation=True, p=1.5)


def test_threads_do_not_change_result(small_ds, monkeypatch):
    base = best_features(small_ds, ["x1", "x2"], nb_lambda=12)
    monkeypatch.setenv("UPLIFTKIT_THREADS", "4")
    par = best_features(small_ds, ["x1", "x2"], nb_lambda=12)
    np.testing.assert_array_equal(base.q_values, par.q_values)


def test_refit_all_terms_equals_full_fit(small_ds):
    preds = ["x1", "x2"]
    full = inter_uplift_fit(small_ds, preds)
    refit = refit_selected(small_ds, ["x1", "x2", "treat", "treat:x1", "treat:x2"])
    np.testing.assert_allclose(refit.model.coef, full.model.coef, atol=1e-12)


def test_refit_empty_selection_predicts_zero(small_ds):
    fit = refit_selected(small_ds, [])
    assert fit.model.columns == [INTERCEPT]
    np.testing.assert_array_equal(inter_predict(fit, small_ds), 0.0)


def test_terms_ordered_treat_first(email_ds):
    ds = encode_all_dummies(email_ds)
    preds = [c for c in ds.features]
    scan = best_features(ds, preds, nb_lambda=20, nb_group=5)
    terms = scan.selected_terms
    if "treat" in terms:
        assert terms[0] == "treat"
    inter = [i for i, t in enumerate(terms) if t.startswith("treat:")]
    main = [i for i, t in enumerate(terms) if t != "treat" and not t.startswith("treat:")]
    assert not inter or not main or max(main) < min(inter)
