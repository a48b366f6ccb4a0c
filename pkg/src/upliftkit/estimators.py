"""Two-model and interaction-model uplift estimators.

Both estimators predict the uplift of a row as the difference between the
estimated response probability under treatment and under control.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from .data import DataValidationError, SchemaError, UpliftDataset
from .glm import (
    INTERCEPT,
    FittedLogistic,
    TermSpec,
    build_design,
    design_from_terms,
    fit_logistic,
    interaction_name,
    parse_terms,
)

PREDICTION = "uplift_prediction"


@dataclass
class TwoModelFit:
    model_control: FittedLogistic
    model_treated: FittedLogistic
    predictors: list[str]

    def to_dict(self) -> dict:
        return {
            "kind": "dual",
            "predictors": list(self.predictors),
            "model_control": self.model_control.to_dict(),
            "model_treated": self.model_treated.to_dict(),
        }


@dataclass
class InteractionFit:
    model: FittedLogistic
    terms: list[str]
    treat: str

    @property
    def term_spec(self) -> TermSpec:
        main, inter, treat = [], [], None
        prefix = f"{self.treat}:"
        for term in self.terms:
            if term == self.treat:
                treat = term
            elif term.startswith(prefix):
                inter.append(term[len(prefix):])
            else:
                main.append(term)
        return TermSpec(tuple(main), treat, tuple(inter))

    def to_dict(self) -> dict:
        return {"kind": "interaction", "treat": self.treat, "terms": list(self.terms), "model": self.model.to_dict()}


UpliftModel = TwoModelFit | InteractionFit


def _group_fit(ds: UpliftDataset, predictors: Sequence[str], arm: int, label: str) -> FittedLogistic:
    rows = np.flatnonzero(ds.t == arm)
    if rows.size == 0:
        raise DataValidationError(f"the {label} group is empty")
    sub = ds.take(rows)
    X = build_design(sub, predictors)
    if sub.n <= X.shape[1]:
        raise DataValidationError(
            f"the {label} group has {sub.n} rows, fewer than needed for {X.shape[1]} coefficients"
        )
    return fit_logistic(X, sub.y)


def dual_uplift_fit(train: UpliftDataset, predictors: Sequence[str]) -> TwoModelFit:
    """Fit separate logistic regressions on the control and treated rows."""
    predictors = list(predictors)
    control = _group_fit(train, predictors, 0, "control")
    treated = _group_fit(train, predictors, 1, "treated")
    return TwoModelFit(control, treated, predictors)


def dual_predict(fit: TwoModelFit, ds: UpliftDataset) -> np.ndarray:
    missing = [p for p in fit.predictors if p not in ds.frame.columns]
    if missing:
        raise SchemaError(f"missing predictor columns: {missing}")
    X = build_design(ds, fit.predictors)
    return fit.model_treated.predict(X) - fit.model_control.predict(X)


def inter_uplift_fit(
    train: UpliftDataset,
    predictors: Sequence[str] | None = None,
    input_mode: str = "all",
    selected_terms: Sequence[str] | None = None,
) -> InteractionFit:
    """Fit the single logistic model with treatment interactions.

    ``input_mode="all"`` builds ``[predictors, treat, treat:predictors]``;
    ``input_mode="best"`` uses exactly ``selected_terms`` (e.g. the output of
    :func:`upliftkit.lasso.best_features`), plus the intercept.
    """
    train.require_both_groups()
    if input_mode == "all":
        if predictors is None:
            raise ValueError("input_mode='all' requires predictors")
        predictors = list(predictors)
        X = build_design(train, predictors, with_treat_interactions=True)
        terms = X.column_names[1:]
    elif input_mode == "best":
        if selected_terms is None:
            raise ValueError("input_mode='best' requires selected_terms")
        terms = [t for t in selected_terms if t != INTERCEPT]
        parse_terms(train, terms)
        X = design_from_terms(train, terms)
    else:
        raise ValueError(f"input_mode must be 'all' or 'best', got {input_mode!r}")
    model = fit_logistic(X, train.y)
    return InteractionFit(model, list(terms), train.treat)


def _inter_eta(fit: InteractionFit, ds: UpliftDataset, arm: int) -> np.ndarray:
    if ds.treat != fit.treat:
        raise SchemaError(f"model was fitted with treatment column {fit.treat!r}, dataset uses {ds.treat!r}")
    X = design_from_terms(ds, fit.terms, treat_value=arm)
    return fit.model.linear_predictor(X)


def inter_predict(fit: InteractionFit, ds: UpliftDataset) -> np.ndarray:
    """Counterfactual difference p(x, treat=1) - p(x, treat=0).

    The dataset's own treatment values are ignored.
    """
    return expit(_inter_eta(fit, ds, 1)) - expit(_inter_eta(fit, ds, 0))


def predict_uplift(model: UpliftModel, ds: UpliftDataset) -> np.ndarray:
    if isinstance(model, TwoModelFit):
        return dual_predict(model, ds)
    return inter_predict(model, ds)


def with_prediction(ds: UpliftDataset, model: UpliftModel, column: str = PREDICTION) -> UpliftDataset:
    """Copy of ``ds`` with the predicted uplift appended as ``column``."""
    return ds.with_columns(**{column: predict_uplift(model, ds)})


def model_from_dict(doc: dict) -> UpliftModel:
    kind = doc.get("kind")
    if kind == "dual":
        return TwoModelFit(
            FittedLogistic.from_dict(doc["model_control"]),
            FittedLogistic.from_dict(doc["model_treated"]),
            list(doc["predictors"]),
        )
    if kind == "interaction":
        return InteractionFit(FittedLogistic.from_dict(doc["model"]), list(doc["terms"]), doc.get("treat", "treat"))
    raise SchemaError(f"unknown model kind {kind!r}")


def save_model(model: UpliftModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")


def load_model(path) -> UpliftModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def interaction_terms(treat: str, predictors: Sequence[str]) -> list[str]:
    """Term list of the full interaction design (intercept excluded)."""
    return list(predictors) + [treat] + [interaction_name(treat, p) for p in predictors]
