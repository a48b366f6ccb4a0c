"""Binary logistic regression fitted by iteratively reweighted least squares."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit

from .data import DataValidationError, SchemaError, UpliftDataset, UpliftError, UpliftWarning

INTERCEPT = "(Intercept)"


class RankDeficiencyError(UpliftError):
    """The design matrix does not have full column rank."""


def interaction_name(treat: str, feature: str) -> str:
    return f"{treat}:{feature}"


@dataclass(frozen=True)
class TermSpec:
    """Which design columns are main effects, the treatment, and interactions.

    ``interactions`` holds the feature names ``f`` whose ``treat:f`` column is
    present.
    """

    main: tuple[str, ...] = ()
    treat: str | None = None
    interactions: tuple[str, ...] = ()


@dataclass(frozen=True)
class DesignMatrix:
    column_names: list[str]
    values: np.ndarray
    term_spec: TermSpec

    @property
    def shape(self):
        return self.values.shape


def parse_terms(ds: UpliftDataset, terms: Sequence[str]) -> TermSpec:
    """Classify model term names against the dataset's treatment column."""
    main, inter, treat = [], [], None
    prefix = f"{ds.treat}:"
    seen = set()
    for term in terms:
        if term == INTERCEPT:
            continue
        if term in seen:
            raise SchemaError(f"duplicated term {term!r}")
        seen.add(term)
        if term == ds.treat:
            treat = ds.treat
        elif term.startswith(prefix):
            feat = term[len(prefix):]
            if feat not in ds.frame.columns:
                raise SchemaError(f"interaction {term!r} refers to unknown column {feat!r}")
            inter.append(feat)
        else:
            if term not in ds.frame.columns:
                raise SchemaError(f"unknown column {term!r}")
            main.append(term)
    return TermSpec(tuple(main), treat, tuple(inter))


def design_from_terms(ds: UpliftDataset, terms: Sequence[str], treat_value: int | None = None) -> DesignMatrix:
    """Intercept followed by ``terms`` in the order given.

    ``treat_value`` forces the treatment indicator (used to evaluate the
    counterfactual arms of the interaction model).
    """
    spec = parse_terms(ds, terms)
    t = ds.t.astype(float) if treat_value is None else np.full(ds.n, float(treat_value))
    names = [INTERCEPT]
    cols = [np.ones(ds.n)]
    prefix = f"{ds.treat}:"
    for term in terms:
        if term == INTERCEPT:
            continue
        names.append(term)
        if term == ds.treat:
            cols.append(t)
        elif term.startswith(prefix):
            cols.append(t * ds.numeric(term[len(prefix):]))
        else:
            cols.append(ds.numeric(term))
    return DesignMatrix(names, np.column_stack(cols), spec)


def build_design(ds: UpliftDataset, predictors: Sequence[str], with_treat_interactions: bool = False) -> DesignMatrix:
    """Design ``[(Intercept), predictors...]`` with optional treatment terms.

    With ``with_treat_interactions`` the treatment column and one
    ``treat:<p>`` product per predictor are appended.
    """
    predictors = list(predictors)
    if len(set(predictors)) != len(predictors):
        raise SchemaError(f"duplicated predictor names in {predictors}")
    if ds.outcome in predictors:
        raise SchemaError("the outcome column cannot be a predictor")
    if ds.treat in predictors:
        if with_treat_interactions:
            raise SchemaError("the treatment column cannot also be a predictor of the interaction design")
        raise SchemaError("the treatment column cannot be a predictor")
    for p in predictors:
        ds.numeric(p)
    terms = list(predictors)
    if with_treat_interactions:
        terms += [ds.treat] + [interaction_name(ds.treat, p) for p in predictors]
    return design_from_terms(ds, terms)


@dataclass
class FittedLogistic:
    coefficients: dict[str, float]
    converged: bool
    iterations: int
    deviance: float
    null_deviance: float
    n_obs: int
    deviance_trace: tuple[float, ...] = field(default=(), repr=False, compare=False)

    @property
    def columns(self) -> list[str]:
        return list(self.coefficients)

    @property
    def coef(self) -> np.ndarray:
        return np.array(list(self.coefficients.values()), dtype=float)

    def _check_columns(self, names: Sequence[str]) -> None:
        if list(names) != self.columns:
            missing = [c for c in self.columns if c not in names]
            extra = [c for c in names if c not in self.coefficients]
            if missing or extra:
                raise SchemaError(f"design columns do not match the fit: missing={missing}, extra={extra}")
            raise SchemaError("design columns are not in the fitted order")

    def linear_predictor(self, X: DesignMatrix) -> np.ndarray:
        self._check_columns(X.column_names)
        return X.values @ self.coef

    def predict(self, X: DesignMatrix) -> np.ndarray:
        return expit(self.linear_predictor(X))

    def to_dict(self) -> dict:
        return {
            "columns": self.columns,
            "coefficients": [float(v) for v in self.coefficients.values()],
            "converged": bool(self.converged),
            "deviance": float(self.deviance),
            "null_deviance": float(self.null_deviance),
            "iterations": int(self.iterations),
            "n_obs": int(self.n_obs),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FittedLogistic":
        cols, coefs = doc["columns"], doc["coefficients"]
        if len(cols) != len(coefs):
            raise SchemaError("columns and coefficients differ in length")
        return cls(
            coefficients={c: float(v) for c, v in zip(cols, coefs)},
            converged=bool(doc["converged"]),
            iterations=int(doc.get("iterations", 0)),
            deviance=float(doc["deviance"]),
            null_deviance=float(doc.get("null_deviance", float("nan"))),
            n_obs=int(doc.get("n_obs", 0)),
        )

    def to_json(self) -> str:
        # float repr is the shortest string that round-trips bit-exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FittedLogistic":
        return cls.from_dict(json.loads(text))


def predict_prob(fit: FittedLogistic, row: Mapping[str, float]) -> float:
    """Probability for a single design row given as ``{column: value}``."""
    missing = [c for c in fit.columns if c not in row]
    extra = [c for c in row if c not in fit.coefficients]
    if missing or extra:
        raise SchemaError(f"row does not match the fit: missing={missing}, extra={extra}")
    eta = sum(fit.coefficients[c] * float(row[c]) for c in fit.columns)
    return float(expit(eta))


def binomial_deviance(y: np.ndarray, eta: np.ndarray) -> float:
    """-2 log-likelihood, evaluated stably on the logit scale."""
    # log(1 + exp(eta)) - y * eta
    return float(2.0 * np.sum(np.logaddexp(0.0, eta) - y * eta))


def _null_deviance(y: np.ndarray, has_intercept: bool) -> float:
    if not has_intercept:
        return binomial_deviance(y, np.zeros_like(y, dtype=float))
    ybar = y.mean()
    if ybar in (0.0, 1.0):
        return 0.0
    return binomial_deviance(y, np.full(len(y), np.log(ybar / (1 - ybar))))


def check_rank(values: np.ndarray, names: Sequence[str], rtol: float = 1e-9) -> None:
    """Raise :class:`RankDeficiencyError` naming the first dependent column."""
    norms = np.linalg.norm(values, axis=0)
    r = np.linalg.qr(values, mode="r")
    diag = np.abs(np.diag(r))
    for j, name in enumerate(names):
        if norms[j] == 0 or diag[j] <= rtol * norms[j]:
            raise RankDeficiencyError(
                f"design matrix is rank deficient: column {name!r} is collinear with earlier columns"
            )


def fit_logistic(
    X: DesignMatrix,
    y: Sequence[float],
    tol: float = 1e-8,
    max_iter: int = 100,
    max_coef: float = 1e10,
) -> FittedLogistic:
    """Maximum-likelihood logistic regression via IRLS.

    Each iteration solves the weighted normal equations through a QR
    factorization of ``sqrt(W) X``. When a full step increases the deviance
    it is halved (up to 30 times). Iteration stops once the largest absolute
    coefficient change is below ``tol`` or after ``max_iter`` iterations.

    Under (quasi-)separation the MLE does not exist; a warning is issued and
    the last iterate is returned with ``converged=False``.
    """
    A = np.asarray(X.values, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = A.shape
    if len(y) != n:
        raise ValueError(f"y has {len(y)} rows, design has {n}")
    if not np.all((y == 0) | (y == 1)):
        raise DataValidationError("outcome must be binary")
    if n <= d:
        raise DataValidationError(f"need more observations ({n}) than design columns ({d})")
    check_rank(A, X.column_names)

    beta = np.zeros(d)
    eta = A @ beta
    dev = binomial_deviance(y, eta)
    trace = [dev]
    converged = False
    reason = None
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(eta)
        w = p * (1.0 - p)
        sw = np.sqrt(w)
        R = np.linalg.qr(sw[:, None] * A, mode="r")
        diag = np.abs(np.diag(R))
        col_norms = np.linalg.norm(sw[:, None] * A, axis=0)
        if np.any(diag <= 1e-12 * np.maximum(col_norms, 1e-300)):
            reason = "weights degenerated (fitted probabilities numerically 0 or 1)"
            break
        score = A.T @ (y - p)
        step = solve_triangular(R, solve_triangular(R, score, trans="T"))
        t = 1.0
        for _ in range(30):
            cand = beta + t * step
            cand_eta = A @ cand
            cand_dev = binomial_deviance(y, cand_eta)
            if cand_dev <= dev + 1e-12 * (abs(dev) + 1.0):
                break
            t *= 0.5
        else:
            reason = "step halving failed to decrease the deviance"
            break
        change = np.max(np.abs(cand - beta))
        beta, eta, dev = cand, cand_eta, cand_dev
        trace.append(dev)
        if np.max(np.abs(beta)) > max_coef:
            reason = "coefficients diverged"
            break
        if change < tol:
            converged = True
            break
    if not converged:
        if reason is None:
            reason = f"no convergence after {max_iter} iterations"
        warnings.warn(f"logistic fit did not converge: {reason}; possible separation", UpliftWarning, stacklevel=2)
    return FittedLogistic(
        coefficients={name: float(b) for name, b in zip(X.column_names, beta)},
        converged=converged,
        iterations=it,
        deviance=dev,
        null_deviance=_null_deviance(y, INTERCEPT in X.column_names),
        n_obs=n,
        deviance_trace=tuple(trace),
    )
