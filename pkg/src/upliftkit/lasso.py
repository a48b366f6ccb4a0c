"""L1-penalized logistic regression path and Qini-driven feature selection.

The penalized problem on the interaction design is

    minimize  (1/n) * sum_i [log(1 + exp(eta_i)) - y_i eta_i] + lam * ||b||_1

where the intercept is not penalized. Columns are standardized to mean 0 and
variance 1 before fitting; coefficients are reported on the original scale.
Each lambda is solved by proximal Newton: the log-likelihood is replaced by
its quadratic (IRLS) approximation, which is minimized by cyclic coordinate
descent with soft-thresholding, interleaved with exact solves of the model
restricted to the current active set.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.special import expit

from .data import DataValidationError, SplitConfig, UpliftDataset, UpliftWarning, split_uplift
from .estimators import InteractionFit, inter_predict, inter_uplift_fit
from .glm import INTERCEPT, FittedLogistic, build_design
from .qini import qini_area, qini_table_arrays


def soft_threshold(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def thread_count() -> int:
    """Parallelism cap from ``UPLIFTKIT_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("UPLIFTKIT_THREADS", "1")))
    except ValueError:
        return 1


def _objective(Z, y, b, lam, penalized) -> float:
    eta = Z @ b
    loss = np.mean(np.logaddexp(0.0, eta) - y * eta)
    return float(loss + lam * np.sum(np.abs(b[penalized])))


def _solve_lambda(Z, y, lam, b, penalized, tol, max_outer, max_inner):
    """Proximal-Newton / coordinate-descent solve at one lambda.

    Returns (coefficients, converged flag, outer iterations).
    """
    n, d = Z.shape
    b = b.copy()
    f_old = _objective(Z, y, b, lam, penalized)
    pen = penalized.tolist()
    for outer in range(1, max_outer + 1):
        p = expit(Z @ b)
        w = p * (1.0 - p)
        grad = Z.T @ (p - y) / n
        H = (Z * w[:, None]).T @ Z / n
        diag = np.diag(H).tolist()
        Hcols = [H[:, j] for j in range(d)]
        beta = b.copy()
        v = grad.copy()  # gradient of the quadratic model at beta

        def sweep(coords):
            max_delta = 0.0
            for j in coords:
                hjj = diag[j]
                if hjj <= 0.0:
                    continue
                z = hjj * beta[j] - v[j]
                new = soft_threshold(z, lam) / hjj if pen[j] else z / hjj
                delta = new - beta[j]
                if delta != 0.0:
                    v[:] += Hcols[j] * delta
                    beta[j] = new
                    if abs(delta) > max_delta:
                        max_delta = abs(delta)
            return max_delta

        # Full sweeps decide convergence. In between, the quadratic model is
        # minimized exactly on the current active set with signs held fixed;
        # the jump is kept only if no active sign flips.
        thr = tol * 1e-3
        for _ in range(max_inner):
            if sweep(range(d)) < thr:
                break
            active = np.flatnonzero((beta != 0.0) | ~penalized)
            if active.size == 0:
                continue
            sign = np.where(penalized[active], np.sign(beta[active]), 0.0)
            H_A = H[active]
            rhs = -lam * sign - grad[active] + H_A @ b
            try:
                cand = np.linalg.solve(H_A[:, active], rhs)
            except np.linalg.LinAlgError:
                continue
            if np.all((sign == 0.0) | (np.sign(cand) == sign)):
                beta[:] = 0.0
                beta[active] = cand
                v[:] = grad + H @ (beta - b)
        step = beta - b
        t = 1.0
        while True:
            cand = b + t * step
            f_new = _objective(Z, y, cand, lam, penalized)
            if f_new <= f_old + 1e-15 * (abs(f_old) + 1.0) or t < 1e-10:
                break
            t *= 0.5
        change = float(np.max(np.abs(cand - b)))
        b, f_old = cand, f_new
        if change < tol:
            return b, True, outer
    return b, False, max_outer


@dataclass
class LassoPath:
    """Solutions of the penalized interaction model along a lambda grid."""

    lambdas: np.ndarray
    columns: list[str]
    coefs: np.ndarray  # (nb_lambda, d), original scale
    std_coefs: np.ndarray  # (nb_lambda, d), standardized scale
    center: np.ndarray
    scale: np.ndarray
    lambda_max: float
    treat: str
    converged: np.ndarray
    warnings: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.lambdas)

    @property
    def coefficient_sets(self) -> list[dict[str, float]]:
        return [dict(zip(self.columns, map(float, row))) for row in self.coefs]

    @property
    def active_sets(self) -> list[list[str]]:
        return [self.active_set(k) for k in range(len(self))]

    def active_set(self, k: int) -> list[str]:
        return [c for c, b in zip(self.columns[1:], self.std_coefs[k, 1:]) if b != 0.0]

    def fit_at(self, k: int) -> InteractionFit:
        """The penalized solution at grid index ``k`` as an interaction model."""
        model = FittedLogistic(
            coefficients=dict(zip(self.columns, map(float, self.coefs[k]))),
            converged=bool(self.converged[k]),
            iterations=0,
            deviance=float("nan"),
            null_deviance=float("nan"),
            n_obs=0,
        )
        return InteractionFit(model, list(self.columns[1:]), self.treat)


def lambda_max(Z: np.ndarray, y: np.ndarray, penalized: np.ndarray) -> float:
    """Smallest penalty at which every penalized coefficient is zero."""
    r = y - y.mean()
    return float(np.max(np.abs(Z[:, penalized].T @ r)) / len(y))


def lasso_path(
    train: UpliftDataset,
    predictors: Sequence[str],
    nb_lambda: int = 100,
    lambda_ratio: float = 1e-4,
    lambdas: Sequence[float] | None = None,
    tol: float = 1e-10,
    max_outer: int = 100,
    max_inner: int = 10000,
    warm_start: bool = True,
) -> LassoPath:
    """L1 regularization path of the interaction model.

    The grid is log-spaced from ``lambda_max`` down to
    ``lambda_max * lambda_ratio`` unless explicit ``lambdas`` are given.
    """
    train.require_both_groups()
    X = build_design(train, predictors, with_treat_interactions=True)
    A = X.values
    y = train.y.astype(float)
    n, d = A.shape
    ybar = y.mean()
    if ybar in (0.0, 1.0):
        raise DataValidationError("the outcome is constant; the penalized path is undefined")

    center = np.zeros(d)
    scale = np.ones(d)
    center[1:] = A[:, 1:].mean(axis=0)
    sd = A[:, 1:].std(axis=0)
    constant = np.concatenate(([False], sd == 0))
    scale[1:] = np.where(sd > 0, sd, 1.0)
    Z = (A - center) / scale
    Z[:, 0] = 1.0
    Z[:, constant] = 0.0
    penalized = np.ones(d, dtype=bool)
    penalized[0] = False
    lmax = lambda_max(Z, y, penalized)

    if lambdas is None:
        if nb_lambda < 2:
            raise ValueError("nb_lambda must be at least 2")
        grid = np.geomspace(lmax, lmax * lambda_ratio, nb_lambda) if lmax > 0 else np.zeros(nb_lambda)
    else:
        grid = np.asarray(lambdas, dtype=float)
        if np.any(np.diff(grid) > 0):
            raise ValueError("lambdas must be non-increasing")

    null = np.zeros(d)
    null[0] = np.log(ybar / (1 - ybar))
    std_coefs = np.zeros((len(grid), d))
    converged = np.ones(len(grid), dtype=bool)
    notes = []
    b = null.copy()
    for k, lam in enumerate(grid):
        if lam >= lmax:
            b_k, ok = null.copy(), True
        else:
            start = b if warm_start else null
            b_k, ok, _ = _solve_lambda(Z, y, lam, start, penalized & ~constant, tol, max_outer, max_inner)
            if not ok:
                msg = f"lasso solve did not converge at lambda={lam:.6g}"
                notes.append(msg)
                warnings.warn(msg, UpliftWarning, stacklevel=2)
        std_coefs[k] = b_k
        converged[k] = ok
        b = b_k

    coefs = np.zeros_like(std_coefs)
    coefs[:, 1:] = std_coefs[:, 1:] / scale[1:]
    coefs[:, 0] = std_coefs[:, 0] - coefs[:, 1:] @ center[1:]
    return LassoPath(
        lambdas=grid,
        columns=list(X.column_names),
        coefs=coefs,
        std_coefs=std_coefs,
        center=center,
        scale=scale,
        lambda_max=lmax,
        treat=train.treat,
        converged=converged,
        warnings=notes,
    )


@dataclass
class QiniScan:
    lambdas: np.ndarray
    q_values: np.ndarray
    active_sizes: np.ndarray
    best_index: int
    best_lambda: float
    best_q: float
    selected_terms: list[str]
    path: LassoPath = field(repr=False)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"lambda": self.lambdas, "active_size": self.active_sizes, "qini": self.q_values})


def path_qini(path: LassoPath, k: int, score: UpliftDataset, nb_group: int) -> float:
    """Qini coefficient of the penalized model at grid index ``k``."""
    pred = inter_predict(path.fit_at(k), score)
    return qini_area(qini_table_arrays(score.y, score.t, pred, nb_group)).q


def order_terms(terms: Sequence[str], treat: str) -> list[str]:
    """Treatment first, then main effects, then interactions."""
    prefix = f"{treat}:"
    head = [t for t in terms if t == treat]
    main = [t for t in terms if t != treat and not t.startswith(prefix)]
    inter = [t for t in terms if t.startswith(prefix)]
    return head + main + inter


def best_features(
    ds: UpliftDataset,
    predictors: Sequence[str],
    nb_lambda: int = 100,
    nb_group: int = 10,
    validation: bool = False,
    p: float = 0.3,
    seed: int = 0,
    lambdas: Sequence[float] | None = None,
) -> QiniScan:
    """Pick the penalty maximizing the Qini coefficient along the lasso path.

    With ``validation`` a stratified (treatment, outcome) split holds out the
    fraction ``p`` for scoring; otherwise the fitting data is scored. Ties in
    the Qini coefficient go to the larger penalty.
    """
    if validation:
        if not 0 < p < 1:
            raise ValueError(f"p must lie in (0, 1), got {p}")
        fit_part, score_part = split_uplift(ds, SplitConfig(p=1 - p, strata=(ds.treat, ds.outcome), seed=seed))
    else:
        fit_part = score_part = ds
    path = lasso_path(fit_part, predictors, nb_lambda=nb_lambda, lambdas=lambdas)

    ks = range(len(path))
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            q = list(pool.map(lambda k: path_qini(path, k, score_part, nb_group), ks))
    else:
        q = [path_qini(path, k, score_part, nb_group) for k in ks]
    q = np.asarray(q, dtype=float)
    sizes = np.array([len(path.active_set(k)) for k in ks])
    best = int(np.argmax(q))
    terms = order_terms(path.active_set(best), ds.treat)
    if not sizes.any():
        warnings.warn("every lambda gives an empty active set; no feature selected", UpliftWarning, stacklevel=2)
    return QiniScan(
        lambdas=path.lambdas,
        q_values=q,
        active_sizes=sizes,
        best_index=best,
        best_lambda=float(path.lambdas[best]),
        best_q=float(q[best]),
        selected_terms=terms,
        path=path,
    )


def refit_selected(train: UpliftDataset, selected_terms: Sequence[str]) -> InteractionFit:
    """Unpenalized maximum-likelihood refit on the selected terms."""
    return inter_uplift_fit(train, input_mode="best", selected_terms=[t for t in selected_terms if t != INTERCEPT])
