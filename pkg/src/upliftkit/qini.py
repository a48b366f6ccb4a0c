"""Qini table, Qini curve, per-group uplift bars and the Qini coefficient."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import DataValidationError, SchemaError, UpliftDataset, UpliftWarning
from .estimators import PREDICTION


def overall_uplift(ds: UpliftDataset) -> float:
    """Treated response rate minus control response rate."""
    return _overall(ds.y, ds.t)


def _overall(y: np.ndarray, t: np.ndarray) -> float:
    n_t = int(t.sum())
    n_c = len(t) - n_t
    if n_t == 0 or n_c == 0:
        raise DataValidationError(f"overall uplift needs both groups (treated={n_t}, control={n_c})")
    return float((y * t).sum() / n_t - (y * (1 - t)).sum() / n_c)


@dataclass(frozen=True)
class QiniTable:
    """Cumulative counts at the grid points phi_1 < ... < phi_J = 1.

    Row j describes the top ``cum_n[j]`` rows ranked by predicted uplift.
    ``uplift`` is the observed uplift of the rows between grid points j-1
    and j (the bar heights).
    """

    nb_group: int
    phi: np.ndarray
    cum_n: np.ndarray
    cum_treated: np.ndarray
    cum_treated_resp: np.ndarray
    cum_control: np.ndarray
    cum_control_resp: np.ndarray
    h: np.ndarray
    g: np.ndarray
    uplift: np.ndarray
    n_treated_total: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "group": np.arange(1, self.nb_group + 1),
                "phi": self.phi,
                "cum_n": self.cum_n,
                "cum_treated": self.cum_treated,
                "cum_treated_resp": self.cum_treated_resp,
                "cum_control": self.cum_control,
                "cum_control_resp": self.cum_control_resp,
                "incremental_uplift": self.h,
                "relative_incremental_uplift": self.g,
                "group_uplift": self.uplift,
            }
        )


@dataclass(frozen=True)
class QiniResult:
    q: float
    q_raw: float
    curve_points: list[tuple[float, float]]
    bar_values: list[float]


def qini_table_arrays(y, t, pred, nb_group: int = 10) -> QiniTable:
    y = np.asarray(y, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    pred = np.asarray(pred, dtype=float)
    n = len(pred)
    if nb_group < 2:
        raise ValueError("nb_group must be at least 2")
    if n < nb_group:
        raise DataValidationError(f"need at least nb_group={nb_group} rows, got {n}")
    if np.isnan(pred).any():
        raise DataValidationError("predictions contain NaN")
    n_treated = int(t.sum())
    if n_treated == 0 or n_treated == n:
        raise DataValidationError("the scored data must contain treated and control rows")

    order = np.argsort(-pred, kind="stable")
    ys, ts = y[order], t[order]
    ct = np.cumsum(ts)
    cyt = np.cumsum(ys * ts)
    cc = np.cumsum(1 - ts)
    cyc = np.cumsum(ys * (1 - ts))

    j = np.arange(1, nb_group + 1)
    ends = -((-j * n) // nb_group)  # ceil(j n / J)
    idx = ends - 1
    cum_t, cum_yt, cum_c, cum_yc = ct[idx], cyt[idx], cc[idx], cyc[idx]

    ratio = np.zeros(nb_group)
    ok = cum_c > 0
    ratio[ok] = cum_t[ok] / cum_c[ok]
    if not ok.all():
        warnings.warn(
            "some grid points contain no control rows; their control term is set to 0",
            UpliftWarning,
            stacklevel=2,
        )
    h = cum_yt - cum_yc * ratio
    g = h / n_treated

    # per-group (non-cumulative) observed uplift
    prev = lambda a: np.concatenate(([0], a[:-1]))
    gt, gyt = cum_t - prev(cum_t), cum_yt - prev(cum_yt)
    gc, gyc = cum_c - prev(cum_c), cum_yc - prev(cum_yc)
    with np.errstate(invalid="ignore", divide="ignore"):
        uplift = gyt / gt - gyc / gc
    if np.isnan(uplift).any():
        warnings.warn("some groups lack treated or control rows; their uplift is NaN", UpliftWarning, stacklevel=2)

    return QiniTable(
        nb_group=nb_group,
        phi=ends / n,
        cum_n=ends,
        cum_treated=cum_t,
        cum_treated_resp=cum_yt,
        cum_control=cum_c,
        cum_control_resp=cum_yc,
        h=h,
        g=g,
        uplift=uplift,
        n_treated_total=n_treated,
    )


def qini_table(ds: UpliftDataset, nb_group: int = 10, prediction: str = PREDICTION) -> QiniTable:
    """Rank rows by descending predicted uplift and accumulate counts.

    Grid point j covers the first ``ceil(j n / J)`` rows; ties in the
    prediction keep the original row order.
    """
    if prediction not in ds.frame.columns:
        raise SchemaError(f"prediction column {prediction!r} not found")
    return qini_table_arrays(ds.y, ds.t, ds.numeric(prediction), nb_group)


def qini_area(table: QiniTable) -> QiniResult:
    """Qini coefficient from trapezoid integration of the percent-scaled curve.

    ``q_raw`` is the area under ``100 * g`` with the origin prepended and
    ``q`` subtracts the random-targeting triangle ``100 * g(1) / 2``.
    """
    x = np.concatenate(([0.0], table.phi))
    G = np.concatenate(([0.0], 100.0 * table.g))
    q_raw = float(0.5 * np.sum((x[1:] - x[:-1]) * (G[1:] + G[:-1])))
    q = q_raw - G[-1] / 2.0
    return QiniResult(
        q=float(q),
        q_raw=q_raw,
        curve_points=[(float(a), float(b)) for a, b in zip(x, G)],
        bar_values=[float(v) for v in 100.0 * table.uplift],
    )


def qini_curve_points(table: QiniTable):
    """Curve as ``[(percent targeted, 100 g)]`` plus the random-targeting segment."""
    pts = [(0.0, 0.0)] + [(100.0 * float(p), 100.0 * float(v)) for p, v in zip(table.phi, table.g)]
    benchmark = [(0.0, 0.0), (100.0, 100.0 * float(table.g[-1]))]
    return pts, benchmark


def qini_bar_data(table: QiniTable) -> list[float]:
    """Observed uplift (percent) of each group between consecutive grid points."""
    return [float(v) for v in 100.0 * table.uplift]


def qini_coefficient(ds: UpliftDataset, nb_group: int = 10, prediction: str = PREDICTION) -> float:
    return qini_area(qini_table(ds, nb_group, prediction)).q
