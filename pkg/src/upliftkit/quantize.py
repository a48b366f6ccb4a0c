"""Supervised quantization of continuous predictors guided by observed uplift.

Univariate: a binary tree over one variable. At each node, ``m`` equally
spaced cut points across the node's range are tested with a two-sided test of
equal uplift in the two children, and the most significant admissible cut is
kept if its p-value is at most ``alpha``.

Bivariate: an equal-width ``b x b`` grid over two variables, each row being
predicted by the observed uplift of its rectangle, then grouped into ``c``
categories from the highest to the lowest predicted uplift.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.special import erfc

from .data import DataValidationError, SchemaError, SplitConfig, UpliftDataset, UpliftWarning, split_uplift
from .qini import _overall, qini_area, qini_table_arrays

NO_SPLIT_MESSAGE = "no significant split"


@dataclass(frozen=True)
class GroupCounts:
    """Responders and sizes of the four child x arm cells of a candidate split.

    Cells: 1 = left treated, 2 = left control, 3 = right treated,
    4 = right control.
    """

    resp: tuple[int, int, int, int]
    size: tuple[int, int, int, int]

    @classmethod
    def from_arrays(cls, y, t, left) -> "GroupCounts":
        y, t, left = (np.asarray(a) for a in (y, t, left))
        cells = [(left & (t == 1)), (left & (t == 0)), (~left & (t == 1)), (~left & (t == 0))]
        return cls(tuple(int(y[c].sum()) for c in cells), tuple(int(c.sum()) for c in cells))

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(r / s if s else float("nan") for r, s in zip(self.resp, self.size))

    @property
    def n_T(self) -> int:
        return self.size[0]

    @property
    def n_C(self) -> int:
        return self.size[1]

    @property
    def N_T(self) -> int:
        return self.size[0] + self.size[2]

    @property
    def N_C(self) -> int:
        return self.size[1] + self.size[3]

    @property
    def p_T(self) -> float:
        return (self.resp[0] + self.resp[2]) / self.N_T

    @property
    def p_C(self) -> float:
        return (self.resp[1] + self.resp[3]) / self.N_C


@dataclass(frozen=True)
class SplitTest:
    z: float
    p_value: float


def normal_two_sided_p(z):
    """2 * (1 - Phi(|z|)), computed through erfc to keep tail accuracy."""
    return erfc(np.abs(z) / math.sqrt(2.0))


def split_variance(N: float, n: float, p: float) -> float:
    """Variance of the left-minus-right rate difference within one arm.

    Follows from the hypergeometric count of responders among the ``n`` rows
    sent left out of ``N``.
    """
    return N * N * p * (1.0 - p) / (n * (N - n) * (N - 1.0))


def uplift_split_test(counts: GroupCounts) -> SplitTest | None:
    """Test equal uplift in both children; ``None`` when the test is degenerate.

    The test is degenerate when either arm has a response rate of 0 or 1 at
    the parent node (zero variance).
    """
    n_T, n_C, N_T, N_C = counts.n_T, counts.n_C, counts.N_T, counts.N_C
    if N_T < 2 or N_C < 2 or not (0 < n_T < N_T) or not (0 < n_C < N_C):
        raise ValueError(f"each arm needs rows on both sides of the split: {counts}")
    p_T, p_C = counts.p_T, counts.p_C
    if p_T in (0.0, 1.0) or p_C in (0.0, 1.0):
        return None
    p1, p2, p3, p4 = counts.rates
    var = split_variance(N_T, n_T, p_T) + split_variance(N_C, n_C, p_C)
    z = ((p1 - p2) - (p3 - p4)) / math.sqrt(var)
    return SplitTest(float(z), float(normal_two_sided_p(z)))


def _candidate_tests(v, y, t, cands, n_min):
    """z and p for every candidate cut; NaN where the cut is inadmissible."""
    out_z = np.full(len(cands), np.nan)
    treated = t == 1
    vt, yt = v[treated], y[treated]
    vc, yc = v[~treated], y[~treated]
    N_T, N_C = len(vt), len(vc)
    if N_T < 2 or N_C < 2:
        return out_z, np.full(len(cands), np.nan)
    p_T, p_C = yt.mean(), yc.mean()
    if p_T in (0.0, 1.0) or p_C in (0.0, 1.0):
        return out_z, np.full(len(cands), np.nan)

    ot, oc = np.argsort(vt, kind="stable"), np.argsort(vc, kind="stable")
    vt, yt, vc, yc = vt[ot], yt[ot], vc[oc], yc[oc]
    cyt = np.concatenate(([0], np.cumsum(yt)))
    cyc = np.concatenate(([0], np.cumsum(yc)))
    n_T = np.searchsorted(vt, cands, side="left")
    n_C = np.searchsorted(vc, cands, side="left")
    ok = (n_T >= n_min) & (N_T - n_T >= n_min) & (n_C >= n_min) & (N_C - n_C >= n_min)
    ok &= (n_T > 0) & (n_T < N_T) & (n_C > 0) & (n_C < N_C)
    if not ok.any():
        return out_z, np.full(len(cands), np.nan)
    nT, nC = n_T[ok].astype(float), n_C[ok].astype(float)
    r1, r2 = cyt[n_T[ok]], cyc[n_C[ok]]
    p1 = r1 / nT
    p3 = (cyt[-1] - r1) / (N_T - nT)
    p2 = r2 / nC
    p4 = (cyc[-1] - r2) / (N_C - nC)
    var = N_T * N_T * p_T * (1 - p_T) / (nT * (N_T - nT) * (N_T - 1.0)) + N_C * N_C * p_C * (1 - p_C) / (
        nC * (N_C - nC) * (N_C - 1.0)
    )
    out_z[ok] = ((p1 - p2) - (p3 - p4)) / np.sqrt(var)
    return out_z, normal_two_sided_p(out_z)


@dataclass(frozen=True)
class SplitRecord:
    """Best candidate examined at one node of the tree."""

    depth: int
    lower: float
    upper: float
    n_rows: int
    cut: float | None
    z: float | None
    p_value: float | None
    accepted: bool


@dataclass(frozen=True)
class Leaf:
    lower: float
    upper: float
    n_treated: int
    n_control: int
    uplift: float


@dataclass
class QuantizationTree:
    variable: str
    cuts: list[float]
    leaves: list[Leaf]
    trace: list[SplitRecord]
    alpha: float
    n_min: int
    n_split: int

    @property
    def found_split(self) -> bool:
        return bool(self.cuts)

    def message(self) -> str:
        if not self.found_split:
            return f"{NO_SPLIT_MESSAGE} for {self.variable} at alpha={self.alpha:g}"
        return "\n".join(f"The variable {self.variable} has been cut at: {c:.7g}" for c in self.cuts)

    def leaf_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(leaf) for leaf in self.leaves])


def _leaf(y, t, lower, upper) -> Leaf:
    n_t = int(t.sum())
    n_c = len(t) - n_t
    up = float((y * t).sum() / n_t - (y * (1 - t)).sum() / n_c) if n_t and n_c else float("nan")
    return Leaf(lower, upper, n_t, n_c, up)


def bin_uplift(ds: UpliftDataset, x: str, n_split: int = 10, alpha: float = 0.05, n_min: int = 30) -> QuantizationTree:
    """Recursive binary quantization of ``x`` driven by the uplift test.

    Candidate cuts at a node are ``min + j * (max - min) / n_split`` for
    ``j = 1..n_split`` using the node's own range; a row goes left when its
    value is strictly less than the cut. A cut is admissible when both
    children keep at least ``n_min`` treated and ``n_min`` control rows.
    """
    if n_split < 2:
        raise ValueError("n_split must be greater than 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if n_min < 1:
        raise ValueError("n_min must be at least 1")
    v = ds.numeric(x)
    y, t = ds.y, ds.t
    cuts: list[float] = []
    leaves: list[Leaf] = []
    trace: list[SplitRecord] = []

    def grow(idx, depth, lower, upper):
        vi, yi, ti = v[idx], y[idx], t[idx]
        lo, hi = vi.min(), vi.max()
        if hi == lo:
            trace.append(SplitRecord(depth, lower, upper, len(idx), None, None, None, False))
            leaves.append(_leaf(yi, ti, lower, upper))
            return
        cands = lo + np.arange(1, n_split + 1) * (hi - lo) / n_split
        z, p = _candidate_tests(vi, yi, ti, cands, n_min)
        if np.all(np.isnan(p)):
            trace.append(SplitRecord(depth, lower, upper, len(idx), None, None, None, False))
            leaves.append(_leaf(yi, ti, lower, upper))
            return
        best = int(np.nanargmin(p))
        accepted = bool(p[best] <= alpha)
        cut = float(cands[best])
        trace.append(SplitRecord(depth, lower, upper, len(idx), cut, float(z[best]), float(p[best]), accepted))
        if not accepted:
            leaves.append(_leaf(yi, ti, lower, upper))
            return
        cuts.append(cut)
        left = vi < cut
        grow(idx[left], depth + 1, lower, cut)
        grow(idx[~left], depth + 1, cut, upper)

    grow(np.arange(ds.n), 0, -math.inf, math.inf)
    return QuantizationTree(x, sorted(cuts), leaves, trace, alpha, n_min, n_split)


def apply_bins(tree: QuantizationTree, values) -> np.ndarray:
    """Leaf index of each value (0 = lowest leaf); equal-to-cut goes right."""
    return np.searchsorted(np.asarray(tree.cuts, dtype=float), np.asarray(values, dtype=float), side="right")


def bin_uplift_enhanced(
    ds: UpliftDataset,
    var_list: Sequence[str],
    n_split: int = 10,
    alpha: float = 0.05,
    n_min: int = 30,
    params: dict[str, dict] | None = None,
) -> tuple[UpliftDataset, dict[str, dict]]:
    """Quantize several variables, appending ``<var>_quantized`` on success.

    ``params`` optionally overrides ``n_split``/``alpha``/``n_min`` per
    variable. Failures are recorded in the returned trace, not raised.
    """
    params = params or {}
    out = ds
    trace: dict[str, dict] = {}
    for var in var_list:
        kw = {"n_split": n_split, "alpha": alpha, "n_min": n_min, **params.get(var, {})}
        try:
            tree = bin_uplift(ds, var, **kw)
        except (ValueError, KeyError) as exc:
            trace[var] = {"quantized": False, "cuts": [], "error": str(exc)}
            continue
        trace[var] = {"quantized": tree.found_split, "cuts": list(tree.cuts), "error": None}
        if tree.found_split:
            out = out.with_columns(**{f"{var}_quantized": apply_bins(tree, ds.numeric(var))})
    return out, trace


def categorical_to_ordinal(ds: UpliftDataset, x: str) -> tuple[UpliftDataset, list]:
    """Replace a categorical column by the rank (1..K) of its level's uplift.

    Levels are ranked by increasing observed uplift; equal uplifts are
    ordered by level name. Returns the new dataset and the levels from rank
    1 to rank K.
    """
    vals = ds.column(x)
    y, t = ds.y, ds.t
    levels = sorted(pd.unique(vals), key=str)
    if len(levels) < 2:
        raise DataValidationError(f"column {x!r} needs at least 2 levels")
    ups = []
    for level in levels:
        m = vals == level
        n_t = int(t[m].sum())
        n_c = int(m.sum()) - n_t
        if n_t == 0 or n_c == 0:
            raise DataValidationError(f"level {level!r} of {x!r} lacks treated or control rows")
        ups.append(_overall(y[m], t[m]))
    order = sorted(range(len(levels)), key=lambda i: ups[i])  # stable: ties stay in name order
    ranking = [levels[i] for i in order]
    rank_of = {level: r + 1 for r, level in enumerate(ranking)}
    ranks = np.array([rank_of[v] for v in vals], dtype=float)
    return ds.with_columns(**{x: ranks}), ranking


def bin_uplift_categorical(ds: UpliftDataset, x: str, alpha: float = 0.05, n_min: int = 30):
    """Quantize a categorical column through its uplift ranking (m = K - 1)."""
    ranked, ranking = categorical_to_ordinal(ds, x)
    return bin_uplift(ranked, x, n_split=max(len(ranking) - 1, 2), alpha=alpha, n_min=n_min), ranking


def equal_count_categories(pred, c: int) -> np.ndarray:
    """Categories 1..c from the highest to the lowest value, ties kept together.

    A distinct value gets category ``1 + floor(c * above / n)`` where
    ``above`` counts the rows with strictly larger values. Labels are then
    renumbered densely, so heavy ties can yield fewer than ``c`` categories.
    """
    pred = np.asarray(pred, dtype=float)
    n = len(pred)
    uniq, counts = np.unique(pred, return_counts=True)
    uniq, counts = uniq[::-1], counts[::-1]
    above = np.concatenate(([0], np.cumsum(counts)[:-1]))
    cat_of = 1 + (c * above) // n
    cat_of = np.unique(cat_of, return_inverse=True)[1] + 1
    return cat_of[np.searchsorted(-uniq, -pred)]


def _axis_index(v, edges):
    return np.searchsorted(edges[1:-1], v, side="right")


@dataclass
class RectGrid:
    var1: str
    var2: str
    b: int
    edges1: np.ndarray
    edges2: np.ndarray
    uplift: np.ndarray  # (b, b) observed uplift, NaN when invalid
    n_treated: np.ndarray
    n_control: np.ndarray
    valid: np.ndarray
    fallback: float
    nb_group: int
    category_floor: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def prediction(self) -> np.ndarray:
        return np.where(self.valid, self.uplift, self.fallback)

    def cells(self, v1, v2) -> tuple[np.ndarray, np.ndarray]:
        return _axis_index(np.asarray(v1, float), self.edges1), _axis_index(np.asarray(v2, float), self.edges2)

    def frame(self) -> pd.DataFrame:
        rows = []
        for i in range(self.b):
            for j in range(self.b):
                rows.append(
                    {
                        "i": i,
                        "j": j,
                        f"{self.var1}_low": self.edges1[i],
                        f"{self.var1}_high": self.edges1[i + 1],
                        f"{self.var2}_low": self.edges2[j],
                        f"{self.var2}_high": self.edges2[j + 1],
                        "n_treated": int(self.n_treated[i, j]),
                        "n_control": int(self.n_control[i, j]),
                        "valid": bool(self.valid[i, j]),
                        "uplift": float(self.uplift[i, j]),
                        "prediction": float(self.prediction[i, j]),
                    }
                )
        return pd.DataFrame(rows)


def apply_grid(grid: RectGrid, v1, v2) -> tuple[np.ndarray, np.ndarray]:
    """Predicted uplift and category for new rows (values outside the
    training range fall into the border rectangles)."""
    i, j = grid.cells(v1, v2)
    pred = grid.prediction[i, j]
    floors = grid.category_floor
    # 1 + number of categories whose smallest training prediction exceeds pred
    cat = 1 + np.searchsorted(-floors, -pred, side="left")
    cat = np.minimum(cat, len(floors))
    return pred, cat


def square_uplift(
    ds: UpliftDataset,
    var1: str,
    var2: str,
    n_split: int = 10,
    n_min: int = 1,
    nb_group: int = 3,
) -> tuple[RectGrid, UpliftDataset]:
    """Bivariate quantization on an equal-width ``n_split x n_split`` grid.

    Rectangles with fewer than ``n_min`` treated or control rows are marked
    invalid and their rows are predicted with the overall uplift. Appends
    ``Uplift_<var1>_<var2>`` and ``Cat_<var1>_<var2>`` to the dataset.
    """
    if n_split < 2:
        raise ValueError("n_split must be greater than 1")
    if nb_group < 2:
        raise ValueError("nb_group must be at least 2")
    v1, v2 = ds.numeric(var1), ds.numeric(var2)
    for name, v in ((var1, v1), (var2, v2)):
        if v.max() == v.min():
            raise DataValidationError(f"variable {name!r} has a degenerate range")
    y, t = ds.y, ds.t
    b = n_split
    edges1 = v1.min() + np.arange(b + 1) * (v1.max() - v1.min()) / b
    edges2 = v2.min() + np.arange(b + 1) * (v2.max() - v2.min()) / b
    edges1[-1], edges2[-1] = v1.max(), v2.max()
    i, j = _axis_index(v1, edges1), _axis_index(v2, edges2)
    cell = i * b + j
    n_t = np.bincount(cell, weights=t, minlength=b * b).reshape(b, b)
    n_c = np.bincount(cell, weights=1 - t, minlength=b * b).reshape(b, b)
    r_t = np.bincount(cell, weights=y * t, minlength=b * b).reshape(b, b)
    r_c = np.bincount(cell, weights=y * (1 - t), minlength=b * b).reshape(b, b)
    valid = (n_t >= max(n_min, 1)) & (n_c >= max(n_min, 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        up = np.where(valid, r_t / n_t - r_c / n_c, np.nan)
    if not valid.all():
        warnings.warn(
            f"{int((~valid).sum())} rectangle(s) below n_min={n_min}; their rows get the overall uplift",
            UpliftWarning,
            stacklevel=2,
        )
    grid = RectGrid(
        var1, var2, b, edges1, edges2, up, n_t.astype(int), n_c.astype(int), valid, _overall(y, t), nb_group
    )
    pred = grid.prediction[i, j]
    cat = equal_count_categories(pred, nb_group)
    floors = np.array([pred[cat == k].min() for k in range(1, int(cat.max()) + 1)])
    grid.category_floor = floors
    out = ds.with_columns(**{f"Uplift_{var1}_{var2}": pred, f"Cat_{var1}_{var2}": cat})
    return grid, out


def square_cv(
    ds: UpliftDataset,
    var1: str,
    var2: str,
    b_grid: Sequence[int],
    c_grid: Sequence[int],
    n_min: int = 1,
    p: float = 0.3,
    seed: int = 0,
    nb_group: int = 10,
) -> pd.DataFrame:
    """Score every (b, c) pair by the held-out Qini coefficient.

    The grid is built on a stratified training part; held-out rows are
    ranked by their category (1 = highest predicted uplift).
    """
    train, hold = split_uplift(ds, SplitConfig(p=1 - p, strata=(ds.treat, ds.outcome), seed=seed))
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UpliftWarning)
        for b in b_grid:
            for c in c_grid:
                grid, _ = square_uplift(train, var1, var2, n_split=b, n_min=n_min, nb_group=c)
                _, cat = apply_grid(grid, hold.numeric(var1), hold.numeric(var2))
                q = qini_area(qini_table_arrays(hold.y, hold.t, -cat.astype(float), nb_group)).q
                rows.append({"b": int(b), "c": int(c), "qini": float(q)})
    if not rows:
        raise SchemaError("empty (b, c) grid")
    return pd.DataFrame(rows)
