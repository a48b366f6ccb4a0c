"""Uplift datasets: CSV ingestion, dummy encoding and stratified splitting.

An :class:`UpliftDataset` is a thin, validated wrapper around a pandas
DataFrame that knows which column holds the binary outcome and which holds
the binary treatment indicator. Everything else is a feature, either numeric
(float) or categorical (string levels).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd


class UpliftError(ValueError):
    """Base class for all library errors."""


class SchemaError(UpliftError):
    """A required column is missing or a column name is duplicated."""


class DataValidationError(UpliftError):
    """A value violates a dataset invariant (e.g. non-binary outcome)."""


class ParseError(UpliftError):
    """A CSV cell or record could not be parsed."""


class UpliftWarning(UserWarning):
    """Non-fatal condition recorded during a computation."""


def _is_binary(values: np.ndarray) -> np.ndarray:
    return (values == 0) | (values == 1)


@dataclass(frozen=True)
class UpliftDataset:
    """Rows of (outcome, treatment, features).

    The frame is copied on construction and never mutated afterwards; every
    transformation returns a new dataset.
    """

    frame: pd.DataFrame
    outcome: str
    treat: str

    def __post_init__(self):
        frame = self.frame
        if frame.columns.duplicated().any():
            dup = list(frame.columns[frame.columns.duplicated()])
            raise SchemaError(f"duplicated column names: {dup}")
        for col in (self.outcome, self.treat):
            if col not in frame.columns:
                raise SchemaError(f"column {col!r} not found")
        if self.outcome == self.treat:
            raise SchemaError("outcome and treatment must be distinct columns")
        if len(frame) < 1:
            raise DataValidationError("dataset must contain at least one row")
        frame = frame.reset_index(drop=True).copy()
        for col in (self.outcome, self.treat):
            vals = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=float)
            bad = np.flatnonzero(~_is_binary(vals))
            if bad.size:
                i = int(bad[0])
                raise DataValidationError(
                    f"column {col!r} must be 0/1; row {i} has value {frame[col].iloc[i]!r}"
                )
            frame[col] = vals.astype(np.int64)
        if frame.isna().any().any():
            col = frame.columns[frame.isna().any()][0]
            row = int(np.flatnonzero(frame[col].isna().to_numpy())[0])
            raise DataValidationError(f"missing value in column {col!r} at row {row}")
        object.__setattr__(self, "frame", frame)

    @property
    def n(self) -> int:
        return len(self.frame)

    @property
    def features(self) -> list[str]:
        return [c for c in self.frame.columns if c not in (self.outcome, self.treat)]

    @property
    def y(self) -> np.ndarray:
        return self.frame[self.outcome].to_numpy(dtype=np.int64)

    @property
    def t(self) -> np.ndarray:
        return self.frame[self.treat].to_numpy(dtype=np.int64)

    def column(self, name: str) -> np.ndarray:
        if name not in self.frame.columns:
            raise SchemaError(f"column {name!r} not found")
        return self.frame[name].to_numpy()

    def numeric(self, name: str) -> np.ndarray:
        """Column as float array; raises if the column is categorical."""
        if not self.is_numeric(name):
            raise DataValidationError(f"column {name!r} is categorical, expected numeric")
        return self.frame[name].to_numpy(dtype=float)

    def is_numeric(self, name: str) -> bool:
        if name not in self.frame.columns:
            raise SchemaError(f"column {name!r} not found")
        return pd.api.types.is_numeric_dtype(self.frame[name].dtype)

    def with_columns(self, **columns) -> "UpliftDataset":
        frame = self.frame.copy()
        for name, values in columns.items():
            frame[name] = np.asarray(values)
        return UpliftDataset(frame, self.outcome, self.treat)

    def take(self, idx: Sequence[int]) -> "UpliftDataset":
        return UpliftDataset(self.frame.iloc[np.asarray(idx, dtype=np.int64)], self.outcome, self.treat)

    def group_sizes(self) -> tuple[int, int]:
        """(treated, control) row counts."""
        t = self.t
        return int(t.sum()), int(len(t) - t.sum())

    def require_both_groups(self) -> None:
        n_t, n_c = self.group_sizes()
        if n_t == 0 or n_c == 0:
            raise DataValidationError(
                f"need at least one treated and one control row (treated={n_t}, control={n_c})"
            )

    def to_csv(self, path) -> None:
        self.frame.to_csv(path, index=False)


def load_csv(path, outcome: str, treat: str) -> UpliftDataset:
    """Read a headered CSV file into an :class:`UpliftDataset`.

    Columns whose every cell parses as a real number become float columns;
    anything else is kept as a categorical (string) column. The outcome and
    treatment columns must parse as numbers and be 0/1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required") from None
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}"
                )
            rows.append(rec)
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicated column names in header")
    for col in (outcome, treat):
        if col not in header:
            raise SchemaError(f"{path}: column {col!r} not found in header {header}")

    raw = pd.DataFrame(rows, columns=header, dtype=object)
    data = {}
    for col in header:
        cells = raw[col].str.strip() if len(raw) else raw[col]
        empty = np.flatnonzero((cells == "").to_numpy())
        if empty.size:
            raise DataValidationError(
                f"{path}: missing value in column {col!r} at row {int(empty[0])}"
            )
        parsed = pd.to_numeric(cells, errors="coerce")
        if parsed.notna().all():
            data[col] = parsed.astype(float)
        elif col in (outcome, treat):
            i = int(np.flatnonzero(parsed.isna().to_numpy())[0])
            raise ParseError(
                f"{path}: cannot parse {cells.iloc[i]!r} as a number "
                f"(row {i}, column {col!r})"
            )
        else:
            data[col] = cells.astype(str)
    return UpliftDataset(pd.DataFrame(data, columns=header), outcome, treat)


def _level_key(level):
    return (0, float(level), "") if isinstance(level, (int, float, np.number)) else (1, 0.0, str(level))


def encode_dummies(ds: UpliftDataset, column: str, reference: str = "last") -> UpliftDataset:
    """Replace ``column`` by K-1 indicator columns ``<column>_<level>``.

    Levels are sorted (numerically for numeric columns, lexicographically
    otherwise). ``reference`` picks the omitted level: ``"last"`` (default)
    or ``"first"``. The indicator columns are inserted where the original
    column was.
    """
    if column in (ds.outcome, ds.treat):
        raise SchemaError(f"cannot dummy-encode the outcome/treatment column {column!r}")
    values = ds.column(column)
    levels = sorted(pd.unique(values), key=_level_key)
    if len(levels) < 2:
        raise DataValidationError(
            f"column {column!r} has {len(levels)} level(s); at least 2 are required"
        )
    if reference == "last":
        kept = levels[:-1]
    elif reference == "first":
        kept = levels[1:]
    else:
        raise ValueError(f"reference must be 'first' or 'last', got {reference!r}")

    def _fmt(level):
        if isinstance(level, (float, np.floating)) and float(level).is_integer():
            return str(int(level))
        return str(level)

    frame = ds.frame
    pos = list(frame.columns).index(column)
    new = frame.drop(columns=[column])
    for k, level in enumerate(kept):
        name = f"{column}_{_fmt(level)}"
        if name in new.columns:
            raise SchemaError(f"indicator column {name!r} already exists")
        new.insert(pos + k, name, (values == level).astype(float))
    return UpliftDataset(new, ds.outcome, ds.treat)


def encode_all_dummies(ds: UpliftDataset, columns: Iterable[str] | None = None, reference: str = "last") -> UpliftDataset:
    """Dummy-encode ``columns`` (default: every categorical feature)."""
    if columns is None:
        columns = [c for c in ds.features if not ds.is_numeric(c)]
    for col in columns:
        ds = encode_dummies(ds, col, reference=reference)
    return ds


@dataclass(frozen=True)
class SplitConfig:
    """Stratified train/validation split settings.

    ``p`` is the fraction of every stratum sent to the training part.
    """

    p: float = 0.7
    strata: tuple[str, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        object.__setattr__(self, "strata", tuple(self.strata))


def _round_half_up(x: float) -> int:
    # guard against 17.499999999 style representation error
    return int(math.floor(x + 0.5 + 1e-9))


def split_uplift(ds: UpliftDataset, cfg: SplitConfig) -> tuple[UpliftDataset, UpliftDataset]:
    """Split ``ds`` so that every stratum keeps the fraction ``cfg.p`` in train.

    Strata are the distinct value combinations of ``cfg.strata`` (defaults to
    treatment and outcome). Within a stratum of size m, round(p*m) rows
    (half up) chosen by a PCG64 shuffle seeded with ``cfg.seed`` go to train.
    Both outputs keep the original row order.
    """
    strata = list(cfg.strata) or [ds.treat, ds.outcome]
    for col in strata:
        if col not in ds.frame.columns:
            raise SchemaError(f"stratification column {col!r} not found")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    keys = ds.frame[strata].astype(str).agg("\x1f".join, axis=1).to_numpy()
    train_idx = []
    for key in sorted(set(keys)):
        members = np.flatnonzero(keys == key)
        m = len(members)
        k = _round_half_up(cfg.p * m)
        if m == 1:
            k = 1
            warnings.warn(
                f"stratum {key.split(chr(31))} has a single row; assigned to train",
                UpliftWarning,
                stacklevel=2,
            )
        perm = rng.permutation(m)
        train_idx.append(members[perm[:k]])
    train = np.sort(np.concatenate(train_idx)) if train_idx else np.array([], dtype=np.int64)
    mask = np.zeros(ds.n, dtype=bool)
    mask[train] = True
    valid = np.flatnonzero(~mask)
    for part, idx in (("train", train), ("validation", valid)):
        if idx.size == 0:
            raise DataValidationError(f"p={cfg.p} leaves the {part} part empty")
    return ds.take(train), ds.take(valid)


HILLSTROM_TREATED = "Womens E-Mail"
HILLSTROM_CONTROL = "No E-Mail"


def prepare_hillstrom(frame: pd.DataFrame, treated_segment: str = HILLSTROM_TREATED, outcome: str = "visit") -> pd.DataFrame:
    """Turn the raw MineThatData e-mail file into a treat-coded table.

    Keeps the rows of ``treated_segment`` and the no-e-mail control, adds a
    0/1 ``treat`` column and keeps the customer attributes used for modeling.
    """
    frame = frame.copy()
    frame.columns = [c.strip().lower() for c in frame.columns]
    keep = frame["segment"].isin([treated_segment, HILLSTROM_CONTROL])
    out = frame.loc[keep].reset_index(drop=True)
    cols = ["recency", "history", "mens", "womens", "zip_code", "newbie", "channel"]
    result = out[cols].copy()
    result["treat"] = (out["segment"] == treated_segment).astype(int)
    result[outcome] = out[outcome].astype(int)
    return result


def load_hillstrom(path, treated_segment: str = HILLSTROM_TREATED, outcome: str = "visit") -> UpliftDataset:
    """Load either the raw Hillstrom CSV or an already prepared one."""
    frame = pd.read_csv(path)
    if "segment" in [c.lower() for c in frame.columns]:
        frame = prepare_hillstrom(frame, treated_segment, outcome)
    return UpliftDataset(frame, outcome, "treat")
