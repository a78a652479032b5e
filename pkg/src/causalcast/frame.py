"""Multivariate time series container and preprocessing operations.

A TimeSeriesFrame is an immutable table of calendar-dated observations:
rows are time points at a uniform cadence (daily or monthly), columns are
named variables. Missing cells are tracked in a boolean mask so that
imputation, aggregation, and validation stay explicit.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

DAILY = "daily"
MONTHLY = "monthly"

# Cell contents treated as missing when reading CSV.
_MISSING_SENTINELS = {"", "na", "nan", "null", "none", "missing"}


@dataclass(frozen=True)
class VariableMeta:
    """Name, unit, and optional closed valid interval for one variable."""

    name: str
    unit: str = ""
    valid_range: tuple[float, float] | None = None


@dataclass(frozen=True)
class NormalizationParams:
    """Per-variable z-score statistics, plus the original variable metadata.

    ``std`` is the population standard deviation (1/N) so that repeated
    runs are bit-reproducible. Keeping the pre-normalization VariableMeta
    here lets denormalize() restore units and valid ranges.
    """

    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    variables: tuple[VariableMeta, ...] = ()

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != (len(self.names),) or std.shape != (len(self.names),):
            raise ValueError("mean/std must be vectors matching names")
        if np.any(std <= 0.0):
            bad = [self.names[i] for i in np.nonzero(std <= 0.0)[0]]
            raise DataError(f"zero standard deviation for variable(s): {', '.join(bad)}")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "std", _frozen(std))

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "mean": [float(m) for m in self.mean],
            "std": [float(s) for s in self.std],
            "variables": [
                {"name": v.name, "unit": v.unit, "valid_range": list(v.valid_range) if v.valid_range else None}
                for v in self.variables
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        variables = tuple(
            VariableMeta(v["name"], v.get("unit", ""), tuple(v["valid_range"]) if v.get("valid_range") else None)
            for v in d.get("variables", [])
        )
        return cls(
            names=tuple(d["names"]),
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
            variables=variables,
        )


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


def _next_month(d: dt.date) -> tuple[int, int]:
    return (d.year + 1, 1) if d.month == 12 else (d.year, d.month + 1)


@dataclass(frozen=True)
class TimeSeriesFrame:
    """Immutable N x V time series with a missing-value mask.

    Invariants enforced at construction: strictly increasing timestamps at
    the declared uniform cadence, matching array shapes, unique variable
    names, and all non-missing values inside each variable's valid range.
    """

    timestamps: tuple[dt.date, ...]
    cadence: str
    variables: tuple[VariableMeta, ...]
    values: np.ndarray
    mask: np.ndarray = field(default=None)  # True where missing

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError("values must be a 2-D matrix")
        n, v = values.shape
        if n < 1 or v < 1:
            raise DataError("frame needs at least one row and one variable")
        mask = self.mask
        if mask is None:
            mask = np.zeros((n, v), dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != values.shape:
            raise DataError("mask shape must equal values shape")
        if len(self.timestamps) != n:
            raise DataError("timestamp count must equal row count")
        if len(self.variables) != v:
            raise DataError("variable count must equal column count")
        names = [m.name for m in self.variables]
        if len(set(names)) != len(names):
            raise DataError("duplicate variable names in frame")
        if self.cadence not in (DAILY, MONTHLY):
            raise DataError(f"unknown cadence {self.cadence!r}")
        self._check_timestamps()
        if not np.all(np.isfinite(values[~mask])):
            raise DataError("non-finite values present outside the missing mask")
        object.__setattr__(self, "timestamps", tuple(self.timestamps))
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))
        self._check_ranges()

    def _check_timestamps(self):
        ts = self.timestamps
        for a, b in zip(ts, ts[1:]):
            if b <= a:
                raise DataError(f"timestamps not strictly increasing at {a} -> {b}")
            if self.cadence == DAILY and (b - a).days != 1:
                raise DataError(f"daily cadence broken between {a} and {b}; every day needs a row")
            if self.cadence == MONTHLY and (b.year, b.month) != _next_month(a):
                raise DataError(f"monthly cadence broken between {a} and {b}")

    def _check_ranges(self):
        for j, meta in enumerate(self.variables):
            if meta.valid_range is None:
                continue
            lo, hi = meta.valid_range
            col = self.values[:, j]
            ok = self.mask[:, j] | ((col >= lo) & (col <= hi))
            if not ok.all():
                row = int(np.nonzero(~ok)[0][0])
                raise DataError(
                    f"value {col[row]!r} for variable {meta.name!r} at row {row} "
                    f"({self.timestamps[row]}) outside valid range [{lo}, {hi}]"
                )

    # -- accessors ---------------------------------------------------------

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.variables)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown variable {name!r}; frame has {', '.join(self.names)}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index_of(name)]

    def with_values(self, values: np.ndarray, mask: np.ndarray | None = None,
                    variables: tuple[VariableMeta, ...] | None = None) -> "TimeSeriesFrame":
        return TimeSeriesFrame(
            timestamps=self.timestamps,
            cadence=self.cadence,
            variables=self.variables if variables is None else variables,
            values=values,
            mask=mask,
        )

    def select(self, names: list[str]) -> "TimeSeriesFrame":
        idx = [self.index_of(n) for n in names]
        return TimeSeriesFrame(
            timestamps=self.timestamps,
            cadence=self.cadence,
            variables=tuple(self.variables[i] for i in idx),
            values=self.values[:, idx],
            mask=self.mask[:, idx],
        )


# -- CSV input / output ----------------------------------------------------


def _parse_date(text: str, row: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"malformed date {text!r} at data row {row}; expected YYYY-MM-DD") from None


def _infer_cadence(timestamps: list[dt.date]) -> str:
    if len(timestamps) < 2:
        return MONTHLY
    a, b = timestamps[0], timestamps[1]
    if (b - a).days == 1:
        return DAILY
    if (b.year, b.month) == _next_month(a):
        return MONTHLY
    raise DataError(f"cannot infer a uniform cadence from {a} -> {b}")


def load_csv(path, schema: list[VariableMeta] | None = None,
             cadence: str | None = None) -> TimeSeriesFrame:
    """Read a frame from CSV: first column ``date``, one column per variable.

    Empty cells and common sentinels (NA, NaN, null, ...) become missing
    values. If ``schema`` is given its variable names must exactly match the
    header; column order follows the file.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)

    if not header or header[0].strip().lower() != "date":
        raise DataError(f"{path}: first column must be named 'date', got {header[:1]!r}")
    col_names = [h.strip() for h in header[1:]]
    if not col_names:
        raise DataError(f"{path}: no variable columns")

    if schema is not None:
        by_name = {m.name: m for m in schema}
        missing = [n for n in col_names if n not in by_name]
        extra = [m.name for m in schema if m.name not in col_names]
        if missing or extra:
            raise DataError(
                f"{path}: columns do not match schema "
                f"(not in schema: {missing or 'none'}; missing from file: {extra or 'none'})"
            )
        variables = tuple(by_name[n] for n in col_names)
    else:
        variables = tuple(VariableMeta(n) for n in col_names)

    n, v = len(rows), len(col_names)
    if n == 0:
        raise DataError(f"{path}: no data rows")
    values = np.zeros((n, v), dtype=np.float64)
    mask = np.zeros((n, v), dtype=bool)
    timestamps: list[dt.date] = []
    seen: set[dt.date] = set()
    for r, row in enumerate(rows):
        if len(row) != v + 1:
            raise DataError(f"{path}: row {r} has {len(row)} cells, expected {v + 1}")
        d = _parse_date(row[0], r)
        if d in seen:
            raise DataError(f"{path}: duplicate timestamp {d} at data row {r}")
        if timestamps and d < timestamps[-1]:
            raise DataError(
                f"{path}: timestamps not strictly increasing at data row {r} "
                f"({timestamps[-1]} -> {d})"
            )
        seen.add(d)
        timestamps.append(d)
        for c, cell in enumerate(row[1:]):
            text = cell.strip()
            if text.lower() in _MISSING_SENTINELS:
                mask[r, c] = True
                continue
            try:
                values[r, c] = float(text)
            except ValueError:
                raise DataError(
                    f"{path}: cannot parse value {cell!r} for {col_names[c]!r} at data row {r}"
                ) from None

    if cadence is None:
        cadence = _infer_cadence(timestamps)
    return TimeSeriesFrame(tuple(timestamps), cadence, variables, values, mask)


def save_csv(frame: TimeSeriesFrame, path) -> None:
    """Write a frame back to the load_csv dialect (missing cells empty)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *frame.names])
        for r in range(frame.n_rows):
            row = [frame.timestamps[r].isoformat()]
            for c in range(frame.n_vars):
                row.append("" if frame.mask[r, c] else repr(float(frame.values[r, c])))
            writer.writerow(row)


# -- preprocessing ---------------------------------------------------------


def impute_linear(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Fill missing cells: linear interpolation inside, nearest value at edges.

    Observed values are never altered, so the operation is idempotent.
    """
    if not frame.mask.any():
        return frame
    values = frame.values.copy()
    for j in range(frame.n_vars):
        miss = frame.mask[:, j]
        if not miss.any():
            continue
        obs = np.nonzero(~miss)[0]
        if obs.size == 0:
            raise DataError(f"variable {frame.names[j]!r} is entirely missing; cannot impute")
        gaps = np.nonzero(miss)[0]
        values[gaps, j] = np.interp(gaps, obs, values[obs, j])
    return frame.with_values(values, mask=np.zeros_like(frame.mask))


def normalize(frame: TimeSeriesFrame,
              params: NormalizationParams | None = None) -> tuple[TimeSeriesFrame, NormalizationParams]:
    """Z-score each variable: (x - mean) / std with population (1/N) std.

    Without ``params`` the statistics are fit on this frame; with ``params``
    they are applied as-is (used to carry training statistics onto the
    validation and test partitions). Requires an imputed frame.
    """
    if frame.mask.any():
        raise DataError("normalize requires an imputed frame (missing values present)")
    if params is None:
        mean = frame.values.mean(axis=0)
        std = frame.values.std(axis=0)
        if np.any(std <= 0.0):
            bad = [frame.names[i] for i in np.nonzero(std <= 0.0)[0]]
            raise DataError(f"zero standard deviation for variable(s): {', '.join(bad)}")
        params = NormalizationParams(frame.names, mean, std, frame.variables)
    elif params.names != frame.names:
        raise DataError(
            f"normalization params cover {params.names}, frame has {frame.names}"
        )
    scaled = (frame.values - params.mean) / params.std
    variables = tuple(
        VariableMeta(m.name, unit=f"z({m.unit})" if m.unit else "z-score", valid_range=None)
        for m in frame.variables
    )
    return frame.with_values(scaled, variables=variables), params


def denormalize(frame: TimeSeriesFrame, params: NormalizationParams) -> TimeSeriesFrame:
    """Invert normalize(), restoring physical units and variable metadata."""
    if params.names != frame.names:
        raise DataError("normalization params do not match frame variables")
    raw = frame.values * params.std + params.mean
    variables = params.variables if params.variables else frame.variables
    return frame.with_values(raw, variables=variables)


def aggregate_to_monthly(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Collapse a daily frame to one row per calendar month (mean of observed)."""
    if frame.cadence != DAILY:
        raise DataError("aggregate_to_monthly expects a daily frame")
    keys = [(t.year, t.month) for t in frame.timestamps]
    months: list[tuple[int, int]] = []
    starts: list[int] = []
    for i, k in enumerate(keys):
        if not months or k != months[-1]:
            months.append(k)
            starts.append(i)
    starts.append(frame.n_rows)

    out = np.zeros((len(months), frame.n_vars), dtype=np.float64)
    for m, (year, month) in enumerate(months):
        block = slice(starts[m], starts[m + 1])
        vals = frame.values[block]
        obs = ~frame.mask[block]
        counts = obs.sum(axis=0)
        if np.any(counts == 0):
            j = int(np.nonzero(counts == 0)[0][0])
            raise DataError(
                f"month {year}-{month:02d} has no observed values for variable {frame.names[j]!r}"
            )
        out[m] = np.where(obs, vals, 0.0).sum(axis=0) / counts

    timestamps = tuple(dt.date(y, mo, 1) for y, mo in months)
    return TimeSeriesFrame(timestamps, MONTHLY, frame.variables, out)


def split_by_date(frame: TimeSeriesFrame, train_end: dt.date,
                  val_fraction: float) -> tuple[TimeSeriesFrame, TimeSeriesFrame | None, TimeSeriesFrame]:
    """Chronological train/val/test split.

    Test is everything after ``train_end``; validation is the last
    floor(val_fraction * n_pre) rows at or before ``train_end``; train is the
    rest. Returns None for an empty validation split.
    """
    if not (0.0 <= val_fraction < 1.0):
        raise DataError(f"val_fraction must be in [0, 1), got {val_fraction}")
    n_pre = sum(1 for t in frame.timestamps if t <= train_end)
    n_test = frame.n_rows - n_pre
    if n_pre == 0:
        raise DataError(f"empty train partition: no rows at or before {train_end}")
    if n_test == 0:
        raise DataError(f"empty test partition: no rows after {train_end}")
    n_val = math.floor(val_fraction * n_pre)
    n_train = n_pre - n_val

    def rows(a: int, b: int) -> TimeSeriesFrame | None:
        if a == b:
            return None
        return TimeSeriesFrame(
            frame.timestamps[a:b], frame.cadence, frame.variables,
            frame.values[a:b], frame.mask[a:b],
        )

    return rows(0, n_train), rows(n_train, n_pre), rows(n_pre, frame.n_rows)


# -- supervised windowing ----------------------------------------------------


@dataclass(frozen=True)
class SupervisedWindows:
    """Sliding lookback windows with a single-step-ahead target.

    ``inputs`` has shape (samples, lookback, features); sample s covers rows
    [s, s+lookback) and its target is the target variable at row
    s + lookback + horizon - 1.
    """

    inputs: np.ndarray
    targets: np.ndarray
    lookback: int
    horizon: int
    feature_names: tuple[str, ...]
    target_name: str

    def __post_init__(self):
        object.__setattr__(self, "inputs", _frozen(np.asarray(self.inputs, dtype=np.float64)))
        object.__setattr__(self, "targets", _frozen(np.asarray(self.targets, dtype=np.float64)))
        if self.inputs.ndim != 3 or self.targets.ndim != 1:
            raise ValueError("inputs must be 3-D and targets 1-D")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets disagree on sample count")
        if self.inputs.shape[1] != self.lookback:
            raise ValueError("window length does not match lookback")

    @property
    def n_samples(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.inputs.shape[2])


def make_windows(frame: TimeSeriesFrame, features: list[str], target: str,
                 lookback: int, horizon: int) -> SupervisedWindows:
    """Slice a frame into supervised windows: S = N - lookback - horizon + 1."""
    if lookback < 1 or horizon < 1:
        raise DataError(f"lookback and horizon must be >= 1, got {lookback}, {horizon}")
    if frame.mask.any():
        raise DataError("make_windows requires an imputed frame")
    feat_idx = [frame.index_of(n) for n in features]
    tgt_idx = frame.index_of(target)
    n = frame.n_rows
    s = n - lookback - horizon + 1
    if s < 1:
        raise DataError(
            f"insufficient rows: N={n} gives {s} windows for lookback={lookback}, horizon={horizon}"
        )
    cols = frame.values[:, feat_idx]
    inputs = np.stack([cols[i:i + lookback] for i in range(s)])
    targets = frame.values[lookback + horizon - 1:lookback + horizon - 1 + s, tgt_idx]
    return SupervisedWindows(inputs, targets, lookback, horizon, tuple(features), target)
