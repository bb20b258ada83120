"""CSV ingestion and fit-result serialization.

CSV dialect: comma separated, dot decimal, header row, UTF-8, LF or CRLF.
A series file has a ``value`` column and optionally a ``time`` column.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .core import TWO_PI, FmmModel, PeakReport, WaveParams
from .errors import ConfigError, FormatError
from .fit import FitResult
from .series import TimeSeries, default_time_points, rescale_time, summarize_periods

RESULT_FORMATS = ("json", "csv-fitted", "csv-components")


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------- CSV input

def _parse_rows(text: str, source: str):
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"{source}: empty file") from None
    header = [h.strip().lstrip("﻿").strip('"') for h in header]
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise FormatError(f"{source}: line {lineno}: expected {len(header)} fields, "
                              f"got {len(row)}")
        try:
            rows.append([float(c) for c in row])
        except ValueError:
            raise FormatError(f"{source}: line {lineno}: non-numeric value in {row!r}") from None
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def read_csv(path, has_time_column: bool | None = None, n_periods: int = 1,
             period_T: float | None = None, t0: float = 0.0) -> TimeSeries:
    """Read a series file into a (period-averaged) TimeSeries.

    With a time column and `period_T`, clock times are rescaled to radians
    first. Multi-period input must repeat identical within-period phases.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FormatError(f"{path}: no such file") from None
    header, data = _parse_rows(text, str(path))
    cols = {name: i for i, name in enumerate(header)}
    if "value" not in cols:
        if len(header) == 1:
            cols = {"value": 0}
        elif len(header) == 2:
            cols = {"time": 0, "value": 1}
        else:
            raise FormatError(f"{path}: expected columns 'value' or 'time,value', got {header}")
    if has_time_column is None:
        has_time_column = "time" in cols
    elif has_time_column and "time" not in cols:
        raise FormatError(f"{path}: no 'time' column")
    if len(data) < 5:
        raise FormatError(f"{path}: need at least 5 rows, got {len(data)}")
    if not np.isfinite(data).all():
        raise FormatError(f"{path}: non-finite values")
    values = data[:, cols["value"]]
    if n_periods < 1:
        raise ConfigError("n_periods must be positive")
    if values.size % n_periods:
        raise FormatError(f"{path}: {values.size} rows cannot be split into "
                          f"{n_periods} equal periods")
    if not has_time_column:
        return summarize_periods(values, n_periods)

    t = data[:, cols["time"]]
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        raise FormatError(f"{path}: line {bad[0] + 3}: time is not increasing")
    if period_T is not None:
        t = rescale_time(t, t0, period_T)
    n = values.size // n_periods
    phases = t.reshape(n_periods, n) - TWO_PI * np.arange(n_periods)[:, None]
    if n_periods > 1 and not np.allclose(phases, phases[0], atol=1e-9):
        raise FormatError(f"{path}: periods are not sampled at identical phases")
    return summarize_periods(values, n_periods, time_points=phases[0])


def write_series_csv(t, y) -> str:
    lines = ["time,value"]
    lines += [f"{fmt(a)},{fmt(b)}" for a, b in zip(t, y)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- results

def result_to_dict(result: FitResult) -> dict:
    p = result.peaks
    return {
        "M": result.model.M,
        "waves": [{"A": w.A, "alpha": w.alpha, "beta": w.beta, "omega": w.omega}
                  for w in result.model.waves],
        "SSE": result.sse,
        "R2": list(result.r2_per_wave),
        "R2_total": result.r2_total,
        "nIter": result.n_iter,
        "peaks": [{"tU": u, "tL": l, "ZU": zu, "ZL": zl}
                  for u, zu, l, zl in p.rows()],
        "fittedValues": result.fitted_values.tolist(),
        "residuals": result.residuals.tolist(),
        "timePoints": result.time_points.tolist(),
        "data": result.data.tolist(),
    }


def _dump(obj) -> str:
    # json.dumps cannot format floats, so emit numbers by hand
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_dump(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_dump(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return fmt(obj)


def write_result(result: FitResult, format: str = "json") -> bytes:
    """Serialize a fit as JSON, fitted-values CSV or per-wave component CSV."""
    if format == "json":
        return (_dump(result_to_dict(result)) + "\n").encode("utf-8")
    t = result.time_points
    if format == "csv-fitted":
        lines = ["timePoints,fitted"]
        lines += [f"{fmt(a)},{fmt(b)}" for a, b in zip(t, result.fitted_values)]
    elif format == "csv-components":
        comps = result.components
        lines = ["timePoints," + ",".join(f"wave{j + 1}" for j in range(len(comps)))]
        lines += [",".join(fmt(v) for v in (t[i], *comps[:, i])) for i in range(t.size)]
    else:
        raise ConfigError(f"unknown result format {format!r}; expected one of {RESULT_FORMATS}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def read_result(source) -> FitResult:
    """Parse the JSON written by `write_result` back into a FitResult."""
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        text = source
    else:
        try:
            text = Path(source).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise FormatError(f"{source}: no such file") from None
    try:
        d = json.loads(text)
        model = FmmModel(float(d["M"]), tuple(
            WaveParams(w["A"], w["alpha"], w["beta"], w["omega"]) for w in d["waves"]))
        peaks = PeakReport(*(tuple(float(p[k]) for p in d["peaks"])
                             for k in ("tU", "tL", "ZU", "ZL")))
        arrays = {k: np.asarray(d[k], dtype=float)
                  for k in ("timePoints", "data", "fittedValues", "residuals")}
        n = arrays["fittedValues"].size
        if any(a.shape != (n,) for a in arrays.values()):
            raise FormatError("result arrays have mismatched lengths")
        if len(d["R2"]) != model.m or len(d["peaks"]) != model.m:
            raise FormatError("per-wave arrays do not match the number of waves")
        return FitResult(
            model=model,
            time_points=arrays["timePoints"],
            data=arrays["data"],
            fitted_values=arrays["fittedValues"],
            residuals=arrays["residuals"],
            sse=float(d["SSE"]),
            r2_per_wave=tuple(float(x) for x in d["R2"]),
            r2_total=float(d["R2_total"]),
            n_iter=int(d["nIter"]),
            peaks=peaks,
        )
    except FormatError:
        raise
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise FormatError(f"malformed fit result: {exc}") from exc
