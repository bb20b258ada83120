"""In-memory time series: time rescaling and multi-period averaging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TWO_PI
from .errors import ConfigError, FormatError


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Observed values at phase time points of a single period.

    When `n_periods > 1` the `values` are per-time-point averages of
    `raw_values` across periods. Time points are strictly increasing
    within [0, 2*pi]; the closed upper end admits the default simulation
    grid, which includes both 0 and 2*pi.
    """

    time_points: np.ndarray
    values: np.ndarray
    n_periods: int = 1
    raw_values: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.time_points, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise FormatError("time points and values must be vectors of equal length")
        if not (np.isfinite(t).all() and np.isfinite(v).all()):
            raise FormatError("time points and values must be finite")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise FormatError("time points must be strictly increasing")
        if t.size and (t[0] < 0 or t[-1] > TWO_PI + 1e-12):
            raise FormatError("time points must lie in [0, 2*pi]")
        if self.n_periods < 1:
            raise ConfigError("n_periods must be positive")
        object.__setattr__(self, "time_points", t)
        object.__setattr__(self, "values", v)
        if self.raw_values is not None:
            object.__setattr__(self, "raw_values", np.asarray(self.raw_values, dtype=float))

    @classmethod
    def from_arrays(cls, values, time_points=None) -> "TimeSeries":
        values = np.asarray(values, dtype=float)
        if time_points is None:
            time_points = default_time_points(values.size)
        return cls(np.asarray(time_points, dtype=float), values)

    def __len__(self):
        return self.values.size


def default_time_points(n: int) -> np.ndarray:
    """n equally spaced points over [0, 2*pi)."""
    return np.linspace(0.0, TWO_PI, n, endpoint=False)


def rescale_time(t_prime, t0: float, T: float) -> np.ndarray:
    """Map clock time onto radians: ``(t' - t0) * 2*pi / T``."""
    if not T > 0:
        raise ConfigError(f"period T must be positive, got {T}")
    return (np.asarray(t_prime, dtype=float) - t0) * TWO_PI / T


def summarize_periods(raw, n_periods: int, time_points=None) -> TimeSeries:
    """Average values observed at the same phase across periods."""
    raw = np.asarray(raw, dtype=float)
    if n_periods < 1:
        raise ConfigError("n_periods must be positive")
    if raw.ndim != 1 or raw.size % n_periods:
        raise FormatError(f"{raw.size} values cannot be split into {n_periods} equal periods")
    n = raw.size // n_periods
    values = raw.reshape(n_periods, n).mean(axis=0) if n_periods > 1 else raw.copy()
    if time_points is None:
        time_points = default_time_points(n)
    return TimeSeries(np.asarray(time_points, dtype=float), values, n_periods,
                      raw if n_periods > 1 else None)
