"""Synthetic FMM data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import TWO_PI, make_model, model_value
from .errors import ConfigError


@dataclass(frozen=True)
class GenSpec:
    """Parameters of a simulation run.

    Wave parameter lists are recycled cyclically (or truncated) to the
    longest list's length. Explicit `time_points` override `from_`, `to`
    and `length_out`.
    """

    M: float
    A: Sequence[float]
    alpha: Sequence[float]
    beta: Sequence[float]
    omega: Sequence[float]
    from_: float = 0.0
    to: float = TWO_PI
    length_out: int = 100
    time_points: Sequence[float] | None = None
    sigma_noise: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        for name in ("A", "alpha", "beta", "omega"):
            vals = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if vals.size == 0:
                raise ConfigError(f"parameter list {name!r} is empty")
            object.__setattr__(self, name, tuple(float(v) for v in vals))
        if self.sigma_noise < 0:
            raise ConfigError("sigma_noise must be nonnegative")
        if self.time_points is not None:
            tp = np.asarray(self.time_points, dtype=float)
            if tp.ndim != 1 or tp.size == 0 or np.any(np.diff(tp) <= 0):
                raise ConfigError("time_points must be a strictly increasing list")
            object.__setattr__(self, "time_points", tuple(float(v) for v in tp))
        elif self.length_out < 1:
            raise ConfigError("length_out must be positive")

    @property
    def m(self) -> int:
        return max(len(self.A), len(self.alpha), len(self.beta), len(self.omega))

    def recycled(self) -> dict[str, np.ndarray]:
        """Wave parameter arrays recycled to common length m."""
        return {k: np.resize(np.asarray(getattr(self, k)), self.m)
                for k in ("A", "alpha", "beta", "omega")}

    def times(self) -> np.ndarray:
        if self.time_points is not None:
            return np.asarray(self.time_points, dtype=float)
        return np.linspace(self.from_, self.to, self.length_out)


@dataclass(frozen=True)
class Simulation:
    input: dict
    t: np.ndarray
    y: np.ndarray


def generate(spec: GenSpec) -> Simulation:
    """Evaluate the model on the time grid and add gaussian noise."""
    p = spec.recycled()
    model = make_model(spec.M, p["A"], p["alpha"], p["beta"], p["omega"])
    t = spec.times()
    y = np.asarray(model_value(t, model), dtype=float).reshape(t.shape)
    if spec.sigma_noise > 0:
        rng = np.random.default_rng(spec.seed)
        y = y + rng.normal(0.0, spec.sigma_noise, size=t.size)
    echo = {"M": float(spec.M), **{k: v.tolist() for k, v in p.items()}}
    return Simulation(echo, t, y)
