"""FMM wave definitions and pure evaluation.

A single FMM wave is ``A * cos(phi(t))`` where the phase ``phi`` is the
Mobius link

    phi(t; alpha, beta, omega) = beta + 2 * arctan(omega * tan((t - alpha) / 2))

A model of order m is an intercept plus m waves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateWaveError

TWO_PI = 2.0 * np.pi


def wrap_angle(x):
    """Wrap angle(s) into [0, 2*pi)."""
    # numpy's mod is already nonnegative; a second "+ 2*pi, mod" pass would
    # perturb low bits and break idempotence
    out = np.mod(x, TWO_PI)
    # mod can round up to exactly 2*pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def circular_distance(a, b):
    """Smallest absolute angular difference between `a` and `b`."""
    d = np.abs(wrap_angle(np.asarray(a) - np.asarray(b)))
    return np.minimum(d, TWO_PI - d)


@dataclass(frozen=True)
class WaveParams:
    """One FMM wave: amplitude, location, skewness and kurtosis.

    Angles are stored wrapped to [0, 2*pi).
    """

    A: float
    alpha: float
    beta: float
    omega: float

    def __post_init__(self):
        if not np.isfinite([self.A, self.alpha, self.beta, self.omega]).all():
            raise ConfigError("wave parameters must be finite")
        if self.A < 0:
            raise ConfigError(f"amplitude must be nonnegative, got {self.A}")
        if not 0.0 <= self.omega <= 1.0:
            raise ConfigError(f"omega must lie in [0, 1], got {self.omega}")
        object.__setattr__(self, "A", float(self.A))
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "alpha", wrap_angle(float(self.alpha)))
        object.__setattr__(self, "beta", wrap_angle(float(self.beta)))


@dataclass(frozen=True)
class FmmModel:
    """Intercept plus an ordered tuple of waves."""

    M: float
    waves: tuple[WaveParams, ...] = field(default_factory=tuple)

    def __post_init__(self):
        waves = tuple(self.waves)
        if not waves:
            raise ConfigError("an FMM model needs at least one wave")
        object.__setattr__(self, "waves", waves)
        object.__setattr__(self, "M", float(self.M))

    @property
    def m(self) -> int:
        return len(self.waves)

    def __call__(self, t):
        return model_value(t, self)

    def components(self, t) -> np.ndarray:
        """Centered per-wave contributions, shape (m, len(t))."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.array([wave_value(t, w) for w in self.waves])


@dataclass(frozen=True)
class PeakReport:
    """Peak / trough times of each wave and the total model value there."""

    tU: tuple[float, ...]
    tL: tuple[float, ...]
    ZU: tuple[float, ...]
    ZL: tuple[float, ...]

    def rows(self):
        return list(zip(self.tU, self.ZU, self.tL, self.ZL))


def mobius_phase(t, alpha, beta, omega):
    """Mobius phase wrapped to [0, 2*pi).

    Uses the half-angle form ``2*atan2(omega*sin(h), cos(h))`` with
    ``h = (t - alpha)/2`` so that ``t - alpha = pi`` is not a pole.
    """
    h = 0.5 * (np.asarray(t, dtype=float) - alpha)
    return wrap_angle(beta + 2.0 * np.arctan2(omega * np.sin(h), np.cos(h)))


def wave_value(t, w: WaveParams):
    return w.A * np.cos(mobius_phase(t, w.alpha, w.beta, w.omega))


def model_value(t, model: FmmModel):
    t = np.asarray(t, dtype=float)
    out = np.full(t.shape, model.M, dtype=float)
    for w in model.waves:
        out = out + wave_value(t, w)
    if out.ndim == 0:
        return float(out)
    return out


def peak_trough_times(w: WaveParams, wrap_to_2pi: bool = True) -> tuple[float, float]:
    """Closed-form peak (tU) and trough (tL) times of a wave.

    ``tU = alpha + 2*arctan(tan(-beta/2)/omega)`` and
    ``tL = alpha + 2*arctan(tan((pi - beta)/2)/omega)``, both evaluated in
    atan2 form. Unwrapped results lie in ``alpha + (-pi, pi]``.
    """
    if w.omega <= 0.0:
        raise DegenerateWaveError("peak and trough are undefined for omega == 0")
    hu = -0.5 * w.beta
    hl = 0.5 * (np.pi - w.beta)
    tU = w.alpha + 2.0 * np.arctan2(np.sin(hu), w.omega * np.cos(hu))
    tL = w.alpha + 2.0 * np.arctan2(np.sin(hl), w.omega * np.cos(hl))
    if wrap_to_2pi:
        return wrap_angle(tU), wrap_angle(tL)
    return float(tU), float(tL)


def peak_report(model: FmmModel, wrap_to_2pi: bool = True) -> PeakReport:
    """Peaks and troughs of every wave, with Z values from the full model."""
    tU, tL = [], []
    for w in model.waves:
        u, l = peak_trough_times(w, wrap_to_2pi)
        tU.append(u)
        tL.append(l)
    ZU = [model_value(t, model) for t in tU]
    ZL = [model_value(t, model) for t in tL]
    return PeakReport(tuple(tU), tuple(tL), tuple(ZU), tuple(ZL))


def make_model(M: float, A: Sequence[float], alpha: Sequence[float],
               beta: Sequence[float], omega: Sequence[float]) -> FmmModel:
    """Build a model from parallel parameter sequences of equal length."""
    lens = {len(A), len(alpha), len(beta), len(omega)}
    if len(lens) != 1:
        raise ConfigError("parameter sequences must have equal length")
    waves = tuple(WaveParams(*p) for p in zip(A, alpha, beta, omega))
    return FmmModel(M, waves)
