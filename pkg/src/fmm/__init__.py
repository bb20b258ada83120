"""Frequency Modulated Mobius (FMM) models for oscillatory signals."""

from .core import (FmmModel, PeakReport, WaveParams, mobius_phase, model_value,
                   peak_report, peak_trough_times, wave_value, wrap_angle)
from .errors import (ConfigError, DegenerateDesignError, DegenerateWaveError, FitFailedError,
                     FMMError, FormatError, UndefinedMeanError, UndefinedVarianceError)
from .fit import (FitConfig, FitResult, angular_mean, attribute_wave_r2, fit_fmm, fit_mono,
                  fit_multi, fit_restricted, r_squared)
from .series import TimeSeries, rescale_time, summarize_periods
from .simulate import GenSpec, generate

__version__ = "0.1.0"
