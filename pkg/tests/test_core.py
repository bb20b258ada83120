import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmm.core import (TWO_PI, FmmModel, WaveParams, circular_distance, mobius_phase,
                      model_value, peak_report, peak_trough_times, wave_value, wrap_angle)
from fmm.errors import ConfigError, DegenerateWaveError

angles = st.floats(0.0, TWO_PI, exclude_max=True)
waves = st.builds(WaveParams, A=st.floats(0.1, 10.0), alpha=angles, beta=angles,
                  omega=st.floats(0.01, 1.0))


def test_phase_at_alpha_is_beta():
    assert mobius_phase(1.5, 1.5, 0.2, 0.1) == pytest.approx(0.2, abs=1e-15)


def test_phase_is_finite_at_the_tan_pole():
    alpha = 0.7
    assert mobius_phase(alpha + math.pi, alpha, 0.0, 0.3) == pytest.approx(math.pi, abs=1e-12)


def test_phase_with_omega_one_is_linear():
    assert mobius_phase(2.0, 0.5, 0.0, 1.0) == pytest.approx(1.5, abs=1e-15)


def test_wave_value_against_arbitrary_precision():
    mpmath.mp.dps = 40
    w = WaveParams(2.0, 1.5, 0.2, 0.1)
    t = mpmath.mpf("1.5")
    oracle = w.A * mpmath.cos(w.beta + 2 * mpmath.atan(w.omega * mpmath.tan((t - w.alpha) / 2)))
    assert wave_value(1.5, w) == pytest.approx(float(oracle), rel=1e-15)
    assert wave_value(1.5, w) == pytest.approx(1.9601331556824833, rel=1e-15)


def test_wave_value_at_peak_equals_amplitude():
    w = WaveParams(2.0, 4.0, 1.1, 0.3)
    tU, _ = peak_trough_times(w)
    assert wave_value(tU, w) == pytest.approx(2.0, rel=1e-12)


def test_zero_amplitude_wave_vanishes():
    t = np.linspace(0, TWO_PI, 50)
    assert np.all(wave_value(t, WaveParams(0.0, 1.0, 2.0, 0.5)) == 0.0)


def test_model_value_intercept_only_when_amplitude_zero():
    m = FmmModel(3.25, (WaveParams(0.0, 1.0, 1.0, 0.4),))
    assert model_value(0.3, m) == 3.25


def test_model_value_is_sum_of_waves():
    # oracle: direct per-wave evaluation of the textbook formula, in mpmath
    mpmath.mp.dps = 30
    params = [(2, 1.5, 0.2, 0.1), (2, 3.4, 2.3, 0.2)]

    def wv(A, a, b, w):
        return A * mpmath.cos(b + 2 * mpmath.atan(w * mpmath.tan((0 - a) / mpmath.mpf(2))))

    oracle = sum(wv(*p) for p in params)
    m = FmmModel(0.0, tuple(WaveParams(*p) for p in params))
    assert model_value(0.0, m) == pytest.approx(float(oracle), rel=1e-13)
    assert model_value(0.0, m) == pytest.approx(1.1787350690983667, rel=1e-13)


def test_intercept_shift():
    w = (WaveParams(1.0, 2.0, 3.0, 0.2),)
    t = np.linspace(0, 6, 17)
    diff = model_value(t, FmmModel(1.0, w)) - model_value(t, FmmModel(1.5, w))
    np.testing.assert_allclose(diff, -0.5, atol=1e-15)


def test_peak_trough_symmetric_wave():
    tU, tL = peak_trough_times(WaveParams(1.0, 1.2, 0.0, 0.5), wrap_to_2pi=False)
    assert tU == pytest.approx(1.2)
    assert tL == pytest.approx(1.2 + math.pi)


def test_peak_time_against_dense_argmax():
    # frozen from argmax over a 10^6-point grid on [0, 2*pi)
    tU, _ = peak_trough_times(WaveParams(1.0, 1.5, 0.2, 0.1))
    assert tU == pytest.approx(6.209050003740175, abs=TWO_PI * 1e-6)
    assert tU == pytest.approx(6.2090, abs=5e-5)


def test_peak_requires_positive_omega():
    with pytest.raises(DegenerateWaveError):
        peak_trough_times(WaveParams(1.0, 0.0, 0.0, 0.0))


def test_wave_params_validation_and_wrapping():
    w = WaveParams(1.0, -0.5, 7.0, 0.5)
    assert 0 <= w.alpha < TWO_PI and w.alpha == pytest.approx(TWO_PI - 0.5)
    assert w.beta == pytest.approx(7.0 - TWO_PI)
    with pytest.raises(ConfigError):
        WaveParams(-1.0, 0, 0, 0.5)
    with pytest.raises(ConfigError):
        WaveParams(1.0, 0, 0, 1.5)
    with pytest.raises(ConfigError):
        FmmModel(0.0, ())


def test_wrap_angle_is_idempotent():
    x = np.random.default_rng(1).uniform(-50, 50, 10_000)
    w = wrap_angle(x)
    assert np.all((w >= 0) & (w < TWO_PI))
    assert np.array_equal(wrap_angle(w), w)
    assert wrap_angle(-1e-300) == 0.0


def test_peak_report_uses_total_model():
    m = FmmModel(0.5, (WaveParams(2.0, 1.0, 0.3, 0.2), WaveParams(1.0, 4.0, 2.0, 0.5)))
    rep = peak_report(m)
    for tU, ZU, tL, ZL in rep.rows():
        assert ZU == pytest.approx(model_value(tU, m))
        assert ZL == pytest.approx(model_value(tL, m))


@settings(max_examples=60, deadline=None)
@given(waves, st.floats(-5, 5), st.floats(-20, 20))
def test_periodicity(w, M, t):
    m = FmmModel(M, (w,))
    a, b = model_value(t, m), model_value(t + TWO_PI, m)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a)) + 1e-12 * w.A * (1 + abs(t))


@settings(max_examples=60, deadline=None)
@given(angles, angles, st.floats(0.01, 1.0))
def test_phase_monotone_over_a_period(alpha, beta, omega):
    t = np.linspace(alpha, alpha + TWO_PI, 2001)[:-1]
    phi = np.unwrap(mobius_phase(t, alpha, beta, omega))
    assert np.all(np.diff(phi) >= -1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 5), angles, angles)
def test_cos_reduction(A, alpha, beta):
    t = np.linspace(0, TWO_PI, 97)
    np.testing.assert_allclose(wave_value(t, WaveParams(A, alpha, beta, 1.0)),
                               A * np.cos(t - alpha + beta), atol=1e-12 * A)


@settings(max_examples=40, deadline=None)
@given(waves)
def test_peak_and_trough_match_grid_extrema(w):
    grid = np.arange(200_000) * (TWO_PI / 200_000)
    y = wave_value(grid, w)
    tU, tL = peak_trough_times(w)
    step = TWO_PI / 200_000
    assert wave_value(tU, w) >= y.max() - 1e-12 * w.A
    assert wave_value(tL, w) <= y.min() + 1e-12 * w.A
    assert circular_distance(tU, grid[np.argmax(y)]) <= step
    assert circular_distance(tL, grid[np.argmin(y)]) <= step


@settings(max_examples=60, deadline=None)
@given(waves)
def test_derivative_vanishes_at_extrema(w):
    h = 1e-6
    for t in peak_trough_times(w):
        d = (wave_value(t + h, w) - wave_value(t - h, w)) / (2 * h)
        assert abs(d) <= 1e-6 * w.A
