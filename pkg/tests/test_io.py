import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmm.core import TWO_PI
from fmm.errors import ConfigError, FormatError
from fmm.fit import FitConfig, fit_fmm
from fmm.io import read_csv, read_result, write_result, write_series_csv
from fmm.series import TimeSeries, rescale_time, summarize_periods
from scenarios import TWO_WAVE, series


@pytest.fixture(scope="module")
def two_wave_fit():
    return fit_fmm(series(TWO_WAVE, seed=5), FitConfig(nback=2))


# ---------------------------------------------------------------- time

def test_rescale_time():
    assert rescale_time([5.0], 5.0, 24.0).tolist() == [0.0]
    assert rescale_time([17.0], 5.0, 24.0)[0] == pytest.approx(np.pi)
    hours = np.arange(48.0)
    np.testing.assert_allclose(rescale_time(hours, 0.0, 24.0), hours * TWO_PI / 24)
    with pytest.raises(ConfigError):
        rescale_time(hours, 0.0, 0.0)


def test_summarize_periods():
    p = np.array([1.0, 4.0, 2.0, 8.0, 5.0])
    assert np.array_equal(summarize_periods(p, 1).values, p)
    assert np.array_equal(summarize_periods(np.tile(p, 2), 2).values, p)
    ts = summarize_periods(np.concatenate([p, p + 2]), 2)
    assert np.array_equal(ts.values, p + 1)
    assert ts.n_periods == 2 and ts.raw_values.size == 10
    with pytest.raises(FormatError):
        summarize_periods(np.arange(7.0), 2)


@settings(max_examples=40)
@given(st.lists(st.floats(-100, 100), min_size=6, max_size=6), st.floats(0.1, 10),
       st.floats(-10, 10))
def test_summarize_commutes_with_affine_maps(raw, a, b):
    raw = np.array(raw)
    lhs = summarize_periods(a * raw + b, 2).values
    rhs = a * summarize_periods(raw, 2).values + b
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + abs(b) + a * 100))


# ---------------------------------------------------------------- CSV input

def _write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_read_two_column_passthrough(tmp_path):
    t = np.linspace(0, TWO_PI, 20, endpoint=False)
    y = np.cos(t)
    ts = read_csv(_write(tmp_path, write_series_csv(t, y)))
    assert np.array_equal(ts.time_points, t) and np.array_equal(ts.values, y)


def test_read_one_column_two_periods(tmp_path):
    vals = np.sin(np.linspace(0, 4 * np.pi, 96, endpoint=False))
    text = "value\n" + "\n".join(repr(float(v)) for v in vals) + "\n"
    ts = read_csv(_write(tmp_path, text), n_periods=2)
    assert len(ts) == 48
    np.testing.assert_allclose(ts.values, (vals[:48] + vals[48:]) / 2)


def test_read_crlf(tmp_path):
    p = tmp_path / "crlf.csv"
    p.write_bytes(b"value\r\n1\r\n2\r\n3\r\n4\r\n5\r\n")
    assert read_csv(p).values.tolist() == [1, 2, 3, 4, 5]


def test_bad_cell_names_line(tmp_path):
    rows = ["value"] + ["1.0"] * 5 + ["abc"] + ["2.0"] * 3
    with pytest.raises(FormatError, match="line 7"):
        read_csv(_write(tmp_path, "\n".join(rows) + "\n"))


def test_non_monotone_time(tmp_path):
    text = "time,value\n0,1\n1,2\n0.5,3\n2,4\n3,5\n"
    with pytest.raises(FormatError, match="not increasing"):
        read_csv(_write(tmp_path, text))


def test_too_few_rows(tmp_path):
    with pytest.raises(FormatError):
        read_csv(_write(tmp_path, "value\n1\n2\n"))


def test_clock_times_rescaled_and_folded(tmp_path):
    hours = np.arange(48.0)
    vals = np.cos(hours * TWO_PI / 24) + np.repeat([0.0, 1.0], 24)
    ts = read_csv(_write(tmp_path, write_series_csv(hours, vals)), n_periods=2, period_T=24.0)
    assert len(ts) == 24
    np.testing.assert_allclose(ts.time_points, hours[:24] * TWO_PI / 24, atol=1e-12)
    np.testing.assert_allclose(ts.values, np.cos(ts.time_points) + 0.5, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_subnormal=False), min_size=5, max_size=30))
def test_csv_round_trip_is_exact(values):
    import tempfile
    from pathlib import Path
    t = np.linspace(0, TWO_PI, len(values), endpoint=False)
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "s.csv"
        p.write_text(write_series_csv(t, values))
        ts = read_csv(p)
    assert np.array_equal(ts.time_points, t)
    assert np.array_equal(ts.values, np.array(values))


# ---------------------------------------------------------------- results

def test_json_schema(two_wave_fit):
    d = json.loads(write_result(two_wave_fit))
    for key in ("M", "waves", "SSE", "R2", "R2_total", "nIter", "peaks",
                "fittedValues", "residuals"):
        assert key in d
    assert set(d["waves"][0]) == {"A", "alpha", "beta", "omega"}
    assert set(d["peaks"][0]) == {"tU", "tL", "ZU", "ZL"}


def test_json_round_trip_bit_identical(two_wave_fit):
    blob = write_result(two_wave_fit)
    back = read_result(blob)
    assert back == two_wave_fit
    assert write_result(back) == blob


def test_csv_fitted_shape(two_wave_fit):
    lines = write_result(two_wave_fit, "csv-fitted").decode().splitlines()
    assert lines[0] == "timePoints,fitted"
    assert len(lines) == len(two_wave_fit.time_points) + 1


def test_component_columns_rebuild_fit(two_wave_fit):
    text = write_result(two_wave_fit, "csv-components").decode()
    lines = text.splitlines()
    assert lines[0] == "timePoints,wave1,wave2"
    table = np.array([[float(c) for c in row.split(",")] for row in lines[1:]])
    rebuilt = table[:, 1:].sum(axis=1) + two_wave_fit.model.M
    np.testing.assert_allclose(rebuilt, two_wave_fit.fitted_values, atol=1e-10, rtol=0)


def test_unknown_format(two_wave_fit):
    with pytest.raises(ConfigError):
        write_result(two_wave_fit, "xml")


@pytest.mark.parametrize("blob", [b"{", b"{}", b'{"M": 1, "waves": []}', b"[1, 2]"])
def test_malformed_result(blob):
    with pytest.raises(FormatError):
        read_result(blob)


def test_time_series_validation():
    with pytest.raises(FormatError):
        TimeSeries(np.array([0.0, 0.0, 1.0]), np.zeros(3))
    with pytest.raises(FormatError):
        TimeSeries(np.array([0.0, 7.0]), np.zeros(2))
