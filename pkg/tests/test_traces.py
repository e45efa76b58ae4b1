import numpy as np
import pytest

from fecsim.servicemodels import ShiftedExponential, TwoPoint
from fecsim.traces import (
    DegenerateTrace,
    EmptyTrace,
    ParseError,
    Trace,
    fit_shifted_exponential,
    load_trace,
    save_trace,
    synthetic_trace,
    trace_report,
)


def write(tmp_path, text):
    path = tmp_path / "trace.txt"
    path.write_bytes(text.encode())
    return path


def test_load_plain(tmp_path):
    assert load_trace(write(tmp_path, "5\n7\n")).samples == (5.0, 7.0)


def test_header_and_crlf(tmp_path):
    assert load_trace(write(tmp_path, "delay_ms\r\n5\r\n7.5\r\n")).samples == (5.0, 7.5)


def test_negative_value_reports_row(tmp_path):
    with pytest.raises(ParseError) as err:
        load_trace(write(tmp_path, "delay_ms\n5\n-3\n"))
    assert err.value.row == 3


def test_empty_trace(tmp_path):
    with pytest.raises(EmptyTrace):
        load_trace(write(tmp_path, "delay_ms\n"))


def test_save_load_roundtrip(tmp_path):
    trace = Trace((0.1, 123.456, 1e-7))
    save_trace(trace, tmp_path / "t.txt")
    assert load_trace(tmp_path / "t.txt").samples == trace.samples


def test_fit_by_hand():
    assert fit_shifted_exponential(Trace((1.0, 2.0, 3.0))) == (1.0, 1.0)
    with pytest.raises(DegenerateTrace):
        fit_shifted_exponential(Trace((5.0, 5.0, 5.0)))


def test_fit_recovers_generator():
    shift, rate = fit_shifted_exponential(synthetic_trace(ShiftedExponential(100.0, 0.01), 1_000_000, seed=3))
    assert abs(shift - 100.0) <= 1.0
    assert abs(rate / 0.01 - 1) <= 0.02


def test_constant_trace_report():
    report = trace_report(Trace((4.0,) * 20))
    assert len(set(report["percentiles_ms"].values())) == 1
    assert report["fit"]["error"] == "DegenerateTrace"


def test_synthetic_report_independence():
    report = trace_report(synthetic_trace(ShiftedExponential(100.0, 1 / 39), 200_000, seed=8))
    assert abs(report["autocorrelation"]["1"]) <= 0.01


def test_two_point_trace_mean():
    report = trace_report(synthetic_trace(TwoPoint(2 / 3, 0.0, 3000.0), 200_000, seed=9))
    assert abs(report["mean_ms"] - 1000.0) <= 15.0


def test_report_ccdf_is_monotone():
    report = trace_report(synthetic_trace(ShiftedExponential(10.0, 1.0), 1000, seed=1))
    probs = np.array([p for _, p in report["ccdf"]])
    assert probs[0] == 1.0 and np.all(np.diff(probs) <= 0)
