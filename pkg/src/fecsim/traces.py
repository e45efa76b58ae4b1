"""Chunk-delay traces: loading, export, and the shift-plus-exponential fit.

Trace files hold one non-negative decimal per line (milliseconds). A single
non-numeric first line is treated as a header. UTF-8, LF or CRLF.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import stats
from .servicemodels import RngStream, ServiceTimeModel, sample_array

REPORT_PERCENTILES = (80.0, 95.0, 99.9)


class ParseError(ValueError):
    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")


class EmptyTrace(ValueError):
    pass


class DegenerateTrace(ValueError):
    pass


@dataclass(frozen=True)
class Trace:
    samples: tuple
    source: str = ""

    def __post_init__(self):
        if not self.samples:
            raise EmptyTrace("trace has no samples")
        arr = np.asarray(self.samples, dtype=float)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("trace samples must be finite and non-negative")

    def __len__(self):
        return len(self.samples)

    def array(self) -> np.ndarray:
        return np.asarray(self.samples, dtype=float)


def parse_trace(text: str, source: str = "") -> Trace:
    values = []
    for row, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            value = float(line)
        except ValueError:
            if row == 1:
                continue  # header
            raise ParseError(row, f"not a number: {line!r}") from None
        if not math.isfinite(value) or value < 0:
            raise ParseError(row, f"delay must be finite and non-negative, got {line!r}")
        values.append(value)
    if not values:
        raise EmptyTrace(f"no samples in {source or 'trace'}")
    return Trace(tuple(values), source)


def load_trace(path) -> Trace:
    path = Path(path)
    return parse_trace(path.read_text(encoding="utf-8"), str(path))


def save_trace(trace: Trace, path, header: str | None = "delay_ms") -> None:
    lines = [header] if header else []
    lines += [repr(float(x)) for x in trace.samples]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def synthetic_trace(model: ServiceTimeModel, count: int, seed: int = 0) -> Trace:
    """Draw ``count`` i.i.d. delays from ``model`` as a stand-in for a measured trace."""
    draws = sample_array(model, RngStream(seed, 0, "synthetic"), count)
    return Trace(tuple(draws.tolist()), source=f"synthetic:{type(model).__name__}")


def fit_shifted_exponential(trace: Trace) -> tuple[float, float]:
    """``(shift, rate)``: shift is the sample minimum, rate is one over the excess mean.

    The minimum is the maximum-likelihood shift; the rate estimate is biased
    slightly upward for small traces.
    """
    x = trace.array()
    if x.size < 2:
        raise DegenerateTrace("need at least two samples")
    shift = float(x.min())
    excess = float(x.mean()) - shift
    if excess <= 0:
        raise DegenerateTrace("all samples are equal")
    return shift, 1.0 / excess


def trace_report(trace: Trace, grid=None, max_lag: int = 10) -> dict:
    x = trace.array()
    report = {
        "source": trace.source,
        "samples": int(x.size),
        "mean_ms": float(x.mean()),
        "percentiles_ms": {f"p{lvl:g}": stats.percentile(x, lvl) for lvl in REPORT_PERCENTILES},
    }
    acf = {}
    for lag in range(1, min(max_lag, x.size - 1) + 1):
        try:
            acf[str(lag)] = stats.autocorrelation(x, lag)
        except stats.DegenerateVariance:
            acf[str(lag)] = None
    report["autocorrelation"] = acf
    try:
        shift, rate = fit_shifted_exponential(trace)
        report["fit"] = {"shift_ms": shift, "rate_per_ms": rate}
    except DegenerateTrace as exc:
        report["fit"] = {"error": "DegenerateTrace", "detail": str(exc)}
    if grid is None:
        grid = stats.default_grid(x)
    report["ccdf"] = [(float(t), float(p)) for t, p in zip(grid, stats.ccdf(x, grid))]
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
