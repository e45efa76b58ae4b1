"""Delay records and the estimators computed over them."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

PERCENTILE_LEVELS = (50.0, 80.0, 95.0, 99.0, 99.9)
RECORD_COLUMNS = ("request_id", "arrival_ms", "departure_ms", "delay_ms", "attempts_started", "attempts_terminated")
Z95 = 1.96


class EmptySet(ValueError):
    pass


class DegenerateVariance(ValueError):
    pass


class TooFewReplications(ValueError):
    pass


class DelayRecord(NamedTuple):
    request_id: int
    arrival: float
    departure: float
    delay: float
    attempts_started: int
    attempts_terminated: int


@dataclass
class DelayRecordSet:
    """Per-request outcomes of one replication, stored column-wise.

    ``queue_trace`` (arrival time, number in system seen by that arrival) and
    ``idle_intervals`` (start, end) cover the whole run, warm-up included; the
    record columns exclude the discarded warm-up requests.
    """

    request_id: np.ndarray
    arrival: np.ndarray
    departure: np.ndarray
    attempts_started: np.ndarray
    attempts_terminated: np.ndarray
    service_start: np.ndarray
    fingerprint: str = ""
    replication: int = 0
    queue_trace: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    idle_intervals: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    model_extension: bool = False

    @property
    def delays(self) -> np.ndarray:
        return self.departure - self.arrival

    @property
    def service_times(self) -> np.ndarray:
        """Time from the first attempt start to departure."""
        return self.departure - self.service_start

    def __len__(self):
        return len(self.request_id)

    @property
    def records(self) -> list[DelayRecord]:
        delays = self.delays
        return [
            DelayRecord(int(i), float(a), float(d), float(x), int(s), int(t))
            for i, a, d, x, s, t in zip(
                self.request_id, self.arrival, self.departure, delays,
                self.attempts_started, self.attempts_terminated,
            )
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for rec in self.records:
            writer.writerow([rec.request_id, repr(rec.arrival), repr(rec.departure), repr(rec.delay),
                             rec.attempts_started, rec.attempts_terminated])
        return buf.getvalue()

    def summary(self) -> dict:
        delays = self.delays
        return {
            "fingerprint": self.fingerprint,
            "replication": self.replication,
            "records": len(self),
            "mean_delay_ms": float(np.mean(delays)) if len(delays) else None,
            "idle_violation_intervals": int(len(self.idle_intervals)),
            "idle_violation_time_ms": float(np.sum(self.idle_intervals[:, 1] - self.idle_intervals[:, 0]))
            if len(self.idle_intervals) else 0.0,
            "model_extension": self.model_extension,
        }


def _values(data) -> np.ndarray:
    if isinstance(data, DelayRecordSet):
        data = data.delays
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        raise EmptySet("no samples")
    return arr


def mean_delay(data) -> float:
    return float(np.mean(_values(data)))


def ccdf(data, grid) -> np.ndarray:
    """``P(X > t)`` at each grid point (right-continuous: ``t`` equal to a sample counts as not exceeding)."""
    srt = np.sort(_values(data))
    t = np.asarray(grid, dtype=float)
    return 1.0 - np.searchsorted(srt, t, side="right") / srt.size


def percentile(data, level: float) -> float:
    """Nearest-rank percentile: the smallest sample with at least ``level``% of samples at or below it."""
    srt = np.sort(_values(data))
    if not 0 < level <= 100:
        raise ValueError(f"percentile level must be in (0, 100], got {level}")
    rank = max(1, math.ceil(round(level / 100.0 * srt.size, 9)))
    return float(srt[rank - 1])


def autocorrelation(samples, lag: int = 1) -> float:
    x = np.asarray(samples, dtype=float)
    if lag < 1 or lag >= x.size:
        raise ValueError(f"lag must satisfy 1 <= lag < {x.size}")
    centred = x - x.mean()
    head, tail = centred[:-lag], centred[lag:]
    denom = math.sqrt(float(np.dot(head, head)) * float(np.dot(tail, tail)))
    if denom == 0.0:
        raise DegenerateVariance("series has zero variance")
    return float(np.dot(head, tail) / denom)


def replication_ci(means: Sequence[float]) -> tuple[float, float]:
    """Grand mean and 95% normal-approximation halfwidth across replications."""
    arr = np.asarray(means, dtype=float)
    if arr.size < 2:
        raise TooFewReplications(f"need at least 2 replications, got {arr.size}")
    return float(arr.mean()), float(Z95 * arr.std(ddof=1) / math.sqrt(arr.size))


def load(arrival_rate: float, num_threads: int, rate: float) -> float:
    """Offered load ``lambda / (L mu)``."""
    return arrival_rate / (num_threads * rate)


@dataclass
class SummaryStats:
    mean: float
    percentiles: dict[str, float]
    ccdf: list[tuple[float, float]]
    ci95_halfwidth: float | None = None
    replications: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def ccdf_csv(self) -> str:
        return ccdf_csv(self.ccdf)


def ccdf_csv(points: Iterable[tuple[float, float]]) -> str:
    lines = ["t_ms,ccdf"]
    lines += [f"{t!r},{p!r}" for t, p in points]
    return "\n".join(lines) + "\n"


def default_grid(samples, points: int = 50) -> np.ndarray:
    arr = _values(samples)
    return np.linspace(0.0, float(arr.max()), points)


def summarize(sets: Sequence[DelayRecordSet] | DelayRecordSet, grid=None) -> SummaryStats:
    if isinstance(sets, DelayRecordSet):
        sets = [sets]
    pooled = np.concatenate([s.delays for s in sets]) if sets else np.zeros(0)
    pooled = _values(pooled)
    if grid is None:
        grid = default_grid(pooled)
    halfwidth = None
    if len(sets) >= 2:
        _, halfwidth = replication_ci([mean_delay(s) for s in sets])
    return SummaryStats(
        mean=float(pooled.mean()),
        percentiles={f"p{lvl:g}": percentile(pooled, lvl) for lvl in PERCENTILE_LEVELS},
        ccdf=[(float(t), float(p)) for t, p in zip(grid, ccdf(pooled, grid))],
        ci95_halfwidth=halfwidth,
        replications=len(sets),
    )


def queue_slope(queue_trace) -> float:
    """Least-squares slope of the queue length seen by arrivals over the second half of the run.

    A stable queue gives a slope near zero; an overloaded one grows at
    roughly ``lambda - departure rate``.
    """
    trace = np.asarray(queue_trace, dtype=float)
    t, q = trace[:, 0], trace[:, 1]
    if t.size < 4:
        raise EmptySet("need at least 4 arrivals for a slope")
    half = t >= t[0] + (t[-1] - t[0]) / 2.0
    return float(np.polyfit(t[half], q[half], 1)[0])
