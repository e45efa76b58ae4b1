"""Chunk download-time distributions and seeded random streams.

Every model samples by inverse transform of a single uniform, so two runs
that share uniforms get monotonically coupled durations.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

STREAM_LABELS = {"arrival": 0, "service": 1, "service_crn": 2, "synthetic": 3}


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        _check_positive("rate", self.rate)

    def mean(self) -> float:
        return 1.0 / self.rate

    def cdf(self, t):
        return np.where(np.asarray(t) < 0, 0.0, -np.expm1(-self.rate * np.maximum(t, 0.0)))

    def transform(self, u):
        return -np.log1p(-np.asarray(u)) / self.rate


@dataclass(frozen=True)
class Deterministic:
    value: float

    def __post_init__(self):
        _check_nonneg("value", self.value)

    def mean(self) -> float:
        return self.value

    def cdf(self, t):
        return np.where(np.asarray(t) >= self.value, 1.0, 0.0)

    def transform(self, u):
        return np.full(np.shape(u), float(self.value))


@dataclass(frozen=True)
class TwoPoint:
    """``v0`` with probability ``p0``, otherwise ``v1``.

    Parameters may be ``fractions.Fraction`` for exact enumeration.
    """

    p0: float
    v0: float
    v1: float

    def __post_init__(self):
        if not (0 <= self.p0 <= 1) or not math.isfinite(self.p0):
            raise ModelError(f"p0 must lie in [0, 1], got {self.p0}")
        _check_nonneg("v0", self.v0)
        _check_nonneg("v1", self.v1)

    def mean(self):
        return self.p0 * self.v0 + (1 - self.p0) * self.v1

    def outcomes(self):
        """Finite support as ``[(value, probability), ...]``."""
        return [(self.v0, self.p0), (self.v1, 1 - self.p0)]

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = sorted((float(self.v0), float(self.v1)))
        p_lo = float(self.p0) if float(self.v0) <= float(self.v1) else 1.0 - float(self.p0)
        if lo == hi:
            return np.where(t >= lo, 1.0, 0.0)
        return np.where(t >= hi, 1.0, np.where(t >= lo, p_lo, 0.0))

    def transform(self, u):
        return np.where(np.asarray(u) < float(self.p0), float(self.v0), float(self.v1))


@dataclass(frozen=True)
class ShiftedExponential:
    shift: float
    rate: float

    def __post_init__(self):
        _check_nonneg("shift", self.shift)
        _check_positive("rate", self.rate)

    def mean(self) -> float:
        return self.shift + 1.0 / self.rate

    def cdf(self, t):
        x = np.asarray(t, dtype=float) - self.shift
        return np.where(x < 0, 0.0, -np.expm1(-self.rate * np.maximum(x, 0.0)))

    def transform(self, u):
        return self.shift - np.log1p(-np.asarray(u)) / self.rate


@dataclass(frozen=True)
class Empirical:
    samples: tuple
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ModelError("empirical model needs at least one sample")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ModelError("empirical samples must be finite and non-negative")
        object.__setattr__(self, "samples", tuple(float(x) for x in arr))
        object.__setattr__(self, "_sorted", np.sort(arr))

    def mean(self) -> float:
        return float(np.mean(self.samples))

    def cdf(self, t):
        # right-continuous step: fraction of samples <= t
        srt = self._sorted
        return np.searchsorted(srt, np.asarray(t, dtype=float), side="right") / srt.size

    def transform(self, u):
        # inverse of the empirical CDF, so larger uniforms give larger delays
        arr = self._sorted
        idx = np.minimum((np.asarray(u) * arr.size).astype(np.int64), arr.size - 1)
        return arr[idx]


ServiceTimeModel = Union[Exponential, Deterministic, TwoPoint, ShiftedExponential, Empirical]


def _check_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ModelError(f"{name} must be finite and > 0, got {value}")


def _check_nonneg(name, value):
    if not (math.isfinite(value) and value >= 0):
        raise ModelError(f"{name} must be finite and >= 0, got {value}")


class RngStream:
    """A reproducible uniform stream keyed by ``(master_seed, replication, label)``.

    ``draws`` counts the uniforms consumed so far; identical keys replay
    identical sequences.
    """

    def __init__(self, master_seed: int, replication: int = 0, label: str = "service"):
        self.master_seed = int(master_seed)
        self.replication = int(replication)
        self.label = label
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.replication, STREAM_LABELS[label]))
        self._gen = np.random.Generator(np.random.PCG64(seq))
        self.draws = 0

    @property
    def key(self):
        return (self.replication, self.label, self.draws)

    def uniform(self) -> float:
        self.draws += 1
        return float(self._gen.random())

    def uniforms(self, size) -> np.ndarray:
        out = self._gen.random(size)
        self.draws += out.size
        return out


def sample(model: ServiceTimeModel, stream: RngStream) -> float:
    """One draw from ``model``; advances ``stream`` by one uniform."""
    return float(model.transform(stream.uniform()))


def sample_array(model: ServiceTimeModel, stream: RngStream, size) -> np.ndarray:
    return np.asarray(model.transform(stream.uniforms(size)), dtype=float)


def mean(model: ServiceTimeModel):
    return model.mean()


# --- text form used by config files -------------------------------------

_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_call(text: str) -> tuple[str, dict[str, str]]:
    """Split ``name(a=1, b=2)`` into ``("name", {"a": "1", "b": "2"})``."""
    m = _CALL.match(text)
    if not m:
        raise ModelError(f"cannot parse {text!r}")
    args = {}
    body = (m.group(2) or "").strip()
    if body:
        for part in body.split(","):
            if "=" not in part:
                raise ModelError(f"expected key=value in {text!r}")
            key, value = part.split("=", 1)
            args[key.strip()] = value.strip()
    return m.group(1), args


def parse_model(text: str) -> ServiceTimeModel:
    name, args = parse_call(text)
    try:
        if name == "exponential":
            return Exponential(float(args["rate"]))
        if name == "deterministic":
            return Deterministic(float(args["value"]))
        if name == "two_point":
            return TwoPoint(float(args["p0"]), float(args["v0"]), float(args["v1"]))
        if name == "shifted_exponential":
            return ShiftedExponential(float(args["shift"]), float(args["rate"]))
        if name == "empirical":
            if "path" in args:
                from .traces import load_trace

                trace = load_trace(args["path"])
                return Empirical(tuple(trace.samples), source=args["path"])
            return Empirical(tuple(float(x) for x in args["samples"].split(";")))
    except KeyError as exc:
        raise ModelError(f"{name}: missing parameter {exc.args[0]}") from None
    raise ModelError(f"unknown service model {name!r}")


def format_model(model: ServiceTimeModel) -> str:
    if isinstance(model, Exponential):
        return f"exponential(rate={model.rate!r})"
    if isinstance(model, Deterministic):
        return f"deterministic(value={model.value!r})"
    if isinstance(model, TwoPoint):
        return f"two_point(p0={float(model.p0)!r}, v0={float(model.v0)!r}, v1={float(model.v1)!r})"
    if isinstance(model, ShiftedExponential):
        return f"shifted_exponential(shift={model.shift!r}, rate={model.rate!r})"
    if isinstance(model, Empirical):
        if model.source:
            return f"empirical(path={model.source})"
        return "empirical(samples=" + ";".join(repr(x) for x in model.samples) + ")"
    raise ModelError(f"not a service model: {model!r}")

