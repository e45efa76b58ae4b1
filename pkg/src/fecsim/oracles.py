"""Closed-form and enumeration references for checking simulator output."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .servicemodels import Deterministic, ServiceTimeModel, TwoPoint


class Unstable(ValueError):
    pass


class MalformedAssignment(ValueError):
    pass


def capacity_boundary(num_threads: int, rate: float, k: int) -> float:
    """Largest sustainable request rate ``L mu / k`` under work-conserving allocation."""
    return num_threads * rate / k


def mm1_mean_delay(arrival_rate: float, num_threads: int, rate: float) -> float:
    """Mean sojourn time when every request needs one chunk (a single queue served at ``L mu``)."""
    service_rate = num_threads * rate
    if arrival_rate >= service_rate:
        raise Unstable(f"lambda={arrival_rate} >= L*mu={service_rate}")
    return 1.0 / (service_rate - arrival_rate)


def merlang_mean_delay(arrival_rate: float, num_threads: int, rate: float, k: int) -> float:
    """Pollaczek-Khinchine mean delay with Erlang(k, L mu) service.

    Greedy serves one request at a time and each of its k effective chunks
    takes an Exp(L mu) stage, so it is an M/G/1 queue with this service law.
    """
    stage = num_threads * rate
    es = k / stage
    es2 = k * (k + 1) / stage**2
    utilisation = arrival_rate * es
    if utilisation >= 1.0:
        raise Unstable(f"lambda*k={arrival_rate * k} >= L*mu={stage}")
    return arrival_rate * es2 / (2.0 * (1.0 - utilisation)) + es


@dataclass(frozen=True)
class EffectiveChunkPath:
    """Arrival instants and service times of effective chunks in a work-conserving queue."""

    arrivals: tuple
    services: tuple

    def __post_init__(self):
        s = np.asarray(self.arrivals, dtype=float)
        x = np.asarray(self.services, dtype=float)
        if s.shape != x.shape or s.ndim != 1:
            raise ValueError("arrivals and services must be equal-length sequences")
        if np.any(np.diff(s) <= 0):
            raise ValueError("effective-chunk arrivals must be strictly increasing")
        if np.any(x <= 0):
            raise ValueError("service times must be positive")

    @property
    def departures(self) -> np.ndarray:
        out = np.empty(len(self.arrivals))
        last = -math.inf
        for i, (s, x) in enumerate(zip(self.arrivals, self.services)):
            last = max(s, last) + x
            out[i] = last
        return out


@dataclass(frozen=True)
class CouplingResult:
    greedy_sum: float
    alt_sum: float
    dominance: bool
    pointwise: bool
    """Whether every sorted alternative completion is no earlier than greedy's (``t_b[i] >= t[ik]``)."""


def coupled_departure_check(path: EffectiveChunkPath, k: int, assignment: Sequence[Sequence[int]]) -> CouplingResult:
    """Compare greedy's completion-time sum with an alternative on one departure sample path.

    ``assignment[i]`` lists the (0-based) effective-chunk departure indices
    that belong to request ``i`` under the alternative; the request
    completes at the latest of them. Greedy's request ``i`` completes at
    departure ``(i + 1) k - 1``.
    """
    t = path.departures
    total = len(t)
    if k < 1 or total % k:
        raise MalformedAssignment(f"{total} departures cannot form blocks of k={k}")
    blocks = [list(b) for b in assignment]
    flat = sorted(itertools.chain.from_iterable(blocks))
    if flat != list(range(total)) or any(len(b) != k for b in blocks):
        raise MalformedAssignment("assignment must partition the departures into blocks of size k")
    greedy = t[k - 1::k]
    alt = np.sort([t[max(b)] for b in blocks])
    greedy_sum, alt_sum = float(np.sum(greedy)), float(np.sum(alt))
    return CouplingResult(greedy_sum, alt_sum, greedy_sum <= alt_sum, bool(np.all(alt >= greedy)))


def _cdf_scalar(model: ServiceTimeModel, t):
    # exact arithmetic for finite-support models so Fraction inputs stay exact
    if isinstance(model, TwoPoint):
        total = 0
        for value, prob in model.outcomes():
            if value <= t:
                total += prob
        return total
    if isinstance(model, Deterministic):
        return 1 if model.value <= t else 0
    return float(model.cdf(t))


def order_statistic_ccdf(model: ServiceTimeModel, r: int, k: int, t):
    """``P(k-th smallest of r i.i.d. draws > t)``, i.e. fewer than k draws are ``<= t``."""
    if not 1 <= k <= r:
        raise ValueError(f"need 1 <= k <= r, got k={k}, r={r}")
    F = _cdf_scalar(model, t)
    return sum(math.comb(r, j) * F**j * (1 - F) ** (r - j) for j in range(k))


def _support(model: ServiceTimeModel):
    if isinstance(model, TwoPoint):
        return model.outcomes()
    if isinstance(model, Deterministic):
        return [(model.value, 1)]
    raise TypeError("enumeration needs a finite-support model (TwoPoint or Deterministic)")


def two_request_expected_delays(model: ServiceTimeModel, policy: str):
    """Exact ``(E[D1], E[D2])``: two requests at time 0, two threads, (n, k) = (2, 1).

    Enumerates every joint outcome of the chunk download times. Greedy
    sends both threads to request 1, then both to request 2; sharing gives
    each request its own thread.
    """
    support = _support(model)
    e1 = e2 = 0
    if policy == "greedy":
        for (a, pa), (b, pb), (c, pc), (d, pd) in itertools.product(support, repeat=4):
            p = pa * pb * pc * pd
            first = min(a, b)
            e1 += p * first
            e2 += p * (first + min(c, d))
    elif policy == "sharing":
        for (a, pa), (b, pb) in itertools.product(support, repeat=2):
            p = pa * pb
            e1 += p * a
            e2 += p * b
    else:
        raise ValueError(f"policy must be 'greedy' or 'sharing', got {policy!r}")
    return e1, e2
