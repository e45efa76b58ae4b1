"""Discrete-event simulation of L download threads serving coded read requests.

Two interchangeable back ends share one set of random inputs:

* :class:`Simulator` is the reference implementation: an event heap, full
  per-attempt records and an explicit :meth:`Simulator.step`.
* :func:`fecsim._kernel.run_kernel` is a compiled loop with the same event
  order, used for long sweeps.

Inputs are drawn up front by :func:`draw_inputs`, so both back ends consume
identical arrival times and chunk durations.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ChunkAttempt,
    ConfigError,
    Event,
    EventKind,
    Outcome,
    Request,
    SimConfig,
    validate_config,
)
from .policies import Policy, Snapshot, kernel_policy, make_policy
from .servicemodels import RngStream, sample_array
from .stats import DelayRecord, DelayRecordSet

__all__ = [
    "DelayRecord",
    "PolicyViolation",
    "SimulationInputs",
    "Simulator",
    "SystemState",
    "arrival_times",
    "draw_inputs",
    "replicate",
    "simulate",
    "step",
]


class PolicyViolation(RuntimeError):
    pass


class SimulationError(RuntimeError):
    pass


def arrival_times(rate: float, count: int, stream: RngStream) -> np.ndarray:
    """Poisson arrival instants: cumulative sums of i.i.d. exponential gaps."""
    if not rate > 0:
        raise ValueError("arrival rate must be > 0")
    gaps = -np.log1p(-stream.uniforms(count)) / rate
    return np.cumsum(gaps)


@dataclass
class SimulationInputs:
    arrivals: np.ndarray
    durations: np.ndarray
    """Flat draw sequence, or shape ``(requests, width)`` in common-random-numbers mode."""

    @property
    def crn_width(self) -> int:
        return self.durations.shape[1] if self.durations.ndim == 2 else 0


def crn_width(cfg: SimConfig) -> int:
    # same for every policy with equal (L, k, n): attempt j of request i lines up across policies
    width = cfg.num_threads + cfg.coding.k - 1
    if cfg.strict_chunk_limit:
        width = min(width, cfg.coding.n)
    return width


def draw_inputs(cfg: SimConfig, replication: int = 0, arrivals=None) -> SimulationInputs:
    """Arrival times and chunk durations for one replication.

    Arrivals and service draws come from separate streams, so two policies
    run under the same seed always see the same arrival sequence.
    """
    if arrivals is None:
        arrivals = arrival_times(cfg.arrival_rate, cfg.num_arrivals, RngStream(cfg.master_seed, replication, "arrival"))
    else:
        arrivals = np.asarray(arrivals, dtype=float)
        if np.any(np.diff(arrivals) < 0):
            raise ValueError("arrival times must be non-decreasing")
    count = len(arrivals)
    if cfg.crn_mode:
        stream = RngStream(cfg.master_seed, replication, "service_crn")
        durations = sample_array(cfg.service_model, stream, (count, crn_width(cfg)))
    else:
        stream = RngStream(cfg.master_seed, replication, "service")
        durations = sample_array(cfg.service_model, stream, count * cfg.max_attempts)
    return SimulationInputs(arrivals, durations)


@dataclass
class SystemState:
    cfg: SimConfig
    inputs: SimulationInputs
    clock: float = 0.0
    event_queue: list = field(default_factory=list)
    waiting_queue: list = field(default_factory=list)
    """Undeparted request ids in arrival order."""
    requests: dict = field(default_factory=dict)
    threads: list = field(default_factory=list)
    """Per thread: ``None`` when idle, else ``(request id, attempt index)``."""
    completed: list = field(default_factory=list)
    next_arrival: int = 0
    seq: int = 0
    draws: int = 0
    queue_trace: list = field(default_factory=list)
    idle_intervals: list = field(default_factory=list)
    violation_since: float | None = None

    def __post_init__(self):
        if not self.threads:
            self.threads = [None] * self.cfg.num_threads

    def push(self, time, kind, thread_id, request_id, attempt_index=-1):
        self.seq += 1
        heapq.heappush(self.event_queue, Event(time, kind, thread_id, self.seq, request_id, attempt_index))

    def idle_threads(self) -> list[int]:
        return [t for t, slot in enumerate(self.threads) if slot is None]

    def snapshot(self) -> Snapshot:
        started = {i: len(self.requests[i].attempts) for i in self.waiting_queue}
        return Snapshot(tuple(self.waiting_queue), started, self.cfg.coding.k, self.cfg.attempt_cap)

    def work_conserving_now(self) -> bool:
        """False when a thread idles while some undeparted request could take another chunk."""
        if all(slot is not None for slot in self.threads):
            return True
        cap = self.cfg.attempt_cap
        return not any(cap is None or len(self.requests[i].attempts) < cap for i in self.waiting_queue)


def _schedule_next_arrival(st: SystemState):
    if st.next_arrival < len(st.inputs.arrivals):
        st.push(float(st.inputs.arrivals[st.next_arrival]), EventKind.ARRIVAL, -1, st.next_arrival)
        st.next_arrival += 1


def _next_duration(st: SystemState, request: Request) -> float:
    dur = st.inputs.durations
    if dur.ndim == 2:
        j = len(request.attempts)
        if j >= dur.shape[1]:
            raise SimulationError(f"request {request.id}: more attempts than pre-drawn columns")
        return float(dur[request.id, j])
    if st.draws >= dur.size:
        raise SimulationError("ran out of pre-drawn durations")
    st.draws += 1
    return float(dur[st.draws - 1])


def _arrive(st: SystemState, request_id: int):
    st.queue_trace.append((st.clock, len(st.waiting_queue)))
    st.requests[request_id] = Request(request_id, st.clock)
    st.waiting_queue.append(request_id)
    _schedule_next_arrival(st)


def _complete(st: SystemState, req: Request, attempt: ChunkAttempt, thread_id: int):
    attempt.outcome = Outcome.COMPLETED
    attempt.end_time = st.clock
    st.threads[thread_id] = None
    req.chunks_done += 1
    if req.chunks_done < st.cfg.coding.k:
        return
    req.departure_time = st.clock
    for other in req.attempts:
        if other.outcome is Outcome.IN_FLIGHT:
            other.outcome = Outcome.TERMINATED
            other.end_time = st.clock
            st.threads[other.thread_id] = None
    st.waiting_queue.remove(req.id)
    st.completed.append(req.id)


def _dispatch(st: SystemState, policy: Policy):
    idle = st.idle_threads()
    if not idle or not st.waiting_queue:
        return
    decision = policy.assign(st.snapshot(), idle)
    seen = set()
    cap = st.cfg.attempt_cap
    for thread_id, request_id in decision.assignments:
        if thread_id in seen or st.threads[thread_id] is not None:
            raise PolicyViolation(f"{policy!r} assigned busy thread {thread_id}")
        seen.add(thread_id)
        req = st.requests.get(request_id)
        if req is None or req.departed:
            raise PolicyViolation(f"{policy!r} assigned thread to inactive request {request_id}")
        if cap is not None and len(req.attempts) >= cap:
            raise PolicyViolation(f"{policy!r} exceeded n={cap} chunks for request {request_id}")
        attempt = ChunkAttempt(thread_id, st.clock, _next_duration(st, req))
        req.attempts.append(attempt)
        st.threads[thread_id] = (request_id, len(req.attempts) - 1)
        st.push(attempt.finish_time, EventKind.CHUNK_COMPLETE, thread_id, request_id, len(req.attempts) - 1)


def _track_work_conservation(st: SystemState):
    ok = st.work_conserving_now()
    if not ok and st.violation_since is None:
        st.violation_since = st.clock
    elif ok and st.violation_since is not None:
        if st.clock > st.violation_since:
            st.idle_intervals.append((st.violation_since, st.clock))
        st.violation_since = None


def step(st: SystemState, policy: Policy) -> bool:
    """Process the next live event and let ``policy`` place every idle thread.

    A departure terminates the request's other attempts before the policy
    runs, so the policy sees all freed threads at once. Returns False once
    no events remain.
    """
    while st.event_queue:
        ev = heapq.heappop(st.event_queue)
        if ev.kind is EventKind.CHUNK_COMPLETE:
            req = st.requests[ev.request_id]
            attempt = req.attempts[ev.attempt_index]
            if attempt.outcome is not Outcome.IN_FLIGHT:
                continue  # cancelled by an earlier departure
            st.clock = ev.time
            _complete(st, req, attempt, ev.thread_id)
        else:
            st.clock = ev.time
            _arrive(st, ev.request_id)
        _dispatch(st, policy)
        _track_work_conservation(st)
        return True
    if st.waiting_queue:
        raise SimulationError(f"requests {st.waiting_queue[:5]} never departed")
    return False


class Simulator:
    """Reference event loop with explicit per-attempt bookkeeping."""

    def __init__(self, cfg: SimConfig, inputs: SimulationInputs | None = None, policy: Policy | None = None,
                 replication: int = 0):
        errors = validate_config(cfg)
        if errors:
            raise ConfigError(errors)
        self.cfg = cfg
        self.replication = replication
        self.policy = policy if policy is not None else make_policy(cfg.policy)
        self.policy.reset()
        self.state = SystemState(cfg, inputs if inputs is not None else draw_inputs(cfg, replication))
        _schedule_next_arrival(self.state)

    def step(self) -> bool:
        return step(self.state, self.policy)

    def run(self) -> DelayRecordSet:
        while self.step():
            pass
        return self.records()

    def records(self) -> DelayRecordSet:
        st = self.state
        reqs = [st.requests[i] for i in sorted(st.requests) if i >= st.cfg.warmup_discard]
        return DelayRecordSet(
            request_id=np.array([r.id for r in reqs], dtype=np.int64),
            arrival=np.array([r.arrival_time for r in reqs], dtype=float),
            departure=np.array([r.departure_time for r in reqs], dtype=float),
            attempts_started=np.array([len(r.attempts) for r in reqs], dtype=np.int64),
            attempts_terminated=np.array(
                [sum(a.outcome is Outcome.TERMINATED for a in r.attempts) for r in reqs], dtype=np.int64),
            service_start=np.array([r.attempts[0].start_time for r in reqs], dtype=float),
            fingerprint=st.cfg.fingerprint(),
            replication=self.replication,
            queue_trace=np.array(st.queue_trace, dtype=float).reshape(-1, 2),
            idle_intervals=np.array(st.idle_intervals, dtype=float).reshape(-1, 2),
            model_extension=st.cfg.model_extension,
        )


def _run_compiled(cfg: SimConfig, inputs: SimulationInputs, replication: int) -> DelayRecordSet:
    from ._kernel import OK, OUT_OF_SAMPLES, run_kernel

    code, limit = kernel_policy(cfg)
    cap = cfg.attempt_cap
    departure, first_start, started, terminated, queue, intervals, status = run_kernel(
        inputs.arrivals, np.ascontiguousarray(inputs.durations).ravel(), inputs.crn_width,
        cfg.num_threads, cfg.coding.k, code, limit, -1 if cap is None else cap,
    )
    if status == OUT_OF_SAMPLES:
        raise SimulationError("ran out of pre-drawn durations")
    if status != OK:
        raise SimulationError("requests left undeparted with no work in progress")
    keep = slice(cfg.warmup_discard, None)
    return DelayRecordSet(
        request_id=np.arange(len(inputs.arrivals), dtype=np.int64)[keep],
        arrival=inputs.arrivals[keep],
        departure=departure[keep],
        attempts_started=started[keep],
        attempts_terminated=terminated[keep],
        service_start=first_start[keep],
        fingerprint=cfg.fingerprint(),
        replication=replication,
        queue_trace=np.column_stack([inputs.arrivals, queue.astype(float)]),
        idle_intervals=intervals,
        model_extension=cfg.model_extension,
    )


def simulate(cfg: SimConfig, replication: int = 0, *, arrivals=None, backend: str = "compiled") -> DelayRecordSet:
    """Run one replication to completion; one record per request in arrival order.

    ``arrivals`` overrides the Poisson arrival stream (e.g. several requests
    at time zero). ``backend`` is ``"compiled"`` or ``"reference"``.
    """
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    inputs = draw_inputs(cfg, replication, arrivals)
    if backend == "reference":
        return Simulator(cfg, inputs, replication=replication).run()
    if backend == "compiled":
        return _run_compiled(cfg, inputs, replication)
    raise ValueError(f"unknown backend {backend!r}")


def replicate(cfg: SimConfig, replications: int | None = None, *, arrivals=None, backend: str = "compiled",
              workers: int = 1) -> list[DelayRecordSet]:
    """Independent replications ``0..R-1``; results are ordered by replication index."""
    count = cfg.replications if replications is None else replications
    if workers > 1 and count > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(simulate, cfg, r, arrivals=arrivals, backend=backend) for r in range(count)]
            return [f.result() for f in futures]
    return [simulate(cfg, r, arrivals=arrivals, backend=backend) for r in range(count)]


def run_summary(cfg: SimConfig, sets: list[DelayRecordSet]) -> str:
    from .stats import replication_ci

    means = [float(np.mean(s.delays)) for s in sets]
    summary = {
        "fingerprint": cfg.fingerprint(),
        "master_seed": cfg.master_seed,
        "replications": len(sets),
        "mean_delay_ms": float(np.mean(means)),
        "ci95_halfwidth_ms": replication_ci(means)[1] if len(means) >= 2 else None,
        "model_extension": cfg.model_extension,
        "per_replication": [s.summary() for s in sets],
    }
    return json.dumps(summary, indent=2, sort_keys=True)
