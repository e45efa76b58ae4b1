from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fecsim.core import CodingParams, Outcome, PolicySpec, SimConfig
from fecsim.engine import (
    PolicyViolation,
    SimulationInputs,
    Simulator,
    arrival_times,
    draw_inputs,
    replicate,
    simulate,
)
from fecsim.policies import AssignmentDecision, Greedy, Policy
from fecsim.servicemodels import Deterministic, Exponential, RngStream, TwoPoint


def config(L=2, k=1, n=None, policy="greedy", model=Deterministic(7.0), arrivals=1, **kw):
    n = L + k - 1 if n is None else n
    return SimConfig(1.0, L, CodingParams(n, k), PolicySpec.parse(policy), model, arrivals, **kw)


def fixed_inputs(arrivals, durations):
    return SimulationInputs(np.asarray(arrivals, dtype=float), np.asarray(durations, dtype=float))


class Recording(Greedy):
    def __init__(self):
        self.offers = []

    def assign(self, snapshot, idle_threads):
        self.offers.append((tuple(snapshot.active), list(idle_threads)))
        return super().assign(snapshot, idle_threads)


@pytest.mark.parametrize("backend", ["reference", "compiled"])
def test_single_request_deterministic(backend):
    rec = simulate(config(), backend=backend, arrivals=[0.0])
    assert rec.delays.tolist() == [7.0]
    assert rec.attempts_started.tolist() == [2]
    assert rec.attempts_terminated.tolist() == [1]


def test_departure_terminates_siblings_and_frees_threads_together():
    cfg = config(L=4, k=1, arrivals=2)
    policy = Recording()
    sim = Simulator(cfg, fixed_inputs([0.0, 0.5], [1.0, 2.0, 3.0, 4.0, 9.0, 9.0, 9.0, 9.0]), policy)
    rec = sim.run()
    first = sim.state.requests[0]
    outcomes = [a.outcome for a in first.attempts]
    assert outcomes == [Outcome.COMPLETED] + [Outcome.TERMINATED] * 3
    assert all(a.end_time == 1.0 for a in first.attempts)
    assert ((1,), [0, 1, 2, 3]) in policy.offers
    assert rec.departure.tolist() == [1.0, 10.0]


def test_greedy_reassigns_thread_to_fresh_chunk_of_same_request():
    cfg = config(L=2, k=2, arrivals=1)
    sim = Simulator(cfg, fixed_inputs([0.0], [1.0, 5.0, 2.0]))
    sim.run()
    attempts = sim.state.requests[0].attempts
    assert len(attempts) == 3
    assert (attempts[2].thread_id, attempts[2].start_time) == (0, 1.0)
    assert sim.state.requests[0].departure_time == 3.0


def test_arrival_to_empty_system_starts_all_threads():
    cfg = config(L=16, k=2, model=Exponential(1.0), arrivals=1)
    sim = Simulator(cfg, draw_inputs(cfg, 0, arrivals=[2.5]))
    sim.step()
    attempts = sim.state.requests[0].attempts
    assert len(attempts) == 16 and all(a.start_time == 2.5 for a in attempts)


def test_tie_at_kth_completion_terminates_the_sibling():
    # both chunks finish together; the lower thread id completes first
    cfg = config(L=2, k=1, model=Deterministic(3.0))
    sim = Simulator(cfg, fixed_inputs([0.0], [3.0, 3.0]))
    rec = sim.run()
    assert [a.outcome for a in sim.state.requests[0].attempts] == [Outcome.COMPLETED, Outcome.TERMINATED]
    assert rec.attempts_terminated.tolist() == [1]


class BusyThief(Policy):
    def assign(self, snapshot, idle_threads):
        return AssignmentDecision([(idle_threads[0], snapshot.active[0]), (idle_threads[0], snapshot.active[0])])


class Hog(Policy):
    def assign(self, snapshot, idle_threads):
        return AssignmentDecision([(t, snapshot.active[0]) for t in idle_threads] * 2)


def test_policy_violations_are_caught():
    cfg = config(L=2, k=1, arrivals=1)
    with pytest.raises(PolicyViolation, match="busy"):
        Simulator(cfg, fixed_inputs([0.0], [1.0] * 4), BusyThief()).run()


def test_chunk_cap_violation_is_caught():
    cfg = config(L=3, k=1, n=3, arrivals=1)
    sim = Simulator(cfg, fixed_inputs([0.0], [5.0] * 6), Greedy())
    sim.policy = Hog()
    with pytest.raises(PolicyViolation):
        sim.run()


def test_arrival_gap_mean():
    times = arrival_times(50.0, 62500, RngStream(4, 0, "arrival"))
    assert abs(np.diff(np.concatenate([[0.0], times])).mean() / 0.02 - 1) <= 0.01


def test_single_arrival_is_first_gap():
    u = RngStream(4, 0, "arrival").uniform()
    assert arrival_times(50.0, 1, RngStream(4, 0, "arrival"))[0] == pytest.approx(-np.log1p(-u) / 50.0)


@pytest.mark.parametrize("policy,target", [
    ("greedy", (1000 / 3, 2000 / 3)),
    ("sharing", (1000.0, 1000.0)),
])
def test_two_request_worked_example(policy, target):
    cfg = config(L=2, k=1, n=2, policy=policy, model=TwoPoint(2 / 3, 0.0, 3000.0), arrivals=2)
    sets = replicate(cfg, 100_000, arrivals=[0.0, 0.0])
    means = np.array([s.delays for s in sets]).mean(axis=0)
    assert np.all(np.abs(means / np.array(target) - 1) <= 0.03)


def test_greedy_two_request_exact_on_every_outcome():
    # all 16 outcomes of the four chunk draws against the enumeration rule
    values = (0.0, 3000.0)
    for a in values:
        for b in values:
            for c in values:
                for d in values:
                    cfg = config(L=2, k=1, model=Deterministic(1.0), arrivals=2)
                    rec = Simulator(cfg, fixed_inputs([0.0, 0.0], [a, b, c, d])).run()
                    first = min(a, b)
                    # threads freed at `first` pick up draws c and d
                    assert rec.departure.tolist() == [first, first + min(c, d)]


def test_replications_are_independent_and_reproducible():
    cfg = config(L=4, k=2, model=Exponential(1.0), arrivals=50)
    a, b = replicate(cfg, 2)
    assert not np.array_equal(a.departure, b.departure)
    assert np.array_equal(simulate(cfg, 1).departure, b.departure)


def test_crn_mode_shares_arrivals_and_chunk_draws_across_policies():
    base = config(L=4, k=2, model=Exponential(1.0), arrivals=30, crn_mode=True)
    g = draw_inputs(base, 0)
    r = draw_inputs(base.replace(policy=PolicySpec("round_robin")), 0)
    assert np.array_equal(g.arrivals, r.arrivals) and np.array_equal(g.durations, r.durations)


def test_warmup_discard_drops_leading_records():
    cfg = config(L=4, k=2, model=Exponential(1.0), arrivals=30)
    full = simulate(cfg)
    cut = simulate(cfg.replace(warmup_discard=10))
    assert cut.request_id[0] == 10 and np.array_equal(cut.delays, full.delays[10:])


def test_non_strict_run_is_flagged():
    cfg = config(L=4, k=2, n=3, model=Exponential(1.0), arrivals=20, strict_chunk_limit=False)
    assert simulate(cfg).model_extension


random_configs = st.builds(
    lambda L, k, slack, policy, model, crn, count, rate, strict: SimConfig(
        rate, L, CodingParams(max(k, L + k - 1 + slack) if strict else max(k, L + k - 1 - slack), k),
        PolicySpec.parse(policy if policy != "fixed" else f"fixed_redundancy(m={k})"), model, count,
        crn_mode=crn, strict_chunk_limit=strict,
    ),
    L=st.integers(1, 5),
    k=st.integers(1, 3),
    slack=st.integers(0, 2),
    policy=st.sampled_from(["greedy", "round_robin", "sharing", "fixed"]),
    model=st.sampled_from([Exponential(1.0), Deterministic(1.0), TwoPoint(0.5, 1.0, 2.0), TwoPoint(0.7, 0.0, 3.0)]),
    crn=st.booleans(),
    count=st.integers(1, 40),
    rate=st.sampled_from([0.5, 2.0, 10.0]),
    strict=st.booleans(),
)


@settings(max_examples=150)
@given(random_configs, st.integers(0, 3))
def test_backends_agree_bit_for_bit(cfg, rep):
    ref = simulate(cfg, rep, backend="reference")
    fast = simulate(cfg, rep, backend="compiled")
    for name in ("departure", "service_start", "attempts_started", "attempts_terminated", "queue_trace",
                 "idle_intervals"):
        assert np.array_equal(getattr(ref, name), getattr(fast, name)), name


@settings(max_examples=100)
@given(random_configs)
def test_record_invariants(cfg):
    rec = simulate(cfg)
    k = cfg.coding.k
    assert np.all(rec.departure >= rec.service_start)
    assert np.all(rec.service_start >= rec.arrival)
    assert np.all(rec.attempts_started - rec.attempts_terminated == k)
    assert np.all(rec.attempts_started <= cfg.num_threads + k - 1)
    if cfg.attempt_cap is not None:
        assert np.all(rec.attempts_started <= cfg.attempt_cap)
    if cfg.policy.name == "greedy" and cfg.strict_chunk_limit:
        assert np.all(np.diff(rec.departure) >= 0)
    if cfg.policy.name in ("greedy", "round_robin"):
        assert len(rec.idle_intervals) == 0


def test_sharing_idles_threads_and_logs_it():
    cfg = config(L=4, k=1, n=4, policy="sharing", model=Exponential(1.0), arrivals=1)
    rec = simulate(cfg, arrivals=[0.0])
    assert rec.idle_intervals.tolist() == [[0.0, rec.departure[0]]]
    rec = simulate(cfg, arrivals=[0.0] * 5)
    assert len(rec.idle_intervals) > 0
    assert np.all(rec.idle_intervals[:, 1] > rec.idle_intervals[:, 0])
