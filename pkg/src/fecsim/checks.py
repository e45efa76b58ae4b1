"""End-to-end acceptance checks, shared by ``fecsim verify`` and the test suite.

Each check returns a :class:`CheckResult` with the measured numbers in
``detail``; nothing here is tuned to pass. Two tiers exist: ``full`` runs
at the stated sample sizes, ``smoke`` shrinks them to finish in about a
minute.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import scenarios
from .core import CodingParams, PolicySpec, SimConfig
from .engine import replicate, simulate
from .oracles import (
    EffectiveChunkPath,
    capacity_boundary,
    coupled_departure_check,
    order_statistic_ccdf,
    two_request_expected_delays,
)
from .servicemodels import Exponential, RngStream, TwoPoint, sample_array
from .stats import ccdf, queue_slope, replication_ci

SEED = scenarios.DEFAULT_SEED
REL_TOL = 0.03


@dataclass(frozen=True)
class Tier:
    replications: int
    num_arrivals: int
    mc_replications: int
    min_trials: int = 1_000_000
    coupling_instances: int = 1000


TIERS = {
    "full": Tier(50, 62_500, 100_000),
    "smoke": Tier(10, 20_000, 10_000),
}


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"criterion {self.number:2d} [{'PASS' if self.passed else 'FAIL'}] {self.title}"


def _rel(x, ref):
    return abs(x / ref - 1.0)


def _paired_gap(table, value, a="round_robin", b="greedy"):
    gap = table.delay_means[(value, a)] - table.delay_means[(value, b)]
    return replication_ci(gap)


def check_mm1(tier: Tier) -> CheckResult:
    table = scenarios.run_scenario(scenarios.preset("fig6", SEED, tier.replications, tier.num_arrivals))
    points, ok = [], True
    for rho in table.column("value", "greedy"):
        row = {r["policy"]: r for r in table.rows if r["value"] == rho}
        g, rr, sh = row["greedy"], row["round_robin"], row["sharing"]
        oracle = g["oracle_ms"]
        checks = {
            "greedy_within_3pct": _rel(g["mean_delay_ms"], oracle) <= REL_TOL,
            "rr_within_3pct": _rel(rr["mean_delay_ms"], oracle) <= REL_TOL,
            "within_each_others_ci": abs(g["mean_delay_ms"] - rr["mean_delay_ms"]) <= min(g["ci95_ms"], rr["ci95_ms"]),
            "sharing_exceeds_both": sh["mean_delay_ms"] > max(g["mean_delay_ms"], rr["mean_delay_ms"]),
        }
        ok &= all(checks.values())
        points.append({"rho": rho, "oracle": oracle, "greedy": g["mean_delay_ms"], "greedy_ci": g["ci95_ms"],
                       "round_robin": rr["mean_delay_ms"], "rr_ci": rr["ci95_ms"], "sharing": sh["mean_delay_ms"],
                       **checks})
    return CheckResult(1, "k=1 greedy and round-robin match the single-queue oracle", ok, {"points": points})


def check_merlang(tier: Tier) -> CheckResult:
    table = scenarios.run_scenario(scenarios.preset("fig7", SEED, tier.replications, tier.num_arrivals))
    points, ok = [], True
    for rho in table.column("value", "greedy"):
        row = {r["policy"]: r for r in table.rows if r["value"] == rho}
        g, rr = row["greedy"], row["round_robin"]
        gap, hw = _paired_gap(table, rho)
        checks = {
            "greedy_within_3pct": _rel(g["mean_delay_ms"], g["oracle_ms"]) <= REL_TOL,
            "rr_not_below_greedy": gap + hw >= 0.0,
        }
        ok &= all(checks.values())
        points.append({"rho": rho, "oracle": g["oracle_ms"], "greedy": g["mean_delay_ms"],
                       "round_robin": rr["mean_delay_ms"], "gap": gap, "gap_ci": hw, **checks})
    return CheckResult(2, "k=2 greedy matches the Erlang-service oracle; round-robin no better", ok,
                       {"points": points})


def check_gap_growth(tier: Tier) -> CheckResult:
    table = scenarios.run_scenario(scenarios.preset("fig8", SEED, tier.replications, tier.num_arrivals))
    gaps = [_paired_gap(table, k) for k in (1, 2, 3, 4)]
    means = [g for g, _ in gaps]
    monotone = all(b >= a for a, b in zip(means, means[1:]))
    zero_at_one = abs(gaps[0][0]) <= gaps[0][1]
    return CheckResult(3, "round-robin minus greedy gap grows with k", monotone and zero_at_one,
                       {"gaps": means, "ci": [h for _, h in gaps], "non_decreasing": monotone,
                        "zero_at_k1": zero_at_one})


def check_worked_example(tier: Tier) -> CheckResult:
    model = TwoPoint(Fraction(2, 3), 0, 3000)
    greedy = two_request_expected_delays(model, "greedy")
    sharing = two_request_expected_delays(model, "sharing")
    exact = greedy == (Fraction(1000, 3), Fraction(2000, 3)) and sharing == (Fraction(1000), Fraction(1000))
    float_model = TwoPoint(2 / 3, 0.0, 3000.0)
    detail = {"greedy_exact": [str(x) for x in greedy], "sharing_exact": [str(x) for x in sharing]}
    ok = exact
    for name, target in (("greedy", greedy), ("sharing", sharing)):
        cfg = SimConfig(1.0, 2, CodingParams(2, 1), PolicySpec.parse(name), float_model, 2, master_seed=SEED)
        sets = replicate(cfg, tier.mc_replications, arrivals=[0.0, 0.0])
        sim = np.array([s.delays for s in sets]).mean(axis=0)
        close = all(_rel(s, float(t)) <= REL_TOL for s, t in zip(sim, target))
        ok &= close
        detail[f"{name}_simulated"] = sim.tolist()
        detail[f"{name}_within_3pct"] = close
    return CheckResult(4, "two-request worked example, exact and simulated", ok, detail)


def check_coupling(tier: Tier) -> CheckResult:
    rng = random.Random(SEED)
    counterexamples = {}
    for k in (2, 3, 4):
        bad = 0
        for _ in range(tier.coupling_instances):
            requests = rng.randint(1, 8)
            total = requests * k
            t, arrivals = 0.0, []
            for _ in range(total):
                t += rng.expovariate(1.0) + 1e-9
                arrivals.append(t)
            services = [rng.expovariate(1.5) + 1e-9 for _ in range(total)]
            order = list(range(total))
            rng.shuffle(order)
            blocks = [order[i * k:(i + 1) * k] for i in range(requests)]
            result = coupled_departure_check(EffectiveChunkPath(tuple(arrivals), tuple(services)), k, blocks)
            bad += not result.dominance
        counterexamples[k] = bad
    return CheckResult(5, "greedy's departure sum is minimal on coupled paths",
                       all(v == 0 for v in counterexamples.values()), {"counterexamples": counterexamples})


def check_min_of_exponentials(tier: Tier) -> CheckResult:
    L, mu = 16, 0.2
    draws = sample_array(Exponential(mu), RngStream(SEED, 0, "synthetic"), tier.min_trials * L)
    minima = draws.reshape(tier.min_trials, L).min(axis=1)
    target = 1.0 / (L * mu)
    grid = np.linspace(0.0, 5.0 * target, 100)
    sup = float(np.max(np.abs(ccdf(minima, grid) - np.exp(-L * mu * grid))))
    mean = float(minima.mean())
    ok = _rel(mean, target) <= 0.01 and sup <= 0.01
    return CheckResult(6, "minimum of L exponentials is exponential with rate L mu", ok,
                       {"mean": mean, "target": target, "ccdf_sup_norm": sup})


def check_order_statistics(tier: Tier) -> CheckResult:
    table = scenarios.run_ccdf_unlimited(scenarios.S3_LIKE, 2, scenarios.FIG10_R, scenarios.fig10_grid(),
                                         tier.mc_replications, SEED)
    sup = {r: table.sup_norm(r) for r in table.r_values}
    curves = np.array([table.analytic[r] for r in table.r_values])
    monotone = bool(np.all(np.diff(curves, axis=0) <= 0.0))
    ninth = order_statistic_ccdf(TwoPoint(Fraction(2, 3), 0, 3000), 2, 1, 0)
    ok = all(v < 0.01 for v in sup.values()) and monotone and ninth == Fraction(1, 9)
    return CheckResult(7, "order-statistic CCDF: simulation, monotonicity, exact 1/9", ok,
                       {"sup_norm": sup, "non_increasing_in_r": monotone, "two_point_value": str(ninth)})


def check_tradeoff(tier: Tier) -> CheckResult:
    table = scenarios.run_tradeoff(scenarios.preset("fig9", SEED, tier.replications, tier.num_arrivals))
    m = table.column("value")
    delay = table.column("mean_delay_ms")
    service = table.column("mean_service_ms")
    best = int(np.argmin(delay))
    interior = 0 < best < len(delay) - 1
    rises = [(m[i], m[i + 1]) for i in range(len(service) - 1) if service[i + 1] > service[i]]
    ok = interior and not rises
    return CheckResult(8, "redundancy tradeoff: interior delay minimum, service non-increasing", ok,
                       {"m": m, "delay": delay, "service": service, "argmin_m": m[best], "interior_minimum": interior,
                        "service_increases_at": rises})


def check_stability(tier: Tier) -> CheckResult:
    L, mu, k = 16, 6.25, 2
    cap = capacity_boundary(L, mu, k)
    detail, ok = {}, True
    for policy in ("greedy", "round_robin"):
        for factor in (0.95, 1.05):
            rate = factor * cap
            cfg = SimConfig(rate, L, CodingParams(L + k - 1, k), PolicySpec.parse(policy), Exponential(mu),
                            tier.num_arrivals, master_seed=SEED)
            records = simulate(cfg)
            mean = float(np.mean(records.delays))
            slope = queue_slope(records.queue_trace)
            diverging = slope > SLOPE_FRACTION * rate
            expected = factor > 1.0
            passed = diverging == expected and (expected or math.isfinite(mean))
            ok &= passed
            detail[f"{policy}@{factor}"] = {"mean_delay": mean, "slope": slope, "diverging": diverging,
                                            "passed": passed}
    return CheckResult(9, "stability boundary at L mu / k", ok, detail)


# a queue that keeps 1% of the offered rate is treated as growing
SLOPE_FRACTION = 0.01


def check_determinism(tier: Tier) -> CheckResult:
    small = dict(seed=SEED, replications=3, num_arrivals=2000)
    same = {}
    for name in scenarios.PRESETS:
        if name == "fig10":
            a = scenarios.run_preset(name, seed=SEED, replications=2000).to_csv()
            b = scenarios.run_preset(name, seed=SEED, replications=2000).to_csv()
        else:
            a = scenarios.run_preset(name, **small).to_csv()
            b = scenarios.run_preset(name, **small).to_csv()
        same[name] = a.encode() == b.encode()
    return CheckResult(10, "identical seeds give byte-identical preset CSV", all(same.values()), {"identical": same})


CHECKS = {
    1: check_mm1,
    2: check_merlang,
    3: check_gap_growth,
    4: check_worked_example,
    5: check_coupling,
    6: check_min_of_exponentials,
    7: check_order_statistics,
    8: check_tradeoff,
    9: check_stability,
    10: check_determinism,
}


def run_check(number: int, tier: str = "full") -> CheckResult:
    return CHECKS[number](TIERS[tier])


def run_checks(tier: str = "full", only=None):
    for number in only or sorted(CHECKS):
        yield run_check(number, tier)
