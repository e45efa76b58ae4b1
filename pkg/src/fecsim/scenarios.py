"""Parameter sweeps, policy comparisons and the figure-style presets."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .core import CodingParams, ConfigError, PolicySpec, SimConfig, check_config
from .engine import replicate
from .oracles import Unstable, capacity_boundary, merlang_mean_delay, mm1_mean_delay, order_statistic_ccdf
from .servicemodels import Exponential, ServiceTimeModel, ShiftedExponential
from .stats import replication_ci

BASE_RATE = 50.0
BASE_THREADS = 16
BASE_ARRIVALS = 62500
DEFAULT_REPLICATIONS = 50
DEFAULT_SEED = 1

# S3-like chunk delay: 100 ms floor plus an exponential tail, 139 ms mean
S3_LIKE = ShiftedExponential(shift=100.0, rate=1.0 / 39.0)

ROW_COLUMNS = (
    "scenario", "sweep", "value", "policy", "rho", "arrival_rate", "service_mean_ms",
    "num_threads", "n", "k", "replications", "num_arrivals", "mean_delay_ms", "ci95_ms",
    "mean_service_ms", "queueing_ms", "oracle_ms", "fingerprint", "master_seed",
)


@dataclass
class Scenario:
    """A base config swept over one parameter for one or more policies.

    ``sweep`` is ``"rho"`` (load: the exponential rate is derived from
    ``rho = lambda / (L mu)`` with lambda and L held fixed), ``"k"`` (coding
    becomes ``(L+k-1, k)``), ``"m"`` (fixed-redundancy level) or ``None``.
    """

    name: str
    base: SimConfig
    sweep: str | None = None
    values: tuple = ()
    policies: tuple = ("greedy",)
    oracles: bool = True

    def points(self):
        values = self.values if self.sweep else (None,)
        for value in values:
            for policy in self.policies:
                yield value, policy, self.config(value, policy)

    def config(self, value, policy: str) -> SimConfig:
        cfg = self.base.replace(policy=PolicySpec.parse(policy))
        L = cfg.num_threads
        if self.sweep == "rho":
            if not isinstance(cfg.service_model, Exponential):
                raise ConfigError(["sweep: load sweeps need an exponential service model"])
            cfg = cfg.replace(service_model=Exponential(cfg.arrival_rate / (L * value)))
        elif self.sweep == "k":
            cfg = cfg.replace(coding=CodingParams(L + value - 1, value))
        elif self.sweep == "m":
            cfg = cfg.replace(policy=PolicySpec("fixed_redundancy", int(value)))
        elif self.sweep is not None:
            raise ConfigError([f"sweep: unknown sweep variable {self.sweep!r}"])
        return cfg


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    delay_means: dict = field(default_factory=dict)
    """``(value, policy) -> per-replication mean delays``; replications share seeds across policies."""
    service_means: dict = field(default_factory=dict)

    def column(self, name, policy=None):
        return [row[name] for row in self.rows if policy is None or row["policy"] == policy]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(ROW_COLUMNS)
        for row in self.rows:
            writer.writerow([_cell(row[c]) for c in ROW_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.rows, indent=2)

    def to_table(self) -> str:
        cols = ("sweep", "value", "policy", "rho", "mean_delay_ms", "ci95_ms", "mean_service_ms", "oracle_ms")
        body = [[_short(row[c]) for c in cols] for row in self.rows]
        widths = [max(len(c), *(len(r[i]) for r in body)) if body else len(c) for i, c in enumerate(cols)]
        lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
        lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in body]
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json() + "\n"
        return self.to_table()


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def _short(value):
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def oracle_delay(cfg: SimConfig) -> float | None:
    """Closed-form mean delay where one applies: exponential service, greedy (any work-conserving policy when k=1)."""
    model = cfg.service_model
    if not isinstance(model, Exponential):
        return None
    k = cfg.coding.k
    if cfg.policy.name == "greedy" or (k == 1 and cfg.policy.name == "round_robin"):
        if k == 1:
            return mm1_mean_delay(cfg.arrival_rate, cfg.num_threads, model.rate)
        return merlang_mean_delay(cfg.arrival_rate, cfg.num_threads, model.rate, k)
    return None


def _check_stable(scenario: Scenario, value, policy: str, cfg: SimConfig):
    cap = capacity_boundary(cfg.num_threads, 1.0 / cfg.service_model.mean(), cfg.coding.k)
    if cfg.arrival_rate >= cap:
        raise Unstable(f"{scenario.name} {scenario.sweep}={value} policy={policy}: "
                       f"lambda={cfg.arrival_rate:.6g} >= L*mu/k={cap:.6g}")


def run_scenario(scenario: Scenario, replications: int | None = None, workers: int = 1) -> ResultTable:
    table = ResultTable()
    for value, policy, cfg in scenario.points():
        try:
            check_config(cfg)
        except ConfigError as exc:
            raise ConfigError([f"{scenario.name} {scenario.sweep}={value} policy={policy}: {e}"
                               for e in exc.errors]) from None
        _check_stable(scenario, value, policy, cfg)
        count = cfg.replications if replications is None else replications
        sets = replicate(cfg, count, workers=workers)
        delays = np.array([float(np.mean(s.delays)) for s in sets])
        services = np.array([float(np.mean(s.service_times)) for s in sets])
        mean = float(delays.mean())
        ci = replication_ci(delays)[1] if count >= 2 else None
        service = float(services.mean())
        oracle = oracle_delay(cfg) if scenario.oracles else None
        model = cfg.service_model
        table.rows.append({
            "scenario": scenario.name,
            "sweep": scenario.sweep or "",
            "value": value if value is not None else "",
            "policy": str(cfg.policy),
            "rho": cfg.arrival_rate * model.mean() / cfg.num_threads,
            "arrival_rate": float(cfg.arrival_rate),
            "service_mean_ms": float(model.mean()),
            "num_threads": cfg.num_threads,
            "n": cfg.coding.n,
            "k": cfg.coding.k,
            "replications": count,
            "num_arrivals": cfg.num_arrivals,
            "mean_delay_ms": mean,
            "ci95_ms": ci,
            "mean_service_ms": service,
            "queueing_ms": mean - service,
            "oracle_ms": oracle,
            "fingerprint": cfg.fingerprint(),
            "master_seed": cfg.master_seed,
        })
        table.delay_means[(value, policy)] = delays
        table.service_means[(value, policy)] = services
    return table


def run_tradeoff(scenario: Scenario, replications: int | None = None, workers: int = 1) -> ResultTable:
    """Fixed-redundancy sweep over ``m``: mean delay, service time and their difference per level."""
    if scenario.sweep != "m":
        raise ConfigError(["sweep: run_tradeoff needs an 'm' sweep"])
    k, n = scenario.base.coding.k, scenario.base.coding.n
    bad = [m for m in scenario.values if not k <= m <= n]
    if bad:
        raise ConfigError([f"sweep: m values {bad} outside [k, n] = [{k}, {n}]"])
    scenario = Scenario(scenario.name, scenario.base, "m", tuple(scenario.values), ("fixed_redundancy(m=0)",), False)
    return run_scenario(scenario, replications, workers)


@dataclass
class CcdfTable:
    k: int
    r_values: tuple
    t_grid: np.ndarray
    analytic: dict
    simulated: dict

    def sup_norm(self, r) -> float:
        return float(np.max(np.abs(np.asarray(self.analytic[r]) - np.asarray(self.simulated[r]))))

    def to_csv(self) -> str:
        lines = ["r,k,t_ms,analytic_ccdf,simulated_ccdf"]
        for r in self.r_values:
            for t, a, s in zip(self.t_grid, self.analytic[r], self.simulated[r]):
                lines.append(f"{r},{self.k},{float(t)!r},{float(a)!r},{float(s)!r}")
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        lines = ["     r  sup|analytic-simulated|"]
        lines += [f"{r:6d}  {self.sup_norm(r):.5f}" for r in self.r_values]
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return json.dumps({str(r): {"analytic": list(map(float, self.analytic[r])),
                                        "simulated": list(map(float, self.simulated[r])),
                                        "sup_norm": self.sup_norm(r)} for r in self.r_values}
                              | {"t_ms": list(map(float, self.t_grid)), "k": self.k}, indent=2) + "\n"
        return self.to_table()


def run_ccdf_unlimited(model: ServiceTimeModel, k: int, r_values, t_grid, replications: int = 100_000,
                       seed: int = DEFAULT_SEED) -> CcdfTable:
    """Service-time CCDF when ``r`` chunks are requested at once with threads to spare.

    Analytic values are the k-th order statistic of r draws; simulated
    values come from single-request replications with ``L = max(r)``.
    """
    r_values = tuple(int(r) for r in r_values)
    if any(r < k for r in r_values):
        raise ConfigError([f"r grid {r_values} must satisfy r >= k = {k}"])
    t_grid = np.asarray(t_grid, dtype=float)
    L = max(r_values)
    analytic, simulated = {}, {}
    for r in r_values:
        analytic[r] = np.array([float(order_statistic_ccdf(model, r, k, t)) for t in t_grid])
        cfg = SimConfig(1.0, L, CodingParams(L + k - 1, k), PolicySpec("fixed_redundancy", r), model, 1,
                        master_seed=seed)
        sets = replicate(cfg, replications, arrivals=[0.0])
        service = np.array([s.delays[0] for s in sets])
        simulated[r] = 1.0 - np.searchsorted(np.sort(service), t_grid, side="right") / service.size
    return CcdfTable(k, r_values, t_grid, analytic, simulated)


# --- presets ---------------------------------------------------------------

PRESETS = ("fig6", "fig7", "fig8", "fig9", "fig10")


def _base(k: int, policy="greedy", model=None, rate=BASE_RATE, seed=DEFAULT_SEED, crn=True, arrivals=BASE_ARRIVALS,
          replications=DEFAULT_REPLICATIONS) -> SimConfig:
    return SimConfig(
        arrival_rate=rate,
        num_threads=BASE_THREADS,
        coding=CodingParams(BASE_THREADS + k - 1, k),
        policy=PolicySpec.parse(policy),
        service_model=model or Exponential(rate / (BASE_THREADS * 0.5)),
        num_arrivals=arrivals,
        master_seed=seed,
        replications=replications,
        crn_mode=crn,
    )


def preset(name: str, seed: int = DEFAULT_SEED, replications: int | None = None,
           num_arrivals: int | None = None) -> Scenario:
    """Figure-style experiments. Policy comparisons use common random numbers."""
    reps = replications or DEFAULT_REPLICATIONS
    arrivals = num_arrivals or BASE_ARRIVALS
    rhos = tuple(round(0.1 * i, 1) for i in range(1, 10))
    if name == "fig6":
        return Scenario("fig6", _base(1, seed=seed, arrivals=arrivals, replications=reps), "rho", rhos,
                        ("greedy", "round_robin", "sharing"))
    if name == "fig7":
        return Scenario("fig7", _base(2, seed=seed, arrivals=arrivals, replications=reps), "rho",
                        (0.1, 0.2, 0.3, 0.4), ("greedy", "round_robin"))
    if name == "fig8":
        base = _base(1, model=Exponential(BASE_RATE / (BASE_THREADS * 0.1)), seed=seed, arrivals=arrivals,
                     replications=reps)
        return Scenario("fig8", base, "k", (1, 2, 3, 4), ("greedy", "round_robin"))
    if name == "fig9":
        k = 2
        rate = 0.05 * BASE_THREADS / S3_LIKE.mean()
        base = _base(k, model=S3_LIKE, rate=rate, seed=seed, arrivals=arrivals, replications=reps)
        return Scenario("fig9", base, "m", tuple(range(k, BASE_THREADS + k)), ("fixed_redundancy(m=0)",), False)
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


FIG10_R = (2, 3, 4, 8, 16)


def fig10_grid() -> np.ndarray:
    return np.linspace(100.0, 400.0, 61)


def run_preset(name: str, seed: int = DEFAULT_SEED, replications: int | None = None,
               num_arrivals: int | None = None, workers: int = 1):
    if name == "fig10":
        return run_ccdf_unlimited(S3_LIKE, 2, FIG10_R, fig10_grid(), replications or 100_000, seed)
    scenario = preset(name, seed, replications, num_arrivals)
    if scenario.sweep == "m":
        return run_tradeoff(scenario, workers=workers)
    return run_scenario(scenario, workers=workers)
