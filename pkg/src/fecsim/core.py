"""Domain types shared by the simulator, policies and reports.

Time is real-valued milliseconds throughout; rates are per millisecond.
"""
from __future__ import annotations

import configparser
import dataclasses
import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .servicemodels import (
    ModelError,
    ServiceTimeModel,
    format_model,
    parse_call,
    parse_model,
)

POLICY_NAMES = ("greedy", "sharing", "round_robin", "fixed_redundancy")


class ConfigError(ValueError):
    """Raised with every violated invariant, one ``path: message`` per entry."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class CodingParams:
    n: int
    k: int


@dataclass(frozen=True)
class PolicySpec:
    name: str
    m: int | None = None

    def __str__(self):
        if self.name == "fixed_redundancy":
            return f"fixed_redundancy(m={self.m})"
        return self.name

    @classmethod
    def parse(cls, text: str) -> "PolicySpec":
        name, args = parse_call(text)
        if name not in POLICY_NAMES:
            raise ConfigError([f"policy: unknown policy {name!r}"])
        if name == "fixed_redundancy":
            if "m" not in args:
                raise ConfigError(["policy: fixed_redundancy needs m=INT"])
            return cls(name, int(args["m"]))
        if args:
            raise ConfigError([f"policy: {name} takes no parameters"])
        return cls(name)


@dataclass(frozen=True)
class SimConfig:
    arrival_rate: float
    num_threads: int
    coding: CodingParams
    policy: PolicySpec
    service_model: ServiceTimeModel
    num_arrivals: int
    master_seed: int = 0
    replications: int = 1
    warmup_discard: int = 0
    strict_chunk_limit: bool = True
    crn_mode: bool = False

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    @property
    def attempt_cap(self) -> int | None:
        """Maximum distinct chunks per request, or ``None`` when unlimited."""
        return self.coding.n if self.strict_chunk_limit else None

    @property
    def max_attempts(self) -> int:
        # started = completed (<= k-1 while undeparted) + in flight (<= L)
        bound = self.num_threads + self.coding.k - 1
        if self.strict_chunk_limit:
            bound = min(bound, self.coding.n)
        if self.policy.name == "fixed_redundancy":
            bound = min(bound, self.policy.m)
        elif self.policy.name == "sharing":
            bound = min(bound, self.coding.k)
        return bound

    @property
    def model_extension(self) -> bool:
        return (not self.strict_chunk_limit) and self.coding.n < self.num_threads + self.coding.k - 1

    def to_text(self) -> str:
        return "".join(f"{key} = {value}\n" for key, value in _config_items(self))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:12]


def _config_items(cfg: SimConfig):
    return [
        ("arrival_rate", repr(float(cfg.arrival_rate))),
        ("num_threads", cfg.num_threads),
        ("n", cfg.coding.n),
        ("k", cfg.coding.k),
        ("policy", str(cfg.policy)),
        ("service", format_model(cfg.service_model)),
        ("num_arrivals", cfg.num_arrivals),
        ("master_seed", cfg.master_seed),
        ("replications", cfg.replications),
        ("warmup_discard", cfg.warmup_discard),
        ("strict_chunk_limit", str(cfg.strict_chunk_limit).lower()),
        ("crn_mode", str(cfg.crn_mode).lower()),
    ]


CONFIG_FIELDS = (
    "arrival_rate", "num_threads", "n", "k", "policy", "service", "num_arrivals",
    "master_seed", "replications", "warmup_discard", "strict_chunk_limit", "crn_mode",
)
_REQUIRED = ("arrival_rate", "num_threads", "n", "k", "policy", "service", "num_arrivals")


def config_from_text(text: str) -> SimConfig:
    """Parse the flat ``key = value`` format written by :meth:`SimConfig.to_text`.

    Blank lines and ``#`` comments are ignored. Unknown keys are errors.
    """
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",))
    parser.read_string("[sim]\n" + text)
    raw = dict(parser["sim"])
    known = set(CONFIG_FIELDS)
    errors = [f"{key}: unknown field" for key in raw if key not in known]
    errors += [f"{key}: missing" for key in _REQUIRED if key not in raw]
    if errors:
        raise ConfigError(errors)
    section = parser["sim"]
    try:
        return SimConfig(
            arrival_rate=section.getfloat("arrival_rate"),
            num_threads=section.getint("num_threads"),
            coding=CodingParams(n=section.getint("n"), k=section.getint("k")),
            policy=PolicySpec.parse(raw["policy"]),
            service_model=parse_model(raw["service"]),
            num_arrivals=section.getint("num_arrivals"),
            master_seed=section.getint("master_seed", 0),
            replications=section.getint("replications", 1),
            warmup_discard=section.getint("warmup_discard", 0),
            strict_chunk_limit=section.getboolean("strict_chunk_limit", True),
            crn_mode=section.getboolean("crn_mode", False),
        )
    except ConfigError:
        raise
    except (ValueError, ModelError) as exc:
        raise ConfigError([str(exc)]) from None


def load_config(path) -> SimConfig:
    return config_from_text(Path(path).read_text(encoding="utf-8"))


def save_config(cfg: SimConfig, path) -> None:
    Path(path).write_text(cfg.to_text(), encoding="utf-8")


def validate_config(cfg: SimConfig) -> list[str]:
    """Every violated invariant of ``cfg``; an empty list means the config is usable."""
    errors = []
    n, k, L = cfg.coding.n, cfg.coding.k, cfg.num_threads
    if k < 1:
        errors.append("coding.k: k >= 1 violated")
    if n < k:
        errors.append("coding.n: k <= n violated")
    if L < 1:
        errors.append("num_threads: L >= 1 violated")
    if not cfg.arrival_rate > 0:
        errors.append("arrival_rate: must be > 0")
    if cfg.num_arrivals < 1:
        errors.append("num_arrivals: must be >= 1")
    if cfg.replications < 1:
        errors.append("replications: must be >= 1")
    if not 0 <= cfg.warmup_discard < max(cfg.num_arrivals, 1):
        errors.append("warmup_discard: 0 <= warmup_discard < num_arrivals violated")
    if not 0 <= cfg.master_seed < 2**64:
        errors.append("master_seed: must be a 64-bit unsigned integer")
    if cfg.strict_chunk_limit and k >= 1 and L >= 1 and n < L + k - 1:
        errors.append(f"coding.n: n < L+k-1 = {L + k - 1} under strict_chunk_limit")
    if cfg.policy.name not in POLICY_NAMES:
        errors.append(f"policy: unknown policy {cfg.policy.name!r}")
    if cfg.policy.name == "fixed_redundancy":
        m = cfg.policy.m
        if m is None or m < k:
            errors.append("policy.m: k <= m violated")
        elif cfg.strict_chunk_limit and m > n:
            errors.append("policy.m: m <= n violated")
    return errors


def check_config(cfg: SimConfig) -> SimConfig:
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


# --- per-request bookkeeping ---------------------------------------------


class Outcome(enum.Enum):
    IN_FLIGHT = "in_flight"
    COMPLETED = "completed"
    TERMINATED = "terminated"


@dataclass
class ChunkAttempt:
    thread_id: int
    start_time: float
    duration: float
    outcome: Outcome = Outcome.IN_FLIGHT
    end_time: float | None = None

    @property
    def finish_time(self) -> float:
        return self.start_time + self.duration


@dataclass
class Request:
    id: int
    arrival_time: float
    attempts: list[ChunkAttempt] = field(default_factory=list)
    chunks_done: int = 0
    departure_time: float | None = None

    @property
    def departed(self) -> bool:
        return self.departure_time is not None

    @property
    def delay(self) -> float:
        return self.departure_time - self.arrival_time


class EventKind(enum.IntEnum):
    # lower value is processed first at equal time
    CHUNK_COMPLETE = 0
    ARRIVAL = 1


@dataclass(frozen=True, order=True)
class Event:
    """Events sort by time, then kind, then thread id, then insertion counter."""

    time: float
    kind: EventKind
    thread_id: int
    seq: int
    request_id: int = field(compare=False)
    attempt_index: int = field(default=-1, compare=False)
