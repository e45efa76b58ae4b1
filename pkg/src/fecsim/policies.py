"""Thread-allocation rules.

A policy sees a :class:`Snapshot` of the undeparted requests and the list of
idle threads, and answers with an :class:`AssignmentDecision`. Each
assignment starts one attempt at a fresh distinct chunk of the target
request. The engine checks the answer; policies never touch engine state.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import PolicySpec, SimConfig

# kernel codes, see _kernel.py
FIFO_FILL, ROUND_ROBIN = 0, 1


@dataclass(frozen=True)
class Snapshot:
    active: Sequence[int]
    """Undeparted request ids in arrival order."""
    started: Mapping[int, int]
    """Attempts started so far per active request."""
    k: int
    cap: int | None = None
    """Distinct-chunk limit per request (``None`` = unlimited)."""


@dataclass
class AssignmentDecision:
    assignments: list[tuple[int, int]] = field(default_factory=list)
    idle: list[int] = field(default_factory=list)

    def targets(self) -> list[int]:
        return [req for _, req in self.assignments]


def _room(snapshot: Snapshot, req: int, extra: int, limit: int | None) -> bool:
    return limit is None or snapshot.started.get(req, 0) + extra < limit


def _min_cap(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _fifo_fill(snapshot: Snapshot, idle_threads, limit: int | None) -> AssignmentDecision:
    # earliest request with room gets threads until it reaches `limit`
    decision = AssignmentDecision()
    extra: dict[int, int] = {}
    queue = iter(snapshot.active)
    req = next(queue, None)
    for thread in idle_threads:
        while req is not None and not _room(snapshot, req, extra.get(req, 0), limit):
            req = next(queue, None)
        if req is None:
            decision.idle.append(thread)
            continue
        decision.assignments.append((thread, req))
        extra[req] = extra.get(req, 0) + 1
    return decision


class Policy:
    name = "policy"
    work_conserving = True

    def assign(self, snapshot: Snapshot, idle_threads: Sequence[int]) -> AssignmentDecision:
        raise NotImplementedError

    def reset(self) -> None:
        pass

    def __repr__(self):
        return f"{type(self).__name__}()"


class Greedy(Policy):
    """Every idle thread goes to the head-of-line request.

    Threads spill to the next request only when the head cannot take
    another distinct chunk.
    """

    name = "greedy"

    def assign(self, snapshot, idle_threads):
        return _fifo_fill(snapshot, idle_threads, snapshot.cap)


class FixedRedundancy(Policy):
    """FIFO; each request receives threads until ``m`` chunks were requested in total."""

    name = "fixed_redundancy"
    work_conserving = False

    def __init__(self, m: int):
        self.m = int(m)

    def limit(self, snapshot: Snapshot) -> int | None:
        return _min_cap(self.m, snapshot.cap)

    def assign(self, snapshot, idle_threads):
        return _fifo_fill(snapshot, idle_threads, self.limit(snapshot))

    def __repr__(self):
        return f"FixedRedundancy(m={self.m})"


class Sharing(FixedRedundancy):
    """Exactly ``k`` chunk requests per file, served first come first served."""

    name = "sharing"

    def __init__(self):
        super().__init__(m=0)

    def limit(self, snapshot):
        return _min_cap(snapshot.k, snapshot.cap)

    def __repr__(self):
        return "Sharing()"


class RoundRobin(Policy):
    """Idle threads cycle over the undeparted requests.

    The cursor holds the id of the next request in line and persists between
    calls, so consecutive invocations keep rotating instead of restarting at
    the head of the queue.
    """

    name = "round_robin"

    def __init__(self):
        self.cursor = 0

    def reset(self):
        self.cursor = 0

    def assign(self, snapshot, idle_threads):
        decision = AssignmentDecision()
        active = list(snapshot.active)
        extra: dict[int, int] = {}
        threads = list(idle_threads)
        if not active:
            decision.idle = threads
            return decision
        pos = bisect.bisect_left(active, self.cursor)
        for i, thread in enumerate(threads):
            for _ in range(len(active)):
                if pos == len(active):
                    pos = 0
                req = active[pos]
                pos += 1
                if _room(snapshot, req, extra.get(req, 0), snapshot.cap):
                    decision.assignments.append((thread, req))
                    extra[req] = extra.get(req, 0) + 1
                    self.cursor = req + 1
                    break
            else:
                decision.idle.extend(threads[i:])
                break
        return decision


def make_policy(spec: PolicySpec | str) -> Policy:
    if isinstance(spec, str):
        spec = PolicySpec.parse(spec)
    if spec.name == "greedy":
        return Greedy()
    if spec.name == "sharing":
        return Sharing()
    if spec.name == "round_robin":
        return RoundRobin()
    if spec.name == "fixed_redundancy":
        return FixedRedundancy(spec.m)
    raise ValueError(f"unknown policy {spec.name!r}")


def kernel_policy(cfg: SimConfig) -> tuple[int, int]:
    """``(code, per-request limit)`` for the compiled engine; ``-1`` means unlimited."""
    cap = cfg.attempt_cap
    name = cfg.policy.name
    if name in ("greedy", "round_robin"):
        code = FIFO_FILL if name == "greedy" else ROUND_ROBIN
        return code, -1 if cap is None else cap
    m = cfg.coding.k if name == "sharing" else cfg.policy.m
    return FIFO_FILL, _min_cap(m, cap)
