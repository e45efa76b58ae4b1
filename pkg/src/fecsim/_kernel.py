"""Compiled event loop used for large sweeps.

It implements exactly the event order and policies of the reference
:class:`fecsim.engine.Simulator`; the test suite checks the two for
bit-identical output. Instead of an event heap it scans the L thread slots
for the earliest finish, which also yields the tie rules (completions before
arrivals, lower thread id first) without extra bookkeeping.
"""
import numpy as np
from numba import njit

OK, OUT_OF_SAMPLES, STALLED = 0, 1, 2


@njit(cache=True)
def _find(parent, i):
    # smallest undeparted request id >= i
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def run_kernel(arrivals, durations, crn_width, num_threads, k, policy_code, limit, detect_cap):
    n_req = arrivals.shape[0]
    L = num_threads
    busy = np.full(L, -1, dtype=np.int64)
    finish = np.zeros(L)
    departure = np.full(n_req, np.nan)
    first_start = np.full(n_req, np.nan)
    started = np.zeros(n_req, dtype=np.int64)
    done = np.zeros(n_req, dtype=np.int64)
    terminated = np.zeros(n_req, dtype=np.int64)
    queue = np.zeros(n_req, dtype=np.int64)
    departed = np.zeros(n_req, dtype=np.bool_)
    parent = np.arange(n_req + 1)

    intervals = np.zeros((64, 2))
    n_intervals = 0
    open_since = -1.0
    violating = False

    arrived = 0
    n_active = 0
    idle = L
    absorbable = 0
    fifo_ptr = 0
    cursor = 0
    draw = 0
    clock = 0.0
    status = OK

    while True:
        tc = np.inf
        th = -1
        for t in range(L):
            if busy[t] >= 0 and finish[t] < tc:
                tc = finish[t]
                th = t
        ta = arrivals[arrived] if arrived < n_req else np.inf
        if th < 0 and arrived >= n_req:
            if n_active > 0:
                status = STALLED
            break

        if th >= 0 and tc <= ta:
            clock = tc
            r = busy[th]
            busy[th] = -1
            idle += 1
            done[r] += 1
            if done[r] == k:
                departure[r] = clock
                departed[r] = True
                for t in range(L):
                    if busy[t] == r:
                        busy[t] = -1
                        idle += 1
                        terminated[r] += 1
                parent[r] = r + 1
                n_active -= 1
                if detect_cap < 0 or started[r] < detect_cap:
                    absorbable -= 1
        else:
            clock = ta
            queue[arrived] = n_active
            arrived += 1
            n_active += 1
            absorbable += 1

        if idle > 0 and n_active > 0:
            for t in range(L):
                if busy[t] >= 0:
                    continue
                r = -1
                if policy_code == 0:
                    while fifo_ptr < arrived and (departed[fifo_ptr] or (limit >= 0 and started[fifo_ptr] >= limit)):
                        fifo_ptr += 1
                    if fifo_ptr < arrived:
                        r = fifo_ptr
                else:
                    c = _find(parent, cursor)
                    if c >= arrived:
                        c = _find(parent, 0)
                    for _ in range(n_active):
                        if limit < 0 or started[c] < limit:
                            r = c
                            cursor = c + 1
                            break
                        c = _find(parent, c + 1)
                        if c >= arrived:
                            c = _find(parent, 0)
                if r < 0:
                    break
                if crn_width > 0:
                    if started[r] >= crn_width:
                        status = OUT_OF_SAMPLES
                        break
                    d = durations[r * crn_width + started[r]]
                else:
                    if draw >= durations.shape[0]:
                        status = OUT_OF_SAMPLES
                        break
                    d = durations[draw]
                    draw += 1
                if started[r] == 0:
                    first_start[r] = clock
                started[r] += 1
                if detect_cap >= 0 and started[r] == detect_cap:
                    absorbable -= 1
                busy[t] = r
                finish[t] = clock + d
                idle -= 1
            if status != OK:
                break

        now_violating = idle > 0 and absorbable > 0
        if now_violating and not violating:
            open_since = clock
        elif violating and not now_violating and clock > open_since:
            if n_intervals == intervals.shape[0]:
                grown = np.zeros((2 * n_intervals, 2))
                grown[:n_intervals] = intervals
                intervals = grown
            intervals[n_intervals, 0] = open_since
            intervals[n_intervals, 1] = clock
            n_intervals += 1
        violating = now_violating

    return departure, first_start, started, terminated, queue, intervals[:n_intervals].copy(), status
