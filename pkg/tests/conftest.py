"""Shared helpers: reference scenarios and independent brute-force oracles."""

from __future__ import annotations

import math
from itertools import product

import repsim as R


def fig3_instance() -> R.Instance:
    """Four-server scenario exercising all six request categories.

    Rates 1/2/4/5 with unit transfer cost and the initial copy at server 1.
    The run serves r1 locally from a retained sole copy, r2..r4 by transfers
    from holding windows, r5 from a resident retained copy, r6 from a copy
    relocated to server 1, r7 locally at server 1 from the relocated copy,
    and r8 locally from its own window.
    """
    return R.Instance.build(
        [1.0, 2.0, 4.0, 5.0],
        1.0,
        1,
        [(1.5, 1), (2.2, 2), (2.3, 3), (2.4, 4), (3.5, 3), (4.5, 4), (5.5, 1), (6.2, 1)],
    )


def dumb_schedule_cost(schedule: R.ReplicationSchedule, horizon: float) -> float:
    """Straight re-summation of a schedule's cost, independent of compute_cost."""
    total = 0.0
    for c in schedule.copies:
        lo = max(0.0, c.start)
        hi = min(horizon, c.end)
        if hi > lo:
            total += schedule.instance.rate(c.server) * (hi - lo)
    for t in schedule.transfers:
        if t.time <= horizon + 1e-9:
            total += schedule.instance.transfer_cost
    return total


def brute_force_optimum(instance: R.Instance) -> float:
    """Exhaustive minimum over all piecewise-constant holder sequences.

    Enumerates every assignment of a nonempty holder subset to each
    between-request gap, charging gap storage, a transfer when the requester
    holds nothing, and a transfer per extra created copy. Independent of the
    DP implementation; only usable for tiny instances.
    """
    n = instance.n
    lam = instance.transfer_cost
    subsets = [frozenset(i + 1 for i in range(n) if mask >> i & 1) for mask in range(1, 2**n)]
    events = [(0.0, instance.initial_server)] + [(r.time, r.server) for r in instance.requests]
    best = math.inf
    for seq in product(subsets, repeat=len(events)):
        cost = 0.0
        prev_holders = frozenset({instance.initial_server})
        prev_t = 0.0
        for (t, server), holders in zip(events, seq):
            cost += sum(instance.rate(x) for x in prev_holders) * (t - prev_t)
            if server not in prev_holders:
                cost += lam
            cost += lam * len(holders - (prev_holders | {server}))
            prev_holders = holders
            prev_t = t
            if cost >= best:
                break
        best = min(best, cost)
    return best
