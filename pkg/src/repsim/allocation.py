"""Request typing and per-request cost allocation for threshold-policy runs.

Each served request is assigned one of six categories from how it was served
(transfer vs local copy) crossed with the kind of the providing copy (regular,
resident special, relocated special). The run's entire cost up to the final
request is then split across requests:

* the serving transfer goes to the request it serves,
* the relocation transfer behind a relocated copy goes to the request that
  copy serves,
* special-copy storage goes to the request the special copy serves,
* the holding window opened by a request goes to the next local request, and
* the windows left trailing after each server's last request (except the
  final request's server, whose trailing copies carry no horizon cost) are
  charged as surcharges to the first transfer-era request at each server.

The sum of all allocations equals the run's cost at the final-request horizon.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .model import (
    KIND_REGULAR,
    KIND_RELOCATED_SPECIAL,
    KIND_RESIDENT_SPECIAL,
    Request,
    compute_cost,
)
from .policies import MODE_LOCAL, MODE_TRANSFER, AnnotatedRun

_CATEGORY = {
    (MODE_TRANSFER, KIND_REGULAR): 1,
    (MODE_TRANSFER, KIND_RESIDENT_SPECIAL): 2,
    (MODE_TRANSFER, KIND_RELOCATED_SPECIAL): 3,
    (MODE_LOCAL, KIND_REGULAR): 4,
    (MODE_LOCAL, KIND_RESIDENT_SPECIAL): 5,
    (MODE_LOCAL, KIND_RELOCATED_SPECIAL): 6,
}


@dataclass(frozen=True)
class RequestTyping:
    index: int
    category: int  # 1..6
    provider: int  # index of the request whose retained copy served this one
    switch_time: float | None  # regular-to-special instant, categories 2/3/5/6
    served_by: str  # local | transfer


@dataclass(frozen=True)
class AllocationReport:
    entries: tuple[tuple[Request, RequestTyping, float], ...]
    excluded_cost: float
    first_request_surcharges: tuple[tuple[int, float], ...]  # (request index, amount)

    @property
    def total_allocated(self) -> float:
        return sum(a for _, _, a in self.entries) + sum(a for _, a in self.first_request_surcharges)

    def surcharge_of(self, index: int) -> float:
        for j, amount in self.first_request_surcharges:
            if j == index:
                return amount
        return 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["j", "type", "q", "t_prime", "allocated_cost", "surcharge"])
        for req, typing, alloc in self.entries:
            writer.writerow(
                [
                    req.index,
                    typing.category,
                    typing.provider,
                    "" if typing.switch_time is None else f"{typing.switch_time:.10g}",
                    f"{alloc:.10g}",
                    f"{self.surcharge_of(req.index):.10g}",
                ]
            )
        return buf.getvalue()


def classify_and_allocate(run: AnnotatedRun) -> AllocationReport:
    """Type every request of a threshold-policy run and split the run's cost.

    Only threshold-policy runs carry the copy-kind annotations the taxonomy
    needs; runs from other policies are rejected.
    """
    if run.policy_name != "alg1":
        raise ValueError(
            f"allocation needs copy-kind annotations from the threshold policy, got a {run.policy_name!r} run"
        )
    inst = run.schedule.instance
    lam = inst.transfer_cost
    horizon = inst.horizon
    all_reqs = inst.all_requests

    prev_same_server: dict[int, int | None] = {}
    last_seen: dict[int, int] = {}
    for req in all_reqs:
        prev_same_server[req.index] = last_seen.get(req.server)
        last_seen[req.server] = req.index

    entries: list[tuple[Request, RequestTyping, float]] = []
    for rec in run.serves:
        req = all_reqs[rec.index]
        category = _CATEGORY[(rec.mode, rec.copy_kind)]
        provider = rec.provider
        switch = rec.switch_time
        alloc = 0.0
        if category in (1, 2, 3):
            alloc += lam  # serving transfer
        if category in (3, 6):
            alloc += lam  # relocation transfer behind the providing copy
        if category in (2, 5):
            alloc += inst.rate(all_reqs[provider].server) * (rec.time - switch)
        elif category in (3, 6):
            alloc += inst.rate(1) * (rec.time - switch)
        p = prev_same_server[rec.index]
        if category == 4:
            alloc += inst.rate(rec.server) * (rec.time - all_reqs[p].time)
        elif p is not None:
            alloc += lam  # full window opened by the preceding local request
        typing = RequestTyping(rec.index, category, provider, switch, rec.mode)
        entries.append((req, typing, alloc))

    # Trailing windows after each server's last request, clipped at the
    # horizon, are charged to the first request at each server other than
    # the initial one. The final request's server self-pairs with the
    # initial server's trailing window.
    surcharges: list[tuple[int, float]] = []
    if inst.requests:
        last_req_server = inst.requests[-1].server
        requested = {r.server for r in inst.requests}
        first_at: dict[int, int] = {}
        for req in inst.requests:
            first_at.setdefault(req.server, req.index)

        def trailing_clipped(server: int) -> float:
            t_last = all_reqs[last_seen[server]].time
            end = min(t_last + lam / inst.rate(server), horizon)
            return inst.rate(server) * max(0.0, end - t_last)

        for server in sorted(requested - {inst.initial_server}):
            pool_server = server if server != last_req_server else inst.initial_server
            surcharges.append((first_at[server], trailing_clipped(pool_server)))

    excluded = sum(
        inst.rate(c.server) * (c.end - c.start)
        for c in run.schedule.copies
        if c.excluded and math.isfinite(c.end)
    )
    return AllocationReport(tuple(entries), excluded, tuple(surcharges))


def conservation_gap(run: AnnotatedRun) -> float:
    """Signed difference between allocated total and the run's horizon cost."""
    report = classify_and_allocate(run)
    return report.total_allocated - compute_cost(run.schedule, run.schedule.instance.horizon).total
