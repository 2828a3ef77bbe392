"""Invariant suites over policy runs and oracle outputs.

Used by the ``verify`` command and by the test suite: schedule validity for
every policy, special-copy structure of threshold-policy runs, allocation
conservation, oracle agreement and dominance, and the competitive bounds
of the threshold and anchor policies.
"""

from __future__ import annotations

from .allocation import classify_and_allocate
from .generators import gen_random
from .model import (
    KIND_REGULAR,
    SPECIAL_KINDS,
    TOL,
    Instance,
    compute_cost,
    competitive_bound,
    max_min_rate_ratio,
    validate_schedule,
)
from .offline import BudgetExceeded, DEFAULT_BUDGET, opt_full, opt_restricted, validate_offline_structure
from .policies import AnnotatedRun, simulate


def special_copy_problems(run: AnnotatedRun) -> list[str]:
    """Violations of the special-copy structure in a threshold-policy run.

    No two special intervals may overlap, no special interval may overlap a
    regular one, relocated copies live only at a minimum-rate server, and
    requests served from relocated copies exist only when some rate exceeds
    three times the cheapest.
    """
    inst = run.schedule.instance
    out: list[str] = []
    specials = [c for c in run.schedule.copies if c.kind in SPECIAL_KINDS]
    regulars = [c for c in run.schedule.copies if c.kind == KIND_REGULAR]
    for i, a in enumerate(specials):
        for b in specials[i + 1 :]:
            if a.start < b.end - TOL and b.start < a.end - TOL:
                out.append(f"special copies overlap: {a} and {b}")
        for b in regulars:
            if a.start < b.end - TOL and b.start < a.end - TOL:
                out.append(f"special copy overlaps a regular copy: {a} and {b}")
    min_rate = inst.rate(1)
    for c in specials:
        if c.kind == "relocated_special" and inst.rate(c.server) > min_rate + TOL:
            out.append(f"relocated copy at non-minimum-rate server {c.server}")
    if any(c.kind == "relocated_special" for c in run.schedule.copies) and max_min_rate_ratio(inst) <= 3.0 + TOL:
        out.append("relocated copy exists although no rate exceeds three times the cheapest")
    return out


def typing_problems(run: AnnotatedRun) -> list[str]:
    """Violations of the request-typing laws in a threshold-policy run."""
    inst = run.schedule.instance
    lam = inst.transfer_cost
    out: list[str] = []
    report = classify_and_allocate(run)
    spread = max_min_rate_ratio(inst)
    all_reqs = inst.all_requests
    prev_at: dict[int, float] = {inst.initial_server: 0.0}
    for req, typing, _alloc in report.entries:
        t_prev = prev_at.get(req.server)
        window = lam / inst.rate(req.server)
        if t_prev is not None:
            gap = req.time - t_prev
            if typing.category == 4 and gap > window + TOL:
                out.append(f"request {req.index} served from its own window after {gap:g} > {window:g}")
            if typing.category != 4 and gap <= window - TOL:
                out.append(f"request {req.index} not window-served although gap {gap:g} <= {window:g}")
        if typing.category in (2, 5):
            provider_rate = inst.rate(all_reqs[typing.provider].server)
            if provider_rate > 3.0 * inst.rate(1) + TOL:
                out.append(f"request {req.index} served from a retained copy at rate {provider_rate:g} over threshold")
        if typing.category in (3, 6) and spread <= 3.0 + TOL:
            out.append(f"request {req.index} is category {typing.category} although max/min rate ratio is {spread:g}")
        prev_at[req.server] = req.time
    return out


def verify_instance(
    instance: Instance,
    budget: int = DEFAULT_BUDGET,
    check_oracle: bool = True,
) -> list[str]:
    """Run every invariant suite against one instance; returns found problems."""
    problems: list[str] = []
    runs: dict[str, tuple] = {}
    for name in ("alg1", "wang", "simple"):
        run, cost = simulate(name, instance)
        runs[name] = (run, cost)
        for v in validate_schedule(run.schedule):
            problems.append(f"{name}: invalid schedule: {v.description}")

    alg1_run, alg1_cost = runs["alg1"]
    problems += [f"alg1: {p}" for p in special_copy_problems(alg1_run)]
    problems += [f"alg1: {p}" for p in typing_problems(alg1_run)]
    report = classify_and_allocate(alg1_run)
    gap = report.total_allocated - alg1_cost.total
    if abs(gap) > 1e-9:
        problems.append(f"alg1: allocation conservation broken by {gap:g}")

    if check_oracle:
        try:
            full = opt_full(instance, budget=budget)
            restricted = opt_restricted(instance, budget=budget)
        except BudgetExceeded as exc:
            problems.append(f"oracle skipped: {exc}")
            return problems
        if abs(full.opt_cost - restricted.opt_cost) > 1e-9:
            problems.append(
                f"restricted oracle {restricted.opt_cost!r} disagrees with full oracle {full.opt_cost!r}"
            )
        for label, sol in (("full", full), ("restricted", restricted)):
            for v in validate_schedule(sol.schedule):
                problems.append(f"{label} oracle: invalid schedule: {v.description}")
            for v in validate_offline_structure(sol.schedule):
                problems.append(f"{label} oracle: structure: {v.description}")
            if abs(compute_cost(sol.schedule).total - sol.opt_cost) > 1e-9:
                problems.append(f"{label} oracle: reconstructed schedule cost differs from optimum")
        for i in range(1, len(full.prefix_costs)):
            if full.prefix_costs[i] < full.prefix_costs[i - 1] - 1e-9:
                problems.append(f"prefix optimum decreases at request {i}")
        for name, (run, cost) in runs.items():
            if cost.total < full.opt_cost - 1e-9:
                problems.append(f"{name}: cost {cost.total:g} undercuts the optimum {full.opt_cost:g}")
        bound = competitive_bound(instance)
        if alg1_cost.total > bound * full.opt_cost + 1e-9:
            problems.append(
                f"alg1: cost {alg1_cost.total!r} exceeds {bound:g} x optimum {full.opt_cost!r}"
            )
        simple_cost = runs["simple"][1].total
        if instance.initial_server == 1 and simple_cost > 3.0 * full.opt_cost + 1e-9:
            problems.append(f"simple: cost {simple_cost!r} exceeds 3 x optimum {full.opt_cost!r}")
    return problems


def verify_random_batch(seed: int, count: int, n_max: int = 4, m_max: int = 12) -> list[str]:
    """Invariant suites over a batch of seeded random instances."""
    problems: list[str] = []
    for k in range(count):
        inst = gen_random(seed + k, n=1 + (seed + k) % n_max, m=1 + (seed + 7 * k) % m_max)
        found = verify_instance(inst)
        problems += [f"instance {k} (seed {seed + k}): {p}" for p in found]
    return problems
