"""Offline oracle: exactness, restricted-mode agreement, structural validators."""

from __future__ import annotations

import math

import pytest

import repsim as R
from conftest import brute_force_optimum

TOL = 1e-9


def test_single_server_forced_hold():
    inst = R.Instance.build([2.0], 1.0, 1, [(7.0, 1)])
    sol = R.opt_full(inst)
    assert abs(sol.opt_cost - 14.0) <= TOL
    assert R.validate_schedule(sol.schedule) == []


def test_two_server_relocation_beats_holding():
    inst = R.Instance.build([1.0, 10.0], 1.0, 2, [(10.0, 2)])
    # hand enumeration of the four candidate strategies
    stay = 10.0 * 10.0
    relocate_and_back = 1.0 + 10.0 * 1.0 + 1.0
    hold_both = 1.0 + (1.0 + 10.0) * 10.0
    stay_then_drop = 10.0 * 10.0 + 1.0
    assert min(stay, relocate_and_back, hold_both, stay_then_drop) == 12.0
    sol = R.opt_full(inst)
    assert abs(sol.opt_cost - 12.0) <= TOL


def test_tight1_optimum():
    res = R.gen_tight(1, mu2=1.5, lam=1.0, epsilon=0.01)
    sol = R.opt_full(res.instance)
    assert abs(sol.opt_cost - 2.01) <= TOL


def test_fig1_optimum_matches_closed_form():
    res = R.gen_fig1(5, 1.0, 0.5, 0.1)
    assert abs(res.optimal_cost - 5.6) <= TOL
    for solver in (R.opt_full, R.opt_restricted):
        sol = solver(res.instance)
        assert abs(sol.opt_cost - 5.6) <= TOL


def test_restricted_agrees_on_tight_instances():
    cases = [
        R.gen_tight(1, mu2=1.5, lam=1.0, epsilon=0.01),
        R.gen_tight(2, mu2=2.5, lam=1.0, epsilon=0.01, tau=7.0),
        R.gen_tight(3, mu2=4.0, lam=1.0, epsilon=0.001),
    ]
    for res in cases:
        full = R.opt_full(res.instance)
        restr = R.opt_restricted(res.instance)
        assert abs(full.opt_cost - restr.opt_cost) <= TOL
        assert abs(full.opt_cost - res.optimal_cost) <= TOL


def test_restricted_covers_early_prepositioning():
    # moving the copy to a cheaper server with an upcoming request at the
    # PREVIOUS request time beats holding the pricier server and transferring
    # later; a creation rule limited to the requester and server 1 misses it
    inst = R.Instance.build(
        [2.6723072151689973, 3.4620551299581575, 3.4804786660667517],
        0.6575353430972521,
        1,
        [
            (2.1357214913372466, 2),
            (2.7644265395465215, 1),
            (4.613050365635373, 1),
            (4.944585444622687, 1),
            (4.947219803354159, 2),
            (5.480305040663669, 3),
            (5.638978423081516, 3),
            (5.798704892323098, 3),
            (6.467893702606862, 3),
            (6.934264237387971, 3),
            (7.229986180492304, 2),
        ],
    )
    full = R.opt_full(inst)
    restr = R.opt_restricted(inst)
    assert abs(full.opt_cost - restr.opt_cost) <= 1e-9
    # the winning schedule really does move the object to server 2 early
    assert any(t.dst == 2 and abs(t.time - 6.934264237387971) <= 1e-9 for t in full.schedule.transfers)


def test_oracle_matches_brute_force():
    for k in range(30):
        inst = R.gen_random(seed=2000 + k, n=1 + k % 3, m=k % 5)
        want = brute_force_optimum(inst)
        got = R.opt_full(inst).opt_cost
        assert abs(got - want) <= 1e-9, (k, got, want)


def test_restricted_equals_full_on_random_instances():
    for k in range(120):
        inst = R.gen_random(seed=100 + k, n=1 + k % 4, m=k % 13)
        full = R.opt_full(inst)
        restr = R.opt_restricted(inst)
        assert abs(full.opt_cost - restr.opt_cost) <= 1e-9, k
        for sol in (full, restr):
            assert R.validate_schedule(sol.schedule) == []
            assert R.validate_offline_structure(sol.schedule) == []
            assert abs(R.compute_cost(sol.schedule).total - sol.opt_cost) <= 1e-9


def test_oracle_dominates_every_policy():
    for k in range(60):
        inst = R.gen_random(seed=4000 + k, n=1 + k % 4, m=k % 12)
        opt = R.opt_full(inst, reconstruct=False).opt_cost
        for name in ("alg1", "wang", "simple"):
            _, cost = R.simulate(name, inst)
            assert cost.total >= opt - 1e-9, (k, name)


def test_prefix_costs_nondecreasing():
    inst = R.gen_random(seed=77, n=4, m=20)
    sol = R.opt_full(inst, reconstruct=False)
    assert len(sol.prefix_costs) == inst.m + 1
    assert sol.prefix_costs[0] == 0.0
    for a, b in zip(sol.prefix_costs, sol.prefix_costs[1:]):
        assert b >= a - 1e-9


def test_budget_refusal_names_the_bound():
    inst = R.gen_random(seed=1, n=12, m=400, rate_range=(1.0, 2.0))
    with pytest.raises(R.BudgetExceeded) as err:
        R.opt_full(inst, budget=5_000_000_000)
    assert "budget" in str(err.value)
    assert "5e+09" in str(err.value)
    with pytest.raises(R.BudgetExceeded):
        R.opt_restricted(inst, budget=1000)
    with pytest.raises(R.BudgetExceeded) as err13:
        R.opt_full(R.gen_random(seed=1, n=13, m=1))
    assert "12" in str(err13.value)


def test_reconstruction_is_deterministic():
    inst = R.gen_random(seed=8, n=3, m=10, rate_range=(1.0, 1.0))  # equal rates force ties
    a = R.opt_full(inst)
    b = R.opt_full(inst)
    assert a.schedule == b.schedule
    assert a.opt_cost == b.opt_cost


def test_structure_validator_flags_offschedule_transfer():
    inst = R.Instance.build([1.0, 1.0], 1.0, 1, [(4.0, 2)])
    sched = R.ReplicationSchedule(
        inst,
        (R.CopyInterval(1, 0.0, 4.0, "offline"), R.CopyInterval(2, 2.0, 4.0, "offline")),
        (R.Transfer(2.0, 1, 2, "create_copy"),),
    )
    violations = R.validate_offline_structure(sched)
    assert len(violations) == 1
    assert "coincides with no request" in violations[0].description


def test_structure_validator_flags_transfer_served_close_pair():
    # gap * rate < transfer cost, yet the server does not hold through the gap
    inst = R.Instance.build([1.0, 2.0], 1.0, 1, [(1.0, 2), (1.2, 2)])
    sched = R.ReplicationSchedule(
        inst,
        (
            R.CopyInterval(1, 0.0, 1.2, "offline"),
            R.CopyInterval(2, 1.0, 1.0, "offline"),
            R.CopyInterval(2, 1.2, 1.2, "offline"),
        ),
        (R.Transfer(1.0, 1, 2), R.Transfer(1.2, 1, 2)),
    )
    violations = R.validate_offline_structure(sched)
    assert len(violations) == 1
    assert "does not hold a copy through" in violations[0].description


def test_zero_request_instance():
    inst = R.Instance.build([1.0, 2.0], 1.0, 2, [])
    sol = R.opt_full(inst)
    assert sol.opt_cost == 0.0
    assert R.validate_schedule(sol.schedule) == []


def test_reconstruction_when_initial_copy_dropped_at_time_zero():
    # relocating away from the initial server immediately is optimal here;
    # the momentary initial copy must still appear in the schedule
    inst = R.Instance.build([1.0, 10.0], 1.0, 2, [(10.0, 1)])
    sol = R.opt_full(inst)
    assert abs(sol.opt_cost - (1.0 + 10.0)) <= TOL
    assert R.validate_schedule(sol.schedule) == []
    initial = [c for c in sol.schedule.copies if c.server == 2]
    assert initial == [R.CopyInterval(2, 0.0, 0.0, "offline")]


def test_oracles_valid_across_initial_servers():
    for k in range(120):
        n = 2 + k % 4
        inst = R.gen_random(seed=880_000 + k, n=n, m=1 + k % 10, initial_server=1 + k % n)
        full = R.opt_full(inst)
        restr = R.opt_restricted(inst)
        assert abs(full.opt_cost - restr.opt_cost) <= 1e-9, k
        for sol in (full, restr):
            assert abs(R.compute_cost(sol.schedule).total - sol.opt_cost) <= 1e-9, k
            assert R.validate_schedule(sol.schedule) == [], k
            assert R.validate_offline_structure(sol.schedule) == [], k
