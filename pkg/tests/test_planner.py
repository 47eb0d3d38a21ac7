import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multigrasp.audit import audit_scene, audit_solution
from multigrasp.errors import TooManyPermutations
from multigrasp.objects import sphere
from multigrasp.planner import (KEMetric, PlannerState, candidate_pool, kinematic_efficiency,
                                plan_greedy, plan_sequential, run_campaign)
from multigrasp.reachability import build_reachability_map
from multigrasp.synthesis import GraspSettings

FAST = GraspSettings(restarts=1)


@pytest.fixture(scope="module")
def plan(human, catalog):
    objs = [sphere("a", 12), sphere("boulder", 200), catalog["O6"], sphere("b", 10)]
    return plan_sequential(human, objs, mode="single", batch=3, settings=FAST, seed=3, grid=7,
                           choose="random", max_batches=1)


def test_failed_step_is_skipped_not_fatal(plan):
    assert plan.order == ("a", "boulder", "O6", "b")
    assert not plan.steps[1].success and "boulder" in plan.steps[1].reason
    assert plan.n_grasped >= 2
    assert len(plan.steps) == 4


def test_redundancy_shrinks_by_consumed_joints(human, plan):
    free = set(range(human.n_joints))
    for st_ in plan.steps:
        if not st_.success:
            continue
        sol = st_.solution
        assert set(sol.free) == free
        assert set(sol.consumed) <= free
        free -= set(sol.consumed)
    assert len(free) < human.n_joints


def test_used_opposition_spaces_are_not_reused(plan):
    used = [s.solution.os for s in plan.steps if s.success]
    assert len(used) == len(set(used))


def test_sequence_cost_sums_successful_capacities(plan):
    assert plan.sequence_cost == pytest.approx(sum(s.solution.cap_max for s in plan.steps if s.success))


def test_final_pose_is_jointly_clear(human, plan):
    worst = audit_scene(human, plan.final_configuration, plan.held)
    assert max(worst.values()) <= 1e-6
    for s in plan.steps:
        if s.success:
            rep = audit_solution(human, s.solution, grid=7)
            assert rep.passed(1e-6), (rep.violations, rep.notes)


def test_pinned_joints_keep_their_angles(human, plan):
    done = [s.solution for s in plan.steps if s.success]
    for k, sol in enumerate(done):
        for later in done[k + 1:]:
            np.testing.assert_array_equal(later.configuration[list(sol.consumed)],
                                          sol.configuration[list(sol.consumed)])


def test_metric_matches_solution(plan):
    for s in plan.steps:
        if s.success:
            m = s.metric
            assert m == kinematic_efficiency(s.solution)
            assert m.kappa == pytest.approx(s.solution.kappa, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(0, 20), st.floats(1, 10), st.integers(0, 2))
def test_kappa_strictly_increases_in_each_argument(n_c, n_q, eta, which):
    base = KEMetric(n_c, n_q, eta)
    bumped = [KEMetric(n_c + 1, n_q, eta), KEMetric(n_c, n_q + 1, eta),
              KEMetric(n_c, n_q, eta + 0.01)][which]
    assert bumped.kappa > base.kappa


def test_argument_checks(human, catalog):
    objs = [catalog["O1"]]
    with pytest.raises(ValueError):
        plan_sequential(human, objs, batch=0)
    with pytest.raises(ValueError):
        plan_sequential(human, objs, mode="fancy")
    with pytest.raises(ValueError):
        plan_sequential(human, objs, max_batches=0)
    with pytest.raises(ValueError):
        plan_sequential(human, objs + [catalog["O3"]], order=[0, 0])
    with pytest.raises(TooManyPermutations):
        plan_greedy(human, [catalog[f"O{k}"] for k in range(1, 8)])
    with pytest.raises(ValueError):
        run_campaign(human, objs, 0)
    with pytest.raises(ValueError):
        run_campaign(human, objs, 1, per_trial=3)


def test_failed_mini_batch_escalates_by_capacity(human, catalog):
    p = plan_sequential(human, [catalog["O8"]], mode="single", batch=1, settings=FAST, seed=0,
                        grid=7, max_batches=4)
    st_ = p.steps[0]
    rmap = build_reachability_map(human, None, 7)
    pool = candidate_pool(human, rmap, catalog["O8"], PlannerState(human.rest_configuration(),
                                                                   set(range(20))), 0.5)
    assert st_.candidates == tuple(os.links for os in pool[:len(st_.candidates)])
    assert 1 <= len(st_.candidates) <= 4
    if st_.success:
        assert st_.solution.os == st_.candidates[-1]
    else:
        assert len(st_.candidates) == 4
    once = plan_sequential(human, [catalog["O8"]], mode="single", batch=1, settings=FAST, seed=0,
                           grid=7, max_batches=1)
    assert once.steps[0].candidates == st_.candidates[:1]


def test_greedy_prefers_more_grasps_then_lower_cost(human):
    objs = [sphere("a", 12), sphere("big", 200)]
    best, plans = plan_greedy(human, objs, mode="single", batch=1, settings=FAST, seed=1, grid=5)
    assert len(plans) == 2
    key = [(-p.n_grasped, p.sequence_cost) for p in plans]
    assert (-best.n_grasped, best.sequence_cost) == min(key)
    assert best.n_grasped >= plans[0].n_grasped
    sub, only = plan_greedy(human, objs, mode="single", batch=1, settings=FAST, seed=1, grid=5,
                            orders=[(1, 0)])
    assert len(only) == 1 and sub.order == ("big", "a")


def test_campaign_is_reproducible(human, catalog):
    pool = [catalog[k] for k in ("O1", "O3", "O8", "O12")]
    a = run_campaign(human, pool, 2, "single", seed=9, per_trial=2, settings=FAST, grid=5)
    b = run_campaign(human, pool, 2, "single", seed=9, per_trial=2, settings=FAST, grid=5)
    assert a.rows == b.rows
    assert len(a.rows) == 4 and {r["step"] for r in a.rows} == {0, 1}
    summary = a.summary()
    assert [s["step"] for s in summary] == [1, 2]
    for s in range(2):
        assert 0.0 <= a.success_rate(s) <= 1.0
        mean, _ = a.mean_std(s, "eta")
        assert math.isnan(mean) or mean >= 1.0
