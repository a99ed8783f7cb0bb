from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import SIDE_EFFECT_TASKS
from oracles import all_hand_empty_states, build_env, random_small_env, region, task_predicate

from antiplan.anticipatory import ExactEstimator, exact_anticipatory_cost
from antiplan.ap_search import (
    alternate_goal_states,
    anticipatory_plan,
    expected_total,
    manipulated_objects,
    myopic_plan,
    prepare,
    prepare_trace,
    zero_estimator,
)
from antiplan.blockworld import TaskSpec, sample_task, validate_state
from antiplan.planner import Unsolvable, solve_task


def three_slot_target():
    """A sits in blue; red has three empty slots, so ``A:red`` can end in any of them."""
    regions = [region("red", "red", 2.0, 5.0, 3), region("blue", "blue", 7.0, 5.0, 2)]
    return build_env(regions, {"A": "red", "B": "blue"}, {"A": "blue_s0", "B": "blue_s1"}, "blue",
                     ["A:red", "B:red"])


def single_slot_target():
    regions = [region("red", "red", 2.0, 5.0, 1), region("blue", "blue", 7.0, 5.0, 3)]
    return build_env(regions, {"A": "red"}, {"A": "blue_s0"}, "blue", ["A:red"])


# ---------------------------------------------------------------------------
# Candidate goal states
# ---------------------------------------------------------------------------


def test_candidates_hand_enumerated():
    env = three_slot_target()
    task = TaskSpec.parse("A:red")
    plan = solve_task(env, env.initial_state, task).plan
    assert manipulated_objects(plan) == ["A"]
    cands = alternate_goal_states(env, env.initial_state, task, plan)
    # A into red_s0, red_s1 or red_s2; B untouched
    assert sorted(c.slot_of("A") for c in cands) == ["red_s0", "red_s1", "red_s2"]
    assert all(c.slot_of("B") == "blue_s1" for c in cands)
    assert len(set(c.placements for c in cands)) == len(cands)


def test_plan_goal_comes_first():
    env = three_slot_target()
    task = TaskSpec.parse("A:red")
    sol = solve_task(env, env.initial_state, task)
    cands = alternate_goal_states(env, env.initial_state, task, sol.plan)
    assert cands[0] == sol.final_state


def test_forced_placement_gives_one_candidate():
    env = single_slot_target()
    task = TaskSpec.parse("A:red")
    plan = solve_task(env, env.initial_state, task).plan
    assert len(alternate_goal_states(env, env.initial_state, task, plan)) == 1


def test_satisfied_task_has_only_the_start_state(side_env):
    task = TaskSpec.parse("B:yellow")
    plan = solve_task(side_env, side_env.initial_state, task).plan
    assert alternate_goal_states(side_env, side_env.initial_state, task, plan) == [side_env.initial_state]


@pytest.mark.parametrize("cap", [1, 2, 5])
def test_candidate_cap(side_env, cap):
    task = TaskSpec.parse("A:red")
    plan = solve_task(side_env, side_env.initial_state, task).plan
    assert len(alternate_goal_states(side_env, side_env.initial_state, task, plan, cap)) <= cap


def test_every_candidate_satisfies_task(generated_env):
    env = generated_env
    for task in env.task_distribution.tasks[:6]:
        plan = solve_task(env, env.initial_state, task).plan
        cands = alternate_goal_states(env, env.initial_state, task, plan)
        assert 1 <= len(cands) <= 64
        moved = set(manipulated_objects(plan))
        for c in cands:
            validate_state(env, c)
            assert task_predicate(env, c, task)
            for o, s in env.initial_state.placements:
                if o not in moved:
                    assert c.slot_of(o) == s


# ---------------------------------------------------------------------------
# Anticipatory goal selection
# ---------------------------------------------------------------------------


def test_zero_estimator_reduces_to_myopic(side_env):
    for task in SIDE_EFFECT_TASKS:
        ap = anticipatory_plan(side_env, side_env.initial_state, task, zero_estimator)
        my = myopic_plan(side_env, side_env.initial_state, task)
        assert ap.state == my.state
        assert ap.plan.actions == my.plan.actions
        assert ap.immediate == my.immediate and ap.future == 0.0


def test_total_is_immediate_plus_future(side_env):
    r = anticipatory_plan(side_env, side_env.initial_state, SIDE_EFFECT_TASKS[0], ExactEstimator(side_env))
    assert r.total == r.immediate + r.future
    assert r.future == pytest.approx(exact_anticipatory_cost(side_env, r.state))
    assert r.to_dict()["total_cost"] == r.total


def test_fixture_parks_white_block_in_white_region(side_env):
    env = side_env
    est = ExactEstimator(env)
    my = myopic_plan(env, env.initial_state, SIDE_EFFECT_TASKS[0])
    ap = anticipatory_plan(env, env.initial_state, SIDE_EFFECT_TASKS[0], est)
    assert my.state.slot_of("F") == "blue_s0"
    assert ap.state.slot_of("F") == "white_s0"
    # a little more now, less later
    assert ap.immediate > my.immediate
    assert expected_total(env, env.initial_state, ap) < my.immediate + est(my.state)


def _chain(env, tasks, step):
    s, total = env.initial_state, 0.0
    for t in tasks:
        r = step(s, t)
        total += r.immediate
        s = r.state
    return total


def test_fixture_sequence_beats_myopic(side_env):
    env = side_env
    est = ExactEstimator(env)
    myopic = _chain(env, SIDE_EFFECT_TASKS, lambda s, t: myopic_plan(env, s, t))
    ap = _chain(env, SIDE_EFFECT_TASKS, lambda s, t: anticipatory_plan(env, s, t, est))
    assert ap < myopic


def test_dominance_on_random_instances():
    rng = np.random.default_rng(21)
    for _ in range(40):
        env = random_small_env(rng, max_objects=4, max_slots=7)
        s0 = env.initial_state
        task = sample_task(env.task_distribution, rng)
        est = ExactEstimator(env)
        try:
            ap = anticipatory_plan(env, s0, task, est)
        except Unsolvable:
            continue
        my = myopic_plan(env, s0, task, est)
        assert expected_total(env, s0, ap) <= expected_total(env, s0, my) + 1e-9
        assert task_predicate(env, ap.state, task)


def test_unsolvable_task_raises():
    regions = [region("red", "red", 2.0, 5.0, 1), region("blue", "blue", 7.0, 5.0, 1)]
    env = build_env(regions, {"A": "red", "B": "blue"}, {"A": "blue_s0", "B": "red_s0"}, "red",
                    ["A:red"])
    with pytest.raises(Unsolvable):
        anticipatory_plan(env, env.initial_state, TaskSpec.parse("A:red,B:red"), zero_estimator)


# ---------------------------------------------------------------------------
# Preparation
# ---------------------------------------------------------------------------


def test_constant_estimator_keeps_start(side_env):
    r = prepare_trace(side_env, side_env.initial_state, lambda s: 3.0, 50, np.random.default_rng(0))
    assert r.state == side_env.initial_state
    assert r.accepted == 0 and r.actions == ()


@pytest.mark.parametrize("n", [0, -1])
def test_non_positive_iterations_rejected(side_env, n):
    with pytest.raises(ValueError):
        prepare(side_env, side_env.initial_state, zero_estimator, n)


@pytest.mark.parametrize("seed", range(4))
def test_single_iteration_moves_clutter(side_env, seed):
    # F blocks red; every task's trajectory passes a state that beats the start
    env = side_env
    est = ExactEstimator(env)
    r = prepare_trace(env, env.initial_state, est, 1, np.random.default_rng(seed))
    assert r.accepted == 1
    assert r.value < r.initial_value == est(env.initial_state)
    assert r.value == pytest.approx(exact_anticipatory_cost(env, r.state))
    assert r.state.holding is None


def test_recorded_actions_replay_to_result(side_env):
    from antiplan.blockworld import apply_action

    env = side_env
    r = prepare_trace(env, env.initial_state, ExactEstimator(env), 30, np.random.default_rng(3))
    s = env.initial_state
    for a in r.actions:
        s = apply_action(env, s, a)
    assert s == r.state
    assert r.action_cost == pytest.approx(sum(a.cost for a in r.actions))


def test_prepare_is_deterministic(side_env):
    est = ExactEstimator(side_env)
    a = prepare_trace(side_env, side_env.initial_state, est, 40, np.random.default_rng(8))
    b = prepare_trace(side_env, side_env.initial_state, est, 40, np.random.default_rng(8))
    assert a == b


@pytest.mark.parametrize("seed", range(5))
def test_prepare_descends_monotonically(seed):
    rng = np.random.default_rng([3, seed])
    env = random_small_env(rng, max_objects=4, max_slots=7)
    est = ExactEstimator(env)
    values = [est(env.initial_state)]
    s = env.initial_state
    for k in range(15):
        r = prepare_trace(env, s, est, 1, np.random.default_rng([seed, k]))
        assert r.value <= values[-1]
        values.append(r.value)
        s = r.state
    assert math.isfinite(values[-1])


def _global_minimum(env):
    return min(exact_anticipatory_cost(env, s) for s in all_hand_empty_states(env))


def _trajectory_closure(env):
    """Every hand-empty state prepare could ever adopt from the start state."""
    seen = {env.initial_state}
    stack = [env.initial_state]
    while stack:
        s = stack.pop()
        for t in env.task_distribution.tasks:
            try:
                sol = solve_task(env, s, t)
            except Unsolvable:
                continue
            for x in sol.states(env, s):
                if x.holding is None and x not in seen:
                    seen.add(x)
                    stack.append(x)
    return seen


def test_prepare_never_beats_global_minimum(small_env):
    env = small_env
    est = ExactEstimator(env)
    g = _global_minimum(env)
    for seed in range(10):
        r = prepare_trace(env, env.initial_state, est, 200, np.random.default_rng(seed))
        assert g - 1e-9 <= r.value <= r.initial_value


def test_four_slot_prepare_stalls_in_a_local_minimum(small_env):
    # the minimizer is reachable along myopic trajectories, but only through
    # states that are no better than where the climb stops
    env = small_env
    est = ExactEstimator(env)
    g = _global_minimum(env)
    assert min(est(s) for s in _trajectory_closure(env)) == pytest.approx(g)
    r = prepare_trace(env, env.initial_state, est, 200, np.random.default_rng(0))
    assert r.value > g
    for t in env.task_distribution.tasks:
        sol = solve_task(env, r.state, t)
        assert all(est(x) >= r.value for x in sol.states(env, r.state) if x.holding is None)


@pytest.mark.xfail(strict=False, reason="strict hill-climb stalls at a local minimum; measured 0/50 seeds")
def test_prepare_reaches_global_minimizer_in_most_seeds(small_env):
    env = small_env
    est = ExactEstimator(env)
    g = _global_minimum(env)
    hits = sum(prepare_trace(env, env.initial_state, est, 200, np.random.default_rng(seed)).value <= g + 1e-9
               for seed in range(50))
    assert hits >= 40
