"""Goal-state selection with a future-cost estimator, and task-free preparation.

:func:`anticipatory_plan` solves the current task myopically, enumerates
alternate placements of the objects that plan touched, and picks the goal
state minimizing ``immediate cost + est(goal state)``.

:func:`prepare` hill-climbs on ``est`` alone: it repeatedly solves a sampled
task from the current best state and adopts the best state met along that
plan's trajectory when it strictly improves on the current one.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .blockworld import (
    Environment,
    TaskSpec,
    WorldState,
    apply_action,
    distance,
    is_task_satisfied,
    sample_task,
    state_to_dict,
)
from .planner import Plan, Unsolvable, solve_task, solve_to_state

log = logging.getLogger(__name__)

Estimator = Callable[[WorldState], float]
MAX_CANDIDATES = 64


def zero_estimator(s: WorldState) -> float:
    return 0.0


@dataclass(frozen=True)
class SearchResult:
    state: WorldState
    plan: Plan
    immediate: float
    future: float
    candidates_evaluated: int

    @property
    def total(self) -> float:
        return self.immediate + self.future

    def to_dict(self) -> dict:
        return {
            "state": state_to_dict(self.state),
            "plan": [str(a) for a in self.plan.actions],
            "immediate_cost": self.immediate,
            "future_cost": self.future,
            "total_cost": self.total,
            "candidates_evaluated": self.candidates_evaluated,
        }


def manipulated_objects(plan: Plan) -> list[str]:
    """Objects picked by ``plan``, in order of first pick."""
    seen = []
    for a in plan.actions:
        if a.name == "pick" and a.args[1] not in seen:
            seen.append(a.args[1])
    return seen


def alternate_goal_states(env: Environment, s0: WorldState, task: TaskSpec, plan: Plan,
                          max_candidates: int = MAX_CANDIDATES) -> list[WorldState]:
    """Goal states that re-place only the objects ``plan`` manipulated.

    Every injective assignment of those objects to slots not held by the
    other objects is considered; assignments violating ``task`` are dropped.
    The plan's own goal state comes first, the rest follow by total
    displacement from it (then lexicographically), truncated to
    ``max_candidates``.  The robot location of every candidate is the one
    the plan ends at; it is a placeholder, since candidates are reached by
    planning to their placements only.
    """
    goal = s0
    for a in plan.actions:
        goal = apply_action(env, goal, a)
    moved = manipulated_objects(plan)
    if not moved:
        return [goal]
    where = goal.placement_map
    fixed = {o: s for o, s in where.items() if o not in moved}
    free = [s for s in env.slot_ids if s not in set(fixed.values())]
    pos = {s: env.slot(s).position for s in env.slot_ids}

    scored = []
    for combo in itertools.permutations(free, len(moved)):
        placements = dict(fixed)
        placements.update(zip(moved, combo))
        cand = WorldState.make(placements, goal.robot_at)
        if cand.placements == goal.placements:
            continue
        if not is_task_satisfied(env, cand, task):
            continue
        disp = sum(distance(pos[where[o]], pos[s]) for o, s in zip(moved, combo))
        scored.append((round(disp, 9), cand.placements, cand))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [goal] + [c for _, _, c in scored[:max(0, max_candidates - 1)]]


def anticipatory_plan(env: Environment, s0: WorldState, task: TaskSpec, est: Estimator,
                      max_candidates: int = MAX_CANDIDATES) -> SearchResult:
    """Minimize ``V*(s0 -> s') + est(s')`` over alternate goal states ``s'`` of ``task``.

    Each candidate is reached by an optimal plan to its exact placements;
    ``est`` is evaluated at the state where that plan ends.  Ties go to the
    myopic goal, then to enumeration order.

    Raises
    ------
    Unsolvable
        If ``task`` cannot be solved from ``s0``.
    """
    myopic = solve_task(env, s0, task)
    candidates = alternate_goal_states(env, s0, task, myopic.plan, max_candidates)
    best = SearchResult(myopic.final_state, myopic.plan, myopic.cost,
                        float(est(myopic.final_state)), len(candidates))
    for cand in candidates[1:]:
        try:
            sol = solve_to_state(env, s0, cand)
        except Unsolvable:
            continue
        # cheap bound first: est is non-negative
        if sol.cost >= best.total:
            continue
        future = float(est(sol.final_state))
        if sol.cost + future < best.total:
            best = SearchResult(sol.final_state, sol.plan, sol.cost, future, len(candidates))
    return best


def myopic_plan(env: Environment, s0: WorldState, task: TaskSpec,
                est: Estimator | None = None) -> SearchResult:
    """Optimal plan for ``task`` alone, reported in the same shape."""
    sol = solve_task(env, s0, task)
    future = float(est(sol.final_state)) if est is not None else 0.0
    return SearchResult(sol.final_state, sol.plan, sol.cost, future, 1)


@dataclass(frozen=True)
class PrepareResult:
    state: WorldState
    value: float
    initial_value: float
    accepted: int
    iterations: int
    # actions executed to reach the adopted states, in order
    actions: tuple = ()

    @property
    def action_cost(self) -> float:
        return float(sum(a.cost for a in self.actions))

    def to_dict(self) -> dict:
        return {"state": state_to_dict(self.state), "value": self.value,
                "initial_value": self.initial_value, "accepted": self.accepted,
                "iterations": self.iterations, "action_cost": self.action_cost}


def prepare_trace(env: Environment, s0: WorldState, est: Estimator, iterations: int = 200,
                  rng: np.random.Generator | None = None) -> PrepareResult:
    """Hill-climb on ``est`` along trajectories of myopic plans for sampled tasks.

    Each iteration samples a task, solves it from the current state ``s*`` and
    evaluates ``est`` on every hand-empty state after each action of that
    plan (the final state included).  The best such state replaces ``s*`` if
    its value is strictly lower.  Preparation itself is charged nothing;
    the executed actions are recorded for callers that want to charge them.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    current = s0
    value = float(est(s0))
    initial = value
    accepted = 0
    actions: list = []
    for _ in range(iterations):
        task = sample_task(env.task_distribution, rng)
        try:
            sol = solve_task(env, current, task)
        except Unsolvable:
            log.info("preparation skipped unsolvable task %s", task)
            continue
        best_i, best_v = -1, value
        states = sol.states(env, current)
        for i, s in enumerate(states):
            if s.holding is not None:
                continue
            v = float(est(s))
            if v < best_v:
                best_i, best_v = i, v
        if best_i >= 0:
            current, value = states[best_i], best_v
            actions.extend(sol.plan.actions[:best_i + 1])
            accepted += 1
    return PrepareResult(current, value, initial, accepted, iterations, tuple(actions))


def prepare(env: Environment, s0: WorldState, est: Estimator, iterations: int = 200,
            rng: np.random.Generator | None = None) -> WorldState:
    """Task-free reconfiguration minimizing ``est``; see :func:`prepare_trace`."""
    return prepare_trace(env, s0, est, iterations, rng).state


def expected_total(env: Environment, s0: WorldState, result: SearchResult,
                   distribution=None) -> float:
    """Immediate cost plus the exact expected cost of the next task, at the result state."""
    from .anticipatory import exact_anticipatory_cost
    v = exact_anticipatory_cost(env, result.state, distribution)
    return result.immediate + v if math.isfinite(v) else math.inf
