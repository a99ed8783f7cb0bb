"""Optimal planning over grounded problems: A* with the admissible h_max heuristic.

Also provides the per-environment optimal task cost ``V*_task(state)`` with
memoization, and the exhaustive full-sequence oracle used for validation.
"""

from __future__ import annotations

import itertools
import json
import weakref
from dataclasses import dataclass

import numpy as np

from . import _search
from .blockworld import (Environment, TaskSpec, WorldState, apply_action, is_task_satisfied,
                         validate_state)
from .pddl.grounding import GroundAction, GroundedProblem, facts_to_state, ground, ground_to_state

DEFAULT_MAX_EXPANSIONS = 2_000_000


class Unsolvable(Exception):
    """No plan reaches the goal.  A regular outcome, not an internal failure."""


class SearchLimitExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Plan:
    actions: tuple[GroundAction, ...]
    cost: float
    expanded: int = 0

    def __len__(self):
        return len(self.actions)

    def to_dict(self) -> dict:
        return {"actions": [str(a) for a in self.actions], "cost": self.cost}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class _Compiled:
    """CSR arrays of one action set, shared by every problem built on it."""

    def __init__(self, problem: GroundedProblem):
        F = len(problem.facts)
        acts = problem.actions
        self.n_facts = F
        self.K = max(1, (F + 63) // 64)

        def csr(lists):
            ptr = np.zeros(len(lists) + 1, np.int64)
            for i, lst in enumerate(lists):
                ptr[i + 1] = ptr[i] + len(lst)
            idx = np.fromiter(itertools.chain.from_iterable(lists), np.int64, count=int(ptr[-1]))
            return ptr, idx

        self.pre_ptr, self.pre_idx = csr([a.pre for a in acts])
        self.add_ptr, self.add_idx = csr([a.add for a in acts])
        self.del_ptr, self.del_idx = csr([a.delete for a in acts])
        self.cost = np.array([a.cost for a in acts], dtype=float)
        self.pre_count = np.array([len(a.pre) for a in acts], dtype=np.int64)

        by_fact: list[list[int]] = [[] for _ in range(F)]
        for i, a in enumerate(acts):
            for f in a.pre:
                by_fact[f].append(i)
        self.f2a_ptr, self.f2a_idx = csr(by_fact)

        # each action is triggered from its least-shared precondition fact
        trig: list[list[int]] = [[] for _ in range(F)]
        nopre = []
        for i, a in enumerate(acts):
            if not a.pre:
                nopre.append(i)
                continue
            f = min(a.pre, key=lambda x: (len(by_fact[x]), x))
            trig[f].append(i)
        self.trig_ptr, self.trig_idx = csr(trig)
        self.nopre = np.array(nopre, dtype=np.int64)

    def pack(self, facts) -> np.ndarray:
        return _search.pack(np.array(sorted(facts), dtype=np.int64), self.K)

    def goal_arrays(self, goal):
        goal_idx = np.array(sorted(goal), dtype=np.int64)
        is_goal = np.zeros(self.n_facts, np.bool_)
        is_goal[goal_idx] = True
        return goal_idx, is_goal


def _compiled(problem: GroundedProblem) -> _Compiled:
    c = problem.shared.get("compiled")
    if c is None:
        c = _Compiled(problem)
        problem.shared["compiled"] = c
    return c


def hmax(problem: GroundedProblem, facts=None) -> float:
    """h_max of the fact set ``facts`` (default: the initial state) w.r.t. the goal."""
    c = _compiled(problem)
    facts = problem.init if facts is None else facts
    goal, is_goal = c.goal_arrays(problem.goal)
    hf = np.empty(c.n_facts)
    counter = np.empty(len(problem.actions), np.int64)
    return float(_search.hmax_kernel(c.pack(facts), c.n_facts, goal, is_goal, c.pre_count,
                                     c.f2a_ptr, c.f2a_idx, c.add_ptr, c.add_idx, c.cost,
                                     c.nopre, hf, counter, True))


def hmax_table(problem: GroundedProblem, facts=None) -> np.ndarray:
    """Per-fact delete-relaxed cost-to-achieve from ``facts`` (inf = unreachable)."""
    c = _compiled(problem)
    facts = problem.init if facts is None else facts
    goal, is_goal = c.goal_arrays(problem.goal)
    hf = np.empty(c.n_facts)
    counter = np.empty(len(problem.actions), np.int64)
    _search.hmax_kernel(c.pack(facts), c.n_facts, goal, is_goal, c.pre_count, c.f2a_ptr,
                        c.f2a_idx, c.add_ptr, c.add_idx, c.cost, c.nopre, hf, counter, False)
    return hf


def _search_problem(problem: GroundedProblem, use_h: bool, max_expansions: int) -> Plan | None:
    c = _compiled(problem)
    goal, is_goal = c.goal_arrays(problem.goal)
    status, cost, acts, expanded, _ = _search.astar_kernel(
        c.K, c.pack(problem.init), c.n_facts, goal, is_goal, c.pre_ptr, c.pre_idx,
        c.add_ptr, c.add_idx, c.del_ptr, c.del_idx, c.cost, c.pre_count, c.f2a_ptr,
        c.f2a_idx, c.trig_ptr, c.trig_idx, c.nopre, use_h, max_expansions)
    if status == _search.LIMIT:
        raise SearchLimitExceeded(f"more than {max_expansions} expansions")
    if status == _search.UNSOLVABLE:
        return None
    actions = tuple(problem.actions[int(i)] for i in acts)
    # recompute the sum in plan order so Plan.cost is exactly the action-cost sum
    total = 0.0
    for a in actions:
        total += a.cost
    return Plan(actions, total, int(expanded))


def plan(problem: GroundedProblem, max_expansions: int = DEFAULT_MAX_EXPANSIONS) -> Plan | None:
    """Minimum-cost plan via A* + h_max, or ``None`` when the problem is unsolvable."""
    return _search_problem(problem, True, max_expansions)


def uniform_cost_plan(problem: GroundedProblem,
                      max_expansions: int = DEFAULT_MAX_EXPANSIONS) -> Plan | None:
    """Same search with a zero heuristic (Dijkstra over the state graph)."""
    return _search_problem(problem, False, max_expansions)


def trajectory(problem: GroundedProblem, p: Plan) -> list[frozenset[int]]:
    """Fact sets after each action of ``p`` (the initial set excluded)."""
    state = problem.init
    out = []
    for a in p.actions:
        state = problem.successor(state, a)
        out.append(state)
    return out


# ---------------------------------------------------------------------------
# Environment-level helpers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Solution:
    plan: Plan
    final_state: WorldState

    @property
    def cost(self) -> float:
        return self.plan.cost

    def states(self, env: Environment, s0: WorldState) -> list[WorldState]:
        """World states after each action (inclusive of the final state)."""
        out = []
        s = s0
        for a in self.plan.actions:
            s = apply_action(env, s, a)
            out.append(s)
        return out


class _EnvCache:
    def __init__(self):
        self.solutions: dict = {}
        self.costs: dict = {}
        self.macro = None
        self.macro_table = None


_CACHE: "weakref.WeakKeyDictionary[Environment, _EnvCache]" = weakref.WeakKeyDictionary()


def _env_cache(env: Environment) -> _EnvCache:
    c = _CACHE.get(env)
    if c is None:
        c = _CACHE[env] = _EnvCache()
    return c


def clear_caches(env: Environment | None = None) -> None:
    if env is None:
        _CACHE.clear()
    else:
        _CACHE.pop(env, None)


def _solve(problem: GroundedProblem, s0: WorldState, env: Environment) -> Solution:
    p = plan(problem)
    if p is None:
        raise Unsolvable("no plan reaches the goal")
    final = s0
    if p.actions:
        facts = problem.init
        for a in p.actions:
            facts = problem.successor(facts, a)
        final = facts_to_state(problem, facts)
    return Solution(p, final)


ENGINES = ("macro", "astar")
_engine = "macro"


def set_engine(name: str) -> str:
    """Select how environment-level costs are computed; returns the previous engine.

    ``"astar"`` grounds every query and runs :func:`plan`.  ``"macro"`` (the
    default) searches over [move] pick / [move] place steps, which gives the
    same optimal cost whenever the move table is metric and is orders of
    magnitude faster.  Queries the macro search cannot express fall back to
    ``"astar"``.  Caches are cleared on change.
    """
    global _engine
    if name not in ENGINES:
        raise ValueError(f"unknown engine {name!r}; expected one of {ENGINES}")
    old, _engine = _engine, name
    if old != name:
        clear_caches()
    return old


def get_engine() -> str:
    return _engine


class _MacroModel:
    """Index arrays of one environment for the compiled macro search."""

    max_objects = 9  # 6 bits per object plus the robot must fit in an int64

    def __init__(self, env: Environment, table):
        self.env = env
        self.locs = env.locations
        self.slots = env.slot_ids
        self.objs = env.object_ids
        self.loc_index = {loc: i for i, loc in enumerate(self.locs)}
        self.obj_index = {o: i for i, o in enumerate(self.objs)}
        n = len(self.locs)
        M = np.zeros((n, n))
        for i, a in enumerate(self.locs):
            for j, b in enumerate(self.locs):
                if i != j:
                    M[i, j] = table(a, b) if (a, b) in table else np.inf
        self.M = M
        closed = M.copy()
        for k in range(n):
            np.minimum(closed, closed[:, k:k + 1] + closed[k:k + 1, :], out=closed)
        metric = bool(np.all(closed >= M - 1e-9 * np.maximum(1.0, np.abs(M))))
        self.usable = (metric and len(self.objs) <= self.max_objects and n < _search.HELD
                       and np.all(np.isfinite(M)))
        self.region_slots = {r: [self.loc_index[s.id] for s in env.region(r).slots]
                             for r in env.region_ids}
        self.all_slots = (1 << len(self.slots)) - 1
        self.pick_cost, self.place_cost = _manip_costs(env, table)

    def encode(self, s: WorldState):
        slots = np.full(len(self.objs), _search.HELD, np.int64)
        for obj, slot in s.placements:
            slots[self.obj_index[obj]] = self.loc_index[slot]
        return slots, self.loc_index[s.robot_at]

    def run(self, s0: WorldState, masks: list[int], target_robot: int = -1):
        n = len(self.objs)
        n_slots = len(self.slots)
        D = np.zeros((n + 1 + n_slots, len(self.locs)))
        for b, m in enumerate(masks):
            cols = [t for t in range(n_slots) if (m >> t) & 1]
            D[b] = self.M[:, cols].min(axis=1) if cols else np.inf
        if target_robot >= 0:
            D[n] = self.M[:, target_robot]
        D[n + 1:] = self.M[:, :n_slots].T
        slots, robot = self.encode(s0)
        status, cost, kinds, objs, locs, expanded = _search.macro_astar(
            self.M, n_slots, slots, robot, np.array(masks, dtype=np.int64), D, target_robot,
            self.pick_cost, self.place_cost, DEFAULT_MAX_EXPANSIONS)
        if status == _search.LIMIT:
            raise SearchLimitExceeded(f"more than {DEFAULT_MAX_EXPANSIONS} expansions")
        if status == _search.UNSOLVABLE:
            return None
        return kinds, objs, locs, int(expanded)


def _manip_costs(env: Environment, table) -> tuple[float, float]:
    from .pddl.grounding import _template, blockworld_domain
    tpl = _template(blockworld_domain(), env, table)
    picks = {a.cost for a in tpl.actions if a.name == "pick"}
    places = {a.cost for a in tpl.actions if a.name == "place"}
    if len(picks) != 1 or len(places) != 1:
        raise RuntimeError("pick/place costs are not uniform")
    return picks.pop(), places.pop()


def _actions_by_key(env: Environment, table) -> dict:
    from .pddl.grounding import _template, blockworld_domain
    tpl = _template(blockworld_domain(), env, table)
    by_key = tpl.shared.get("by_key")
    if by_key is None:
        by_key = tpl.shared["by_key"] = {(a.name, a.args): a for a in tpl.actions}
    return by_key


def _macro_model(env: Environment) -> _MacroModel | None:
    if _engine != "macro" or env.move_costs is None:
        return None
    cache = _env_cache(env)
    if cache.macro is None or cache.macro_table is not env.move_costs:
        cache.macro = _MacroModel(env, env.move_costs)
        cache.macro_table = env.move_costs
    return cache.macro if cache.macro.usable else None


def _macro_solution(model: _MacroModel, s0: WorldState, masks, target_robot=-1) -> Solution:
    out = model.run(s0, masks, target_robot)
    if out is None:
        raise Unsolvable("no plan reaches the goal")
    kinds, objs, locs, expanded = out
    env = model.env
    by_key = _actions_by_key(env, env.move_costs)
    from .blockworld import ROBOT
    actions = []
    robot = s0.robot_at
    for kind, b, li in zip(kinds, objs, locs):
        loc = model.locs[int(li)]
        if loc != robot:
            actions.append(by_key[("move", (ROBOT, robot, loc))])
            robot = loc
        if kind == _search.PICK:
            args = (ROBOT, model.objs[int(b)], loc, env.region_of_slot(loc))
            actions.append(by_key[("pick", args)])
        elif kind == _search.PLACE:
            args = (ROBOT, model.objs[int(b)], loc, env.region_of_slot(loc))
            actions.append(by_key[("place", args)])
    final = s0
    for a in actions:
        final = apply_action(env, final, a)
    total = 0.0
    for a in actions:
        total += a.cost
    return Solution(Plan(tuple(actions), total, expanded), final)


def _task_masks(model: _MacroModel, task: TaskSpec) -> list[int]:
    masks = [model.all_slots] * len(model.objs)
    for obj, region in task.directives:
        m = 0
        for t in model.region_slots[region]:
            m |= 1 << t
        masks[model.obj_index[obj]] = m
    return masks


def _solve_task_uncached(env: Environment, s0: WorldState, task: TaskSpec) -> Solution:
    if is_task_satisfied(env, s0, task):
        return Solution(Plan((), 0.0, 0), s0)
    model = _macro_model(env)
    if model is not None:
        validate_state(env, s0)
        return _macro_solution(model, s0, _task_masks(model, task))
    return _solve(ground(None, env, s0, task), s0, env)


def solve_task(env: Environment, s0: WorldState, task: TaskSpec) -> Solution:
    """Optimal plan for ``task`` from ``s0``; memoized per environment."""
    cache = _env_cache(env)
    key = (s0, task)
    sol = cache.solutions.get(key)
    if sol is None:
        try:
            sol = _solve_task_uncached(env, s0, task)
        except Unsolvable:
            cache.costs[key] = float("inf")
            raise
        cache.solutions[key] = sol
        cache.costs[key] = sol.cost
    return sol


def optimal_cost(env: Environment, s0: WorldState, task: TaskSpec) -> float:
    """``V*_task(s0)``: cost of the optimal plan completing ``task`` from ``s0``."""
    cost = _env_cache(env).costs.get((s0, task))
    if cost is None:
        try:
            cost = solve_task(env, s0, task).cost
        except Unsolvable:
            cost = float("inf")
    if cost == float("inf"):
        raise Unsolvable(f"task {task} is unsolvable from the given state")
    return cost


def solve_to_state(env: Environment, s0: WorldState, target: WorldState,
                   with_robot: bool = False) -> Solution:
    """Optimal plan from ``s0`` to the placements of ``target``.

    With ``with_robot`` the robot location is pinned as well; otherwise the
    robot ends wherever the optimal plan leaves it.
    """
    cache = _env_cache(env)
    key = ("state", s0, target if with_robot else target.placements, target.holding, with_robot)
    sol = cache.solutions.get(key)
    if sol is None:
        done = s0.placements == target.placements and s0.holding == target.holding
        model = _macro_model(env)
        if done and (not with_robot or s0.robot_at == target.robot_at):
            sol = Solution(Plan((), 0.0, 0), s0)
        elif model is not None and target.holding is None:
            validate_state(env, s0)
            validate_state(env, target)
            masks = [0] * len(model.objs)
            for obj, slot in target.placements:
                masks[model.obj_index[obj]] = 1 << model.loc_index[slot]
            robot = model.loc_index[target.robot_at] if with_robot else -1
            sol = _macro_solution(model, s0, masks, robot)
        else:
            sol = _solve(ground_to_state(env, s0, target, with_robot), s0, env)
        cache.solutions[key] = sol
    return sol


def state_cost(env: Environment, s0: WorldState, target: WorldState, with_robot: bool = True) -> float:
    """``V*_target(s0)``: optimal cost of moving from ``s0`` to ``target``."""
    return solve_to_state(env, s0, target, with_robot).cost


def sequence_oracle(env: Environment, s0: WorldState, tasks: list[TaskSpec],
                    candidate_goal_sets: list[list[WorldState]]) -> tuple[list[WorldState], float]:
    """Exhaustive minimum of the chained state-to-state cost over candidate goal states.

    Each candidate is a full world state (robot location included) and must
    satisfy its task.  Intended for validation on tiny instances only.
    """
    if len(tasks) != len(candidate_goal_sets):
        raise ValueError("one candidate set per task is required")
    if len(tasks) > 3:
        raise ValueError("sequence oracle is limited to three tasks")
    sets = []
    for task, cands in zip(tasks, candidate_goal_sets):
        ok = [s for s in cands if is_task_satisfied(env, s, task)]
        if not ok:
            raise Unsolvable(f"no candidate satisfies task {task}")
        sets.append(ok)

    leg_cost: dict = {}

    def leg(a: WorldState, b: WorldState) -> float:
        key = (a, b)
        if key not in leg_cost:
            try:
                leg_cost[key] = state_cost(env, a, b, with_robot=True)
            except Unsolvable:
                leg_cost[key] = float("inf")
        return leg_cost[key]

    best_states: list[WorldState] | None = None
    best = float("inf")
    for combo in itertools.product(*sets):
        total = 0.0
        prev = s0
        for s in combo:
            total += leg(prev, s)
            if total >= best:
                break
            prev = s
        if total < best:
            best = total
            best_states = list(combo)
    if best_states is None:
        raise Unsolvable("every candidate sequence has an unsolvable leg")
    return best_states, best
