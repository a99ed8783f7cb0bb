"""Grounding of PDDL schemas into an indexed STRIPS problem, plus blockworld rendering.

Grounding is relaxed-reachability based: bindings are joined against static
facts and the delete-relaxed reachable fluent facts from the initial state,
iterated to a fixpoint.  Static atoms are compiled away.  Ground actions whose
add and delete lists intersect (e.g. ``move`` to the current location) are
no-ops and are dropped.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from itertools import product

from ..blockworld import (
    ROBOT, Environment, TaskSpec, UnknownEntity, WorldState, check_task, validate_state,
)
from .parser import Atom, CostTerm, PddlDomain, PddlProblem, parse_domain


class GroundingError(Exception):
    pass


class MissingMoveCost(GroundingError):
    pass


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple[str, ...]
    pre: tuple[int, ...]
    add: tuple[int, ...]
    delete: tuple[int, ...]
    cost: float

    def __str__(self):
        return f"({self.name} {' '.join(self.args)})"


@dataclass(frozen=True, eq=False)
class GroundedProblem:
    """Indexed STRIPS problem: facts, actions over fact indices, init and goal sets."""

    facts: tuple[Atom, ...]
    actions: tuple[GroundAction, ...]
    init: frozenset[int]
    goal: frozenset[int]
    fact_index: dict = field(repr=False)
    # per-action-set caches (compiled arrays), shared by problems of one template
    shared: dict = field(default_factory=dict, repr=False)

    def with_init_goal(self, init, goal) -> "GroundedProblem":
        return GroundedProblem(self.facts, self.actions, frozenset(init), frozenset(goal),
                               self.fact_index, self.shared)

    def atoms(self, indices) -> list[Atom]:
        return sorted(self.facts[i] for i in indices)

    def successor(self, state: frozenset[int], action: GroundAction) -> frozenset[int]:
        if not set(action.pre) <= state:
            raise ValueError(f"{action} is not applicable")
        return (state - set(action.delete)) | set(action.add)

    def applicable(self, state: frozenset[int]) -> list[GroundAction]:
        return [a for a in self.actions if set(a.pre) <= state]


# ---------------------------------------------------------------------------
# Generic grounding
# ---------------------------------------------------------------------------


def _substitute(atom: Atom, binding: dict[str, str]) -> Atom:
    return (atom[0], *(binding.get(x, x) for x in atom[1:]))


def _bindings(params, precondition, relations, objects):
    # static (and rarer) atoms first narrows the join early
    atoms = sorted(precondition, key=lambda a: len(relations.get(a[0], ())))

    def rec(i, binding):
        if i == len(atoms):
            free = [p for p in params if p not in binding]
            for combo in product(objects, repeat=len(free)):
                b = dict(binding)
                b.update(zip(free, combo))
                yield b
            return
        pred, *args = atoms[i]
        for tup in relations.get(pred, ()):
            if len(tup) != len(args):
                continue
            b = binding
            ok = True
            for var, val in zip(args, tup):
                if var.startswith("?"):
                    cur = b.get(var)
                    if cur is None:
                        if b is binding:
                            b = dict(binding)
                        b[var] = val
                    elif cur != val:
                        ok = False
                        break
                elif var != val:
                    ok = False
                    break
            if ok:
                yield from rec(i + 1, b)

    yield from rec(0, {})


def ground_problem(domain: PddlDomain, problem: PddlProblem) -> GroundedProblem:
    """Ground every schema of ``domain`` against ``problem``."""
    changing = {atom[0] for a in domain.actions for atom in a.add + a.delete}
    static = {a for a in problem.init if a[0] not in changing}
    fluent_init = {a for a in problem.init if a[0] in changing}

    relations: dict[str, set[tuple]] = {}
    for a in static | fluent_init:
        relations.setdefault(a[0], set()).add(tuple(a[1:]))
    objects = list(problem.objects)

    reachable = set(fluent_init)
    while True:
        new = set()
        for schema in domain.actions:
            for b in _bindings(schema.parameters, schema.precondition, relations, objects):
                for atom in schema.add:
                    g = _substitute(atom, b)
                    if g not in reachable:
                        new.add(g)
        if not new:
            break
        reachable |= new
        for g in new:
            relations.setdefault(g[0], set()).add(tuple(g[1:]))

    # unreachable or false-static goal atoms stay in the universe with no achiever
    universe = sorted(reachable | fluent_init | {g for g in problem.goal if g not in static})
    index = {f: i for i, f in enumerate(universe)}

    actions: dict[tuple, GroundAction] = {}
    for schema in domain.actions:
        for b in _bindings(schema.parameters, schema.precondition, relations, objects):
            args = tuple(b[p] for p in schema.parameters)
            pre = sorted({index[_substitute(a, b)] for a in schema.precondition if a[0] in changing})
            add = sorted({index[_substitute(a, b)] for a in schema.add})
            delete = {_substitute(a, b) for a in schema.delete}
            delete = sorted({index[d] for d in delete if d in index})
            if set(add) & set(delete):
                continue
            cost = schema.cost
            if isinstance(cost, CostTerm):
                key = (cost.function, *(b.get(x, x) for x in cost.args))
                if key not in problem.numeric:
                    raise MissingMoveCost(f"no value for ({' '.join(key)})")
                cost = problem.numeric[key]
            if not cost >= 0 or cost == float("inf"):
                raise GroundingError(f"action {schema.name}{args} has invalid cost {cost!r}")
            actions[(schema.name, args)] = GroundAction(
                schema.name, args, tuple(pre), tuple(add), tuple(delete), float(cost))

    ordered = tuple(actions[k] for k in sorted(actions))
    init = frozenset(index[a] for a in fluent_init)
    goal = set()
    for g in problem.goal:
        if g in static:
            continue
        goal.add(index[g])
    return GroundedProblem(tuple(universe), ordered, init, frozenset(goal), index)


# ---------------------------------------------------------------------------
# Blockworld <-> PDDL
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1)
def blockworld_domain_text() -> str:
    return resources.files(__package__).joinpath("blockworld.pddl").read_text()


@lru_cache(maxsize=1)
def blockworld_domain() -> PddlDomain:
    return parse_domain(blockworld_domain_text())


def static_atoms(env: Environment) -> list[Atom]:
    atoms: list[Atom] = [("Robot", ROBOT)]
    atoms += [("Block", o) for o in env.object_ids]
    atoms += [("Location", loc) for loc in env.locations]
    atoms += [("SlotOf", s, env.region_of_slot(s)) for s in env.slot_ids]
    return atoms


def state_atoms(env: Environment, s: WorldState) -> set[Atom]:
    """Fluent atoms that hold in ``s``."""
    atoms: set[Atom] = {("At", ROBOT, s.robot_at)}
    if s.holding is None:
        atoms.add(("HandEmpty", ROBOT))
    else:
        atoms.add(("Holding", ROBOT, s.holding))
    occupied = set()
    for obj, slot in s.placements:
        atoms.add(("In", obj, slot))
        atoms.add(("InRegion", obj, env.region_of_slot(slot)))
        occupied.add(slot)
    atoms.update(("Clear", slot) for slot in env.slot_ids if slot not in occupied)
    return atoms


def atoms_to_state(atoms) -> WorldState:
    """Inverse of :func:`state_atoms`."""
    placements = {}
    robot_at = None
    holding = None
    for a in atoms:
        if a[0] == "In":
            placements[a[1]] = a[2]
        elif a[0] == "At":
            robot_at = a[2]
        elif a[0] == "Holding":
            holding = a[2]
    return WorldState.make(placements, robot_at, holding)


def task_goal_atoms(task: TaskSpec) -> list[Atom]:
    return [("InRegion", obj, region) for obj, region in task.directives] + [("HandEmpty", ROBOT)]


def state_goal_atoms(target: WorldState, with_robot: bool = False) -> list[Atom]:
    """Goal pinning every placement of ``target`` (and optionally the robot)."""
    atoms = [("In", obj, slot) for obj, slot in target.placements]
    if target.holding is None:
        atoms.append(("HandEmpty", ROBOT))
    else:
        atoms.append(("Holding", ROBOT, target.holding))
    if with_robot:
        atoms.append(("At", ROBOT, target.robot_at))
    return atoms


def problem_from_state(env: Environment, s0: WorldState, goal: list[Atom], move_costs=None,
                       name: str | None = None) -> PddlProblem:
    table = move_costs if move_costs is not None else env.move_costs
    if table is None:
        raise MissingMoveCost("environment has no move-cost table")
    locs = env.locations
    numeric = {("total-cost",): 0.0}
    for a in locs:
        for b in locs:
            if a != b and (a, b) in table:
                numeric[("move-cost", a, b)] = table(a, b)
    objects = (ROBOT, *env.object_ids, *env.slot_ids, *env.region_ids)
    init = tuple(sorted(static_atoms(env)) + sorted(state_atoms(env, s0)))
    return PddlProblem(name or f"bw-{env.seed}", "blockworld", objects, init, tuple(goal), numeric)


_TEMPLATES: "weakref.WeakKeyDictionary[Environment, dict]" = weakref.WeakKeyDictionary()


def _template(domain: PddlDomain, env: Environment, move_costs) -> GroundedProblem:
    per_env = _TEMPLATES.setdefault(env, {})
    key = (id(domain), id(move_costs))
    tpl = per_env.get(key)
    if tpl is None:
        problem = problem_from_state(env, env.initial_state, [], move_costs)
        tpl = ground_problem(domain, problem)
        per_env[key] = tpl
    return tpl


def ground_goal(env: Environment, s0: WorldState, goal: list[Atom], move_costs=None,
                domain: PddlDomain | None = None) -> GroundedProblem:
    """Ground ``goal`` from ``s0``; the action set is cached per environment."""
    domain = domain or blockworld_domain()
    validate_state(env, s0)
    table = move_costs if move_costs is not None else env.move_costs
    if table is None:
        raise MissingMoveCost("environment has no move-cost table")
    tpl = _template(domain, env, table)
    idx = tpl.fact_index
    init = state_atoms(env, s0)
    if all(a in idx for a in init) and all(g in idx for g in goal):
        return tpl.with_init_goal((idx[a] for a in init), (idx[g] for g in goal))
    return ground_problem(domain, problem_from_state(env, s0, goal, table))


def ground(domain: PddlDomain | None, env: Environment, s0: WorldState, task: TaskSpec,
           move_costs=None) -> GroundedProblem:
    """Ground the task ``task`` from ``s0`` in ``env``."""
    check_task(env, task)
    return ground_goal(env, s0, task_goal_atoms(task), move_costs, domain)


def ground_to_state(env: Environment, s0: WorldState, target: WorldState,
                    with_robot: bool = False, move_costs=None) -> GroundedProblem:
    for obj, slot in target.placements:
        env.object(obj)
        env.slot(slot)
    return ground_goal(env, s0, state_goal_atoms(target, with_robot), move_costs)


def facts_to_state(problem: GroundedProblem, facts) -> WorldState:
    return atoms_to_state(problem.facts[i] for i in facts)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _fmt(atom: Atom) -> str:
    return "(" + " ".join(atom) + ")"


def render_problem(env: Environment, s0: WorldState, task: TaskSpec | None = None,
                   move_costs=None, goal: list[Atom] | None = None) -> str:
    """PDDL problem text for ``task`` (or an explicit goal) from ``s0``."""
    if task is not None:
        check_task(env, task)
        goal = task_goal_atoms(task)
    if goal is None:
        raise ValueError("need a task or a goal")
    for obj, _ in s0.placements:
        if obj not in env.object_ids:
            raise UnknownEntity(obj)
    p = problem_from_state(env, s0, goal, move_costs)
    lines = [f"(define (problem {p.name})", f"  (:domain {p.domain})", "  (:objects"]
    lines.append("    " + " ".join(p.objects) + ")")
    lines.append("  (:init")
    for a in p.init:
        lines.append(f"    {_fmt(a)}")
    for key, value in p.numeric.items():
        lines.append(f"    (= ({' '.join(key)}) {value!r})")
    lines.append("  )")
    lines.append("  (:goal (and " + " ".join(_fmt(g) for g in p.goal) + "))")
    lines.append("  (:metric minimize (total-cost)))")
    return "\n".join(lines) + "\n"
