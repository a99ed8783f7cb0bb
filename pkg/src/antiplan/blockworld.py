"""Blockworld domain model: environments, world states, tasks and their JSON form.

Placement is tracked per slot (capacity one); region membership of an object
is derived from the region owning its slot.  Environments and states are
immutable and safe to share.
"""

from __future__ import annotations

import json
import math
from functools import lru_cache
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

if TYPE_CHECKING:
    from .motion import MoveCostTable

SCHEMA_VERSION = 1
ROBOT = "rob"
WHITE = "white"

PALETTE: dict[str, tuple[float, float, float, float]] = {
    "red": (1.0, 0.0, 0.0, 1.0),
    "blue": (0.0, 0.0, 1.0, 1.0),
    "green": (0.0, 1.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0, 1.0),
    "white": (1.0, 1.0, 1.0, 1.0),
}


class BlockworldError(Exception):
    pass


class GenerationFailure(BlockworldError):
    pass


class UnknownEntity(BlockworldError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class PreconditionViolation(BlockworldError):
    pass


# ---------------------------------------------------------------------------
# Static structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def inflate(self, r: float) -> "Rect":
        return Rect(self.xmin - r, self.ymin - r, self.xmax + r, self.ymax + r)

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def overlaps(self, other: "Rect") -> bool:
        return not (
            self.xmax <= other.xmin
            or other.xmax <= self.xmin
            or self.ymax <= other.ymin
            or other.ymax <= self.ymin
        )


@dataclass(frozen=True)
class Slot:
    id: str
    position: tuple[float, float]
    # robot stands here to pick/place at this slot
    access_point: tuple[float, float]
    capacity: int = 1


@dataclass(frozen=True)
class Region:
    id: str
    color: tuple[float, float, float, float]
    footprint: Rect
    slots: tuple[Slot, ...]
    approach_point: tuple[float, float]

    @property
    def color_name(self) -> str:
        return color_name(self.color)


@dataclass(frozen=True)
class ObjectDef:
    id: str
    color: tuple[float, float, float, float]
    semantic_class: str = "block"

    @property
    def color_name(self) -> str:
        return color_name(self.color)


def color_name(rgba: Sequence[float]) -> str:
    for name, value in PALETTE.items():
        if tuple(rgba) == value:
            return name
    return "custom"


# ---------------------------------------------------------------------------
# Dynamic state and tasks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WorldState:
    """Snapshot of placements (object -> slot), robot location and held object.

    ``placements`` is kept as a sorted tuple of pairs so states hash and
    compare by value.  Use :meth:`make` to build one from a mapping.
    """

    placements: tuple[tuple[str, str], ...]
    robot_at: str
    holding: str | None = None

    @classmethod
    def make(cls, placements: Mapping[str, str], robot_at: str, holding: str | None = None):
        return cls(tuple(sorted(placements.items())), robot_at, holding)

    @property
    def placement_map(self) -> dict[str, str]:
        return dict(self.placements)

    def slot_of(self, obj: str) -> str | None:
        for o, s in self.placements:
            if o == obj:
                return s
        return None

    def occupied(self) -> set[str]:
        return {s for _, s in self.placements}

    def with_robot(self, robot_at: str) -> "WorldState":
        return WorldState(self.placements, robot_at, self.holding)


@dataclass(frozen=True)
class TaskSpec:
    """Placement directives: each (object, region) pair must hold at once."""

    directives: tuple[tuple[str, str], ...]

    @classmethod
    def parse(cls, text: str) -> "TaskSpec":
        """Parse ``"A:red"`` or ``"A:red,B:blue"``."""
        pairs = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            obj, sep, region = part.partition(":")
            if not sep or not obj or not region:
                raise ValueError(f"bad directive {part!r}; expected OBJECT:REGION")
            pairs.append((obj.strip(), region.strip()))
        if not pairs:
            raise ValueError("empty task")
        return cls(tuple(pairs))

    def __str__(self):
        return ",".join(f"{o}:{r}" for o, r in self.directives)

    @property
    def objects(self) -> tuple[str, ...]:
        return tuple(o for o, _ in self.directives)


@dataclass(frozen=True)
class TaskDistribution:
    entries: tuple[tuple[TaskSpec, float], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("task distribution is empty")
        probs = [p for _, p in self.entries]
        if any(p <= 0 for p in probs):
            raise ValueError("task probabilities must be positive")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"task probabilities sum to {sum(probs)!r}, not 1")

    @classmethod
    def uniform(cls, tasks: Iterable[TaskSpec]) -> "TaskDistribution":
        tasks = list(tasks)
        return cls(tuple((t, 1.0 / len(tasks)) for t in tasks))

    @property
    def tasks(self) -> list[TaskSpec]:
        return [t for t, _ in self.entries]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.entries])

    def __len__(self):
        return len(self.entries)


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Environment:
    seed: int
    width: float
    height: float
    regions: tuple[Region, ...]
    objects: tuple[ObjectDef, ...]
    robot_radius: float
    task_distribution: TaskDistribution
    initial_state: WorldState
    move_costs: MoveCostTable | None = None
    # derived lookups, rebuilt on construction
    _region_of_slot: dict = field(init=False, repr=False, compare=False)
    _slots: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rs = {}
        slots = {}
        for region in self.regions:
            for slot in region.slots:
                rs[slot.id] = region.id
                slots[slot.id] = slot
        object.__setattr__(self, "_region_of_slot", rs)
        object.__setattr__(self, "_slots", slots)

    # -- lookups -----------------------------------------------------------

    def region(self, region_id: str) -> Region:
        for r in self.regions:
            if r.id == region_id:
                return r
        raise UnknownEntity(f"unknown region {region_id!r}")

    def object(self, object_id: str) -> ObjectDef:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise UnknownEntity(f"unknown object {object_id!r}")

    def slot(self, slot_id: str) -> Slot:
        try:
            return self._slots[slot_id]
        except KeyError:
            raise UnknownEntity(f"unknown slot {slot_id!r}") from None

    def region_of_slot(self, slot_id: str) -> str:
        try:
            return self._region_of_slot[slot_id]
        except KeyError:
            raise UnknownEntity(f"unknown slot {slot_id!r}") from None

    @property
    def slot_ids(self) -> list[str]:
        return sorted(self._slots)

    @property
    def region_ids(self) -> list[str]:
        return sorted(r.id for r in self.regions)

    @property
    def object_ids(self) -> list[str]:
        return sorted(o.id for o in self.objects)

    @property
    def locations(self) -> list[str]:
        """Navigation locations: every slot plus every region approach point."""
        return sorted(self._slots) + sorted(r.id for r in self.regions)

    def location_point(self, loc: str) -> tuple[float, float]:
        if loc in self._slots:
            return self._slots[loc].access_point
        return self.region(loc).approach_point

    def obstacles(self) -> list[Rect]:
        return [r.footprint for r in self.regions]

    def with_move_costs(self, table) -> "Environment":
        return Environment(
            self.seed, self.width, self.height, self.regions, self.objects,
            self.robot_radius, self.task_distribution, self.initial_state, table,
        )

    def with_tasks(self, dist: TaskDistribution) -> "Environment":
        return Environment(
            self.seed, self.width, self.height, self.regions, self.objects,
            self.robot_radius, dist, self.initial_state, self.move_costs,
        )

    def with_initial_state(self, state: WorldState) -> "Environment":
        return Environment(
            self.seed, self.width, self.height, self.regions, self.objects,
            self.robot_radius, self.task_distribution, state, self.move_costs,
        )

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        foot = [r.footprint for r in self.regions]
        for i, a in enumerate(foot):
            if a.xmin < 0 or a.ymin < 0 or a.xmax > self.width or a.ymax > self.height:
                raise BlockworldError(f"region {self.regions[i].id} leaves the workspace")
            for b in foot[i + 1:]:
                if a.overlaps(b):
                    raise BlockworldError("region footprints overlap")
        for region in self.regions:
            if region.color not in PALETTE.values():
                raise BlockworldError(f"region {region.id} color is off-palette")
            for slot in region.slots:
                if not region.footprint.contains(*slot.position):
                    raise BlockworldError(f"slot {slot.id} outside its region")
            if any(f.contains(*region.approach_point) for f in foot):
                raise BlockworldError(f"approach point of {region.id} is inside a footprint")
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise BlockworldError("duplicate object ids")
        validate_state(self, self.initial_state)


def validate_state(env: Environment, s: WorldState) -> None:
    seen = set()
    for obj, slot in s.placements:
        env.object(obj)
        env.slot(slot)
        if slot in seen:
            raise BlockworldError(f"slot {slot} holds more than one object")
        seen.add(slot)
    placed = {o for o, _ in s.placements}
    if s.holding is not None:
        env.object(s.holding)
        if s.holding in placed:
            raise BlockworldError(f"{s.holding} is both held and placed")
    expected = set(env.object_ids)
    present = placed | ({s.holding} if s.holding else set())
    if present != expected:
        raise BlockworldError(f"objects unaccounted for: {sorted(expected ^ present)}")
    if s.robot_at not in env._slots and s.robot_at not in {r.id for r in env.regions}:
        raise UnknownEntity(f"unknown robot location {s.robot_at!r}")


# ---------------------------------------------------------------------------
# Task semantics and transitions
# ---------------------------------------------------------------------------


def check_task(env: Environment, task: TaskSpec) -> None:
    ids = set(env.object_ids)
    regions = set(env.region_ids)
    for obj, region in task.directives:
        if obj not in ids:
            raise UnknownEntity(f"task references unknown object {obj!r}")
        if region not in regions:
            raise UnknownEntity(f"task references unknown region {region!r}")


def is_task_satisfied(env: Environment, s: WorldState, task: TaskSpec) -> bool:
    check_task(env, task)
    if s.holding is not None:
        return False
    where = s.placement_map
    for obj, region in task.directives:
        slot = where.get(obj)
        if slot is None or env.region_of_slot(slot) != region:
            return False
    return True


def apply_action(env: Environment, s: WorldState, action) -> WorldState:
    """Apply a ground ``pick``/``place``/``move`` action to ``s``.

    ``action`` needs ``name`` and ``args`` in the blockworld domain's argument
    order: ``pick(r, b, s, g)``, ``place(r, b, s, g)``, ``move(r, from, to)``.
    The three-argument ``pick(r, b, s)`` form is accepted as well.
    """
    name, args = action.name, tuple(action.args)
    if name == "move":
        _, src, dst = args
        if s.robot_at != src:
            raise PreconditionViolation(f"robot is at {s.robot_at}, not {src}")
        if dst not in env._slots and dst not in {r.id for r in env.regions}:
            raise UnknownEntity(f"unknown location {dst!r}")
        return WorldState(s.placements, dst, s.holding)
    if name == "pick":
        obj, slot = args[1], args[2]
        if s.holding is not None:
            raise PreconditionViolation(f"hand is not empty (holding {s.holding})")
        if s.robot_at != slot:
            raise PreconditionViolation(f"robot is at {s.robot_at}, not {slot}")
        if s.slot_of(obj) != slot:
            raise PreconditionViolation(f"{obj} is not in {slot}")
        placements = tuple(p for p in s.placements if p[0] != obj)
        return WorldState(placements, s.robot_at, obj)
    if name == "place":
        obj, slot = args[1], args[2]
        if s.holding != obj:
            raise PreconditionViolation(f"robot is not holding {obj}")
        if s.robot_at != slot:
            raise PreconditionViolation(f"robot is at {s.robot_at}, not {slot}")
        if slot in s.occupied():
            raise PreconditionViolation(f"slot {slot} is occupied")
        env.slot(slot)
        placements = tuple(sorted(s.placements + ((obj, slot),)))
        return WorldState(placements, s.robot_at, None)
    raise BlockworldError(f"unknown action {name!r}")


def sample_task(dist: TaskDistribution, rng: np.random.Generator) -> TaskSpec:
    i = rng.choice(len(dist.entries), p=dist.probabilities)
    return dist.entries[int(i)][0]


def random_state(env: Environment, rng: np.random.Generator) -> WorldState:
    """Random legal placement of every object plus a random robot location."""
    slots = env.slot_ids
    chosen = rng.choice(len(slots), size=len(env.objects), replace=False)
    placements = {obj: slots[int(j)] for obj, j in zip(env.object_ids, chosen)}
    locs = env.locations
    robot_at = locs[int(rng.integers(len(locs)))]
    return WorldState.make(placements, robot_at)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GenerationParams:
    width: float = 10.0
    height: float = 10.0
    n_regions: tuple[int, int] = (5, 7)
    slots_per_region: tuple[int, int] = (2, 4)
    n_objects: tuple[int, int] = (5, 8)
    n_tasks: tuple[int, int] = (20, 25)
    colors: tuple[str, ...] = ("red", "blue", "green", "yellow", "white")
    robot_radius: float = 0.2
    slot_spacing: float = 0.6
    region_depth: float = 0.6
    # free space kept around every footprint so access points stay reachable
    region_clearance: float = 1.0
    # fraction of tasks with two directives
    two_directive_fraction: float = 0.5
    max_attempts: int = 1000
    move_cost_scale: float = 25.0


def _layout_regions(rng: np.random.Generator, p: GenerationParams) -> list[Region]:
    n_regions = int(rng.integers(p.n_regions[0], p.n_regions[1] + 1))
    colored = [c for c in p.colors if c != WHITE]
    # at least one white region and two non-white regions
    colors = [WHITE, colored[int(rng.integers(len(colored)))]]
    rest = [c for c in colored if c != colors[1]]
    colors.append(rest[int(rng.integers(len(rest)))])
    while len(colors) < n_regions:
        colors.append(p.colors[int(rng.integers(len(p.colors)))])
    colors = [colors[int(i)] for i in rng.permutation(len(colors))]
    n_slots = [int(rng.integers(p.slots_per_region[0], p.slots_per_region[1] + 1)) for _ in colors]

    offset = p.robot_radius + 0.15
    for _ in range(p.max_attempts):
        placed: list[tuple[Rect, int, bool]] = []
        ok = True
        for k in n_slots:
            length = k * p.slot_spacing
            horizontal = bool(rng.integers(2))
            w, h = (length, p.region_depth) if horizontal else (p.region_depth, length)
            m = p.region_clearance
            if p.width - 2 * m < w or p.height - 2 * m < h:
                ok = False
                break
            for _ in range(200):
                x0 = float(rng.uniform(m, p.width - m - w))
                y0 = float(rng.uniform(m, p.height - m - h))
                rect = Rect(round(x0, 3), round(y0, 3), round(x0 + w, 3), round(y0 + h, 3))
                grown = rect.inflate(m)
                if not any(grown.overlaps(other) for other, _, _ in placed):
                    break
            else:
                ok = False
                break
            placed.append((rect, k, horizontal))
        if not ok:
            continue
        counts: dict[str, int] = {}
        regions = []
        for color, (rect, k, horizontal) in zip(colors, placed):
            counts[color] = counts.get(color, 0) + 1
            rid = color if counts[color] == 1 else f"{color}{counts[color]}"
            # robot works from the side facing away from the nearest wall
            if horizontal:
                side = -1 if (rect.ymin + rect.ymax) / 2 > p.height / 2 else 1
                yacc = rect.ymin - offset if side < 0 else rect.ymax + offset
                ymid = (rect.ymin + rect.ymax) / 2
                slots = []
                for j in range(k):
                    x = rect.xmin + (j + 0.5) * p.slot_spacing
                    slots.append(Slot(f"{rid}_s{j}", (round(x, 3), round(ymid, 3)),
                                      (round(x, 3), round(yacc, 3))))
                approach = (round((rect.xmin + rect.xmax) / 2, 3), round(yacc, 3))
            else:
                side = -1 if (rect.xmin + rect.xmax) / 2 > p.width / 2 else 1
                xacc = rect.xmin - offset if side < 0 else rect.xmax + offset
                xmid = (rect.xmin + rect.xmax) / 2
                slots = []
                for j in range(k):
                    y = rect.ymin + (j + 0.5) * p.slot_spacing
                    slots.append(Slot(f"{rid}_s{j}", (round(xmid, 3), round(y, 3)),
                                      (round(xacc, 3), round(y, 3))))
                approach = (round(xacc, 3), round((rect.ymin + rect.ymax) / 2, 3))
            regions.append(Region(rid, PALETTE[color], rect, tuple(slots), approach))
        return regions
    raise GenerationFailure(
        f"no non-overlapping layout found after {p.max_attempts} attempts"
    )


def _make_objects(rng: np.random.Generator, p: GenerationParams) -> list[ObjectDef]:
    n = int(rng.integers(p.n_objects[0], p.n_objects[1] + 1))
    colored = [c for c in p.colors if c != WHITE]
    colors = [WHITE] + [colored[int(rng.integers(len(colored)))] for _ in range(2)]
    while len(colors) < n:
        colors.append(p.colors[int(rng.integers(len(p.colors)))])
    colors = [colors[int(i)] for i in rng.permutation(len(colors))]
    return [ObjectDef(chr(ord("A") + i), PALETTE[c]) for i, c in enumerate(colors)]


def _candidate_tasks(env: Environment, rng: np.random.Generator, p: GenerationParams,
                     n_tasks: int) -> list[TaskSpec]:
    objs = [o.id for o in env.objects if o.color_name != WHITE]
    regions = [r for r in env.regions if r.color_name != WHITE]
    capacity = {r.id: len(r.slots) for r in regions}
    tasks: list[TaskSpec] = []
    seen = set()
    singles = len(objs) * len(regions)
    budget = 50 * n_tasks
    while len(tasks) < n_tasks and budget > 0:
        budget -= 1
        two = len(objs) >= 2 and rng.random() < p.two_directive_fraction
        if not two and len(seen) >= singles:
            two = len(objs) >= 2
        k = 2 if two else 1
        chosen = [objs[int(i)] for i in rng.choice(len(objs), size=k, replace=False)]
        targets = [regions[int(rng.integers(len(regions)))].id for _ in chosen]
        if any(targets.count(t) > capacity[t] for t in targets):
            continue
        task = TaskSpec(tuple(zip(chosen, targets)))
        key = frozenset(task.directives)
        if key in seen:
            continue
        seen.add(key)
        tasks.append(task)
    return tasks


def generate_environment(seed: int, params: GenerationParams | None = None) -> Environment:
    """Procedurally generate an environment, deterministic per ``(seed, params)``.

    The layout is rejection-sampled; move costs come from a Lazy PRM over the
    layout, and every task in the distribution is checked solvable from the
    initial state with the optimal planner (unsolvable draws are resampled).
    """
    from .motion import compute_move_costs
    from .planner import optimal_cost, Unsolvable

    p = params or GenerationParams()
    rng = np.random.default_rng(seed)
    regions = _layout_regions(rng, p)
    objects = _make_objects(rng, p)
    n_slots = sum(len(r.slots) for r in regions)
    if n_slots <= len(objects):
        raise GenerationFailure("layout has no free slot")
    placeholder = TaskDistribution.uniform([TaskSpec(((objects[0].id, regions[0].id),))])
    env = Environment(seed, p.width, p.height, tuple(regions), tuple(objects),
                      p.robot_radius, placeholder, WorldState((), regions[0].id, None))
    s0 = random_state(env, rng)
    s0 = s0.with_robot(env.region_ids[int(rng.integers(len(regions)))])
    env = env.with_initial_state(s0)
    env = env.with_move_costs(compute_move_costs(env, p.move_cost_scale, seed=seed))

    n_tasks = int(rng.integers(p.n_tasks[0], p.n_tasks[1] + 1))
    accepted: list[TaskSpec] = []
    for _ in range(p.max_attempts):
        if len(accepted) >= n_tasks:
            break
        for task in _candidate_tasks(env, rng, p, n_tasks - len(accepted)):
            if any(set(task.directives) == set(t.directives) for t in accepted):
                continue
            try:
                optimal_cost(env, s0, task)
            except Unsolvable:
                continue
            accepted.append(task)
    if len(accepted) < p.n_tasks[0]:
        raise GenerationFailure(f"only {len(accepted)} solvable tasks for seed {seed}")
    env = env.with_tasks(TaskDistribution.uniform(accepted[:n_tasks]))
    env.validate()
    return env


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def state_to_dict(s: WorldState) -> dict:
    return {"placements": dict(s.placements), "robot_at": s.robot_at, "holding": s.holding}


def state_from_dict(d: Mapping) -> WorldState:
    return WorldState.make(d["placements"], d["robot_at"], d.get("holding"))


def env_to_dict(env: Environment) -> dict:
    d = {
        "schema_version": SCHEMA_VERSION,
        "seed": env.seed,
        "width": env.width,
        "height": env.height,
        "robot_radius": env.robot_radius,
        "regions": [
            {
                "id": r.id,
                "color": list(r.color),
                "footprint": [r.footprint.xmin, r.footprint.ymin, r.footprint.xmax, r.footprint.ymax],
                "approach_point": list(r.approach_point),
                "slots": [
                    {"id": s.id, "position": list(s.position), "access_point": list(s.access_point)}
                    for s in r.slots
                ],
            }
            for r in env.regions
        ],
        "objects": [
            {"id": o.id, "color": list(o.color), "semantic_class": o.semantic_class}
            for o in env.objects
        ],
        "placements": dict(env.initial_state.placements),
        "robot_at": env.initial_state.robot_at,
        "holding": env.initial_state.holding,
        "task_distribution": [
            {"directives": [list(d) for d in t.directives], "probability": prob}
            for t, prob in env.task_distribution.entries
        ],
    }
    if env.move_costs is not None:
        d["move_costs"] = env.move_costs.to_dict()
    return d


def env_from_dict(d: Mapping) -> Environment:
    from .motion import MoveCostTable

    if d.get("schema_version") != SCHEMA_VERSION:
        raise BlockworldError(f"unsupported schema_version {d.get('schema_version')!r}")
    regions = []
    for r in d["regions"]:
        slots = tuple(
            Slot(s["id"], tuple(s["position"]), tuple(s["access_point"])) for s in r["slots"]
        )
        regions.append(Region(r["id"], tuple(r["color"]), Rect(*r["footprint"]), slots,
                              tuple(r["approach_point"])))
    objects = tuple(ObjectDef(o["id"], tuple(o["color"]), o.get("semantic_class", "block"))
                    for o in d["objects"])
    dist = TaskDistribution(tuple(
        (TaskSpec(tuple(tuple(x) for x in e["directives"])), e["probability"])
        for e in d["task_distribution"]
    ))
    state = WorldState.make(d["placements"], d["robot_at"], d.get("holding"))
    table = MoveCostTable.from_dict(d["move_costs"]) if "move_costs" in d else None
    return Environment(d["seed"], d["width"], d["height"], tuple(regions), objects,
                       d["robot_radius"], dist, state, table)


def dumps_env(env: Environment) -> str:
    return json.dumps(env_to_dict(env), indent=1) + "\n"


def save_env(env: Environment, directory: str | Path) -> Path:
    path = Path(directory) / f"env_{env.seed}.json"
    path.write_text(dumps_env(env))
    return path


def load_env(path: str | Path) -> Environment:
    return env_from_dict(json.loads(Path(path).read_text()))


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


# Named parameter sets.  "dense" is the most crowded corner of the default
# ranges (5 regions x 2 slots, 8 objects): regions fill up, so where displaced
# objects are parked matters for later tasks.
PROFILES: dict[str, GenerationParams] = {
    "default": GenerationParams(),
    "dense": GenerationParams(n_regions=(5, 5), slots_per_region=(2, 2), n_objects=(8, 8)),
}


def profile_params(name: str) -> GenerationParams:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown generation profile {name!r}; "
                         f"expected one of {sorted(PROFILES)}") from None


@lru_cache(maxsize=16)
def environment_for_seed(seed: int, profile: str = "default") -> Environment:
    """``generate_environment`` with a named parameter profile, memoized."""
    return generate_environment(seed, profile_params(profile))
