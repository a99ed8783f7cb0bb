"""Anticipatory cost of a world state: exact enumeration and a learned graph regressor.

The anticipatory cost of ``s`` is the expected optimal cost of one follow-up
task drawn from the environment's task distribution::

    V_ap(s) = sum_t P(t) * V*_t(s)

:func:`exact_anticipatory_cost` computes it by solving every task.  The
learned estimator encodes ``s`` as a containment graph
(:func:`encode_state`) and regresses the cost with three mean-aggregation
message-passing layers followed by mean pooling and a linear readout.
Gradients are derived by hand; :func:`loss_and_grad` is checked against
finite differences in the test suite.
"""

from __future__ import annotations

import json
import logging
import weakref
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._parallel import ordered_map
from .blockworld import (
    Environment,
    TaskDistribution,
    WorldState,
    environment_for_seed,
    random_state,
    state_from_dict,
    state_to_dict,
)
from .planner import Unsolvable, optimal_cost

log = logging.getLogger(__name__)

MODEL_SCHEMA_VERSION = 1
FEATURE_DIM = 9
NEGATIVE_SLOPE = 0.01

# entity-type one-hot positions
ROOM, LOCATION, OBJECT = 0, 1, 2
PENALTY_FACTOR = 10.0


# ---------------------------------------------------------------------------
# Exact anticipatory cost
# ---------------------------------------------------------------------------

_VALUES: "weakref.WeakKeyDictionary[Environment, dict]" = weakref.WeakKeyDictionary()


def penalty_cost(env: Environment) -> float:
    """Cost charged for a task that cannot be solved.

    Ten times the largest task cost from the environment's initial state,
    where every task is solvable by construction.
    """
    cache = _VALUES.setdefault(env, {})
    p = cache.get("__penalty__")
    if p is None:
        costs = []
        for task in env.task_distribution.tasks:
            try:
                costs.append(optimal_cost(env, env.initial_state, task))
            except Unsolvable:
                pass
        p = PENALTY_FACTOR * max(costs) if costs else PENALTY_FACTOR * 1000.0
        cache["__penalty__"] = p
    return p


def task_cost_or_penalty(env: Environment, s: WorldState, task) -> float:
    try:
        return optimal_cost(env, s, task)
    except Unsolvable:
        p = penalty_cost(env)
        log.warning("task %s unsolvable from %s; charging penalty %.1f", task, s, p)
        return p


def exact_anticipatory_cost(env: Environment, s: WorldState,
                            distribution: TaskDistribution | None = None) -> float:
    """Expected optimal cost of one task drawn from ``distribution``, starting at ``s``.

    Parameters
    ----------
    env : Environment
    s : WorldState
    distribution : TaskDistribution, optional
        Defaults to ``env.task_distribution``; results for the default are
        memoized per environment.

    Returns
    -------
    float
        Cost units.  Unsolvable tasks contribute :func:`penalty_cost`.
    """
    if distribution is None:
        cache = _VALUES.setdefault(env, {})
        v = cache.get(s)
        if v is None:
            v = cache[s] = _expectation(env, s, env.task_distribution)
        return v
    return _expectation(env, s, distribution)


def _expectation(env, s, dist: TaskDistribution) -> float:
    total = 0.0
    for task, p in dist.entries:
        total += p * task_cost_or_penalty(env, s, task)
    return total


class ExactEstimator:
    """Estimator handle backed by :func:`exact_anticipatory_cost`."""

    name = "exact"

    def __init__(self, env: Environment):
        self.env = env

    def __call__(self, s: WorldState) -> float:
        return exact_anticipatory_cost(self.env, s)


# ---------------------------------------------------------------------------
# State graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateGraph:
    """Node features (n x 9) plus undirected container-contained edges."""

    nodes: np.ndarray
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 2:
            raise ValueError("node features must be a 2-D array")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def to_dict(self) -> dict:
        return {"nodes": [[float(x) for x in row] for row in self.nodes],
                "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_dict(cls, d) -> "StateGraph":
        nodes = np.array(d["nodes"], dtype=float).reshape(-1, FEATURE_DIM)
        return cls(nodes, tuple(tuple(e) for e in d["edges"]))

    def permuted(self, perm: Sequence[int]) -> "StateGraph":
        """Same graph with node ``i`` moved to position ``perm[i]``."""
        perm = np.asarray(perm)
        nodes = np.empty_like(self.nodes)
        nodes[perm] = self.nodes
        return StateGraph(nodes, tuple((int(perm[a]), int(perm[b])) for a, b in self.edges))

    def mean_operator(self) -> np.ndarray:
        """Row-normalized adjacency: row ``v`` averages over the neighbors of ``v``.

        Isolated nodes get an all-zero row.
        """
        n = self.n_nodes
        A = np.zeros((n, n))
        for a, b in self.edges:
            A[a, b] = 1.0
            A[b, a] = 1.0
        deg = A.sum(axis=1, keepdims=True)
        np.divide(A, deg, out=A, where=deg > 0)
        return A


def _feature(kind: int, color, pos, env: Environment) -> list[float]:
    row = [0.0] * FEATURE_DIM
    row[kind] = 1.0
    row[3:7] = [float(c) for c in color]
    row[7] = float(pos[0]) / env.width
    row[8] = float(pos[1]) / env.height
    return row


def encode_state(env: Environment, s: WorldState) -> StateGraph:
    """Containment graph of ``s``.

    Node order: the environment node, regions by id, slots by id, objects by
    id.  Edges: environment-region, region-slot, slot-object; a held object
    hangs off the environment node.  Features are the entity-type one-hot
    (room, location, object), RGBA color and the position scaled by the
    workspace extents.  Slots carry their region's color; the environment
    node has zero color and sits at the workspace center.
    """
    rows = [_feature(ROOM, (0.0, 0.0, 0.0, 0.0), (env.width / 2, env.height / 2), env)]
    edges = []
    index = {}
    region_ids = env.region_ids
    for rid in region_ids:
        r = env.region(rid)
        f = r.footprint
        index[rid] = len(rows)
        rows.append(_feature(LOCATION, r.color, ((f.xmin + f.xmax) / 2, (f.ymin + f.ymax) / 2), env))
        edges.append((0, index[rid]))
    for sid in env.slot_ids:
        slot = env.slot(sid)
        index[sid] = len(rows)
        rows.append(_feature(LOCATION, env.region(env.region_of_slot(sid)).color, slot.position, env))
        edges.append((index[env.region_of_slot(sid)], index[sid]))
    where = s.placement_map
    for oid in env.object_ids:
        obj = env.object(oid)
        i = len(rows)
        if oid in where:
            rows.append(_feature(OBJECT, obj.color, env.slot(where[oid]).position, env))
            edges.append((index[where[oid]], i))
        elif s.holding == oid:
            rows.append(_feature(OBJECT, obj.color, env.location_point(s.robot_at), env))
            edges.append((0, i))
        else:
            raise ValueError(f"object {oid} is neither placed nor held")
    return StateGraph(np.array(rows), tuple(edges))


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass
class EstimatorModel:
    """Weights of the graph regressor.

    ``layers`` holds ``(W_self, W_nbr, bias)`` triples; ``readout`` is
    ``(weight, bias)``.  The network predicts ``label / label_scale``;
    :func:`forward` multiplies the scale back in.
    """

    layers: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    readout: tuple[np.ndarray, float]
    label_scale: float = 1.0

    @property
    def dims(self) -> list[int]:
        return [self.layers[0][0].shape[0]] + [w.shape[1] for w, _, _ in self.layers] + [1]

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list in a fixed order (the readout bias as a 1-element array)."""
        out = []
        for ws, wn, b in self.layers:
            out += [ws, wn, b]
        out += [self.readout[0], np.array([self.readout[1]])]
        return out

    @classmethod
    def from_parameters(cls, params: Sequence[np.ndarray], label_scale: float) -> "EstimatorModel":
        params = [np.array(p, dtype=float) for p in params]
        layers = [(params[i], params[i + 1], params[i + 2]) for i in range(0, len(params) - 2, 3)]
        return cls(layers, (params[-2], float(params[-1][0])), label_scale)

    def copy(self) -> "EstimatorModel":
        return EstimatorModel.from_parameters(self.parameters(), self.label_scale)

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        def mat(a):
            return [[float(x) for x in row] for row in a]

        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "dims": self.dims,
            "negative_slope": NEGATIVE_SLOPE,
            "label_scale": float(self.label_scale),
            "layers": [{"w_self": mat(ws), "w_nbr": mat(wn), "bias": [float(x) for x in b]}
                       for ws, wn, b in self.layers],
            "readout": {"weight": [float(x) for x in self.readout[0]],
                        "bias": float(self.readout[1])},
        }

    @classmethod
    def from_dict(cls, d) -> "EstimatorModel":
        if d.get("schema_version") != MODEL_SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema_version {d.get('schema_version')!r}")
        layers = [(np.array(layer["w_self"], dtype=float), np.array(layer["w_nbr"], dtype=float),
                   np.array(layer["bias"], dtype=float)) for layer in d["layers"]]
        model = cls(layers, (np.array(d["readout"]["weight"], dtype=float),
                             float(d["readout"]["bias"])), float(d["label_scale"]))
        if model.dims != list(d["dims"]):
            raise ValueError(f"weight shapes {model.dims} disagree with header {d['dims']}")
        return model

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict()) + "\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "EstimatorModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def init_model(rng: np.random.Generator, dims: Sequence[int] = (FEATURE_DIM, 32, 32, 32),
               label_scale: float = 1.0) -> EstimatorModel:
    """Glorot-uniform weights, zero biases."""

    def glorot(m, n):
        lim = np.sqrt(6.0 / (m + n))
        return rng.uniform(-lim, lim, size=(m, n))

    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        layers.append((glorot(d_in, d_out), glorot(d_in, d_out), np.zeros(d_out)))
    return EstimatorModel(layers, (glorot(dims[-1], 1)[:, 0], 0.0), label_scale)


def _leaky(z):
    return np.where(z > 0, z, NEGATIVE_SLOPE * z)


def _check_dims(model: EstimatorModel, g: StateGraph):
    if g.nodes.shape[1] != model.layers[0][0].shape[0]:
        raise ValueError(f"graph feature dimension {g.nodes.shape[1]} does not match "
                         f"model input dimension {model.layers[0][0].shape[0]}")


def _forward_raw(model: EstimatorModel, X: np.ndarray, A: np.ndarray, keep: bool = False):
    H = X
    tape = []
    for ws, wn, b in model.layers:
        AH = A @ H
        Z = H @ ws + AH @ wn + b
        if keep:
            tape.append((H, AH, Z))
        H = _leaky(Z)
    pooled = H.mean(axis=0)
    y = float(pooled @ model.readout[0] + model.readout[1])
    return y, pooled, tape


def forward(model: EstimatorModel, g: StateGraph) -> float:
    """Network output in cost units (before clamping)."""
    _check_dims(model, g)
    y, _, _ = _forward_raw(model, g.nodes, g.mean_operator())
    return y * model.label_scale


def estimate(model: EstimatorModel, env: Environment, s: WorldState) -> float:
    """Learned anticipatory cost of ``s``, clamped below at zero."""
    return max(0.0, forward(model, encode_state(env, s)))


class LearnedEstimator:
    """Estimator handle backed by a trained :class:`EstimatorModel`."""

    name = "learned"

    def __init__(self, model: EstimatorModel, env: Environment):
        self.model = model
        self.env = env
        self._cache: dict = {}

    def __call__(self, s: WorldState) -> float:
        v = self._cache.get(s)
        if v is None:
            v = self._cache[s] = estimate(self.model, self.env, s)
        return v


def _backward(model: EstimatorModel, A: np.ndarray, pooled, tape, gy: float) -> list[np.ndarray]:
    w_out = model.readout[0]
    grads_rev: list[np.ndarray] = [np.array([gy]), gy * pooled]
    n = A.shape[0]
    gH = np.broadcast_to(gy * w_out / n, (n, w_out.shape[0]))
    for (ws, wn, _), (H, AH, Z) in zip(reversed(model.layers), reversed(tape)):
        gZ = gH * np.where(Z > 0, 1.0, NEGATIVE_SLOPE)
        grads_rev += [gZ.sum(axis=0), AH.T @ gZ, H.T @ gZ]
        gH = gZ @ ws.T + A.T @ (gZ @ wn.T)
    return grads_rev[::-1]


def loss_and_grad(model: EstimatorModel, batch: Sequence[tuple[StateGraph, float]]
                  ) -> tuple[float, list[np.ndarray]]:
    """Mean absolute error on scaled labels and its gradient for :meth:`EstimatorModel.parameters`.

    ``batch`` holds ``(graph, label)`` pairs with labels in cost units.
    """
    prepared = [(g.nodes, g.mean_operator(), label) for g, label in batch]
    return _loss_and_grad(model, prepared)


def _loss_and_grad(model, prepared):
    grads = [np.zeros_like(p) for p in model.parameters()]
    loss = 0.0
    m = len(prepared)
    for X, A, label in prepared:
        y, pooled, tape = _forward_raw(model, X, A, keep=True)
        r = y - label / model.label_scale
        loss += abs(r) / m
        gy = float(np.sign(r)) / m
        for acc, gi in zip(grads, _backward(model, A, pooled, tape, gy)):
            acc += gi
    return loss, grads


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainingDatum:
    graph: StateGraph
    label: float
    env_seed: int | None = None
    state: WorldState | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        d = {"graph": self.graph.to_dict(), "label": float(self.label)}
        if self.env_seed is not None:
            d["env_seed"] = self.env_seed
        if self.state is not None:
            d["state"] = state_to_dict(self.state)
        return d

    @classmethod
    def from_dict(cls, d) -> "TrainingDatum":
        state = state_from_dict(d["state"]) if "state" in d else None
        return cls(StateGraph.from_dict(d["graph"]), float(d["label"]), d.get("env_seed"), state)


def save_dataset(data: Iterable[TrainingDatum], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for datum in data:
            fh.write(json.dumps(datum.to_dict()) + "\n")
    return path


def load_dataset(path: str | Path) -> list[TrainingDatum]:
    out = []
    with Path(path).open() as fh:
        for line in fh:
            if line.strip():
                out.append(TrainingDatum.from_dict(json.loads(line)))
    return out


def default_split(n_train: int = 250, n_test: int = 150, first_seed: int = 0
                  ) -> tuple[list[int], list[int]]:
    """Consecutive, disjoint environment seeds for training and testing."""
    train = list(range(first_seed, first_seed + n_train))
    return train, list(range(first_seed + n_train, first_seed + n_train + n_test))


def _label_env(job) -> list[TrainingDatum]:
    seed, states_per_env, entropy, profile = job
    env = environment_for_seed(seed, profile)
    rng = np.random.default_rng([entropy, seed])
    out = []
    for _ in range(states_per_env):
        s = random_state(env, rng)
        out.append(TrainingDatum(encode_state(env, s), exact_anticipatory_cost(env, s), seed, s))
    return out


def generate_dataset(env_seeds: Sequence[int], states_per_env: int = 200,
                     rng: np.random.Generator | None = None,
                     workers: int | None = None, profile: str = "default") -> list[TrainingDatum]:
    """Label ``states_per_env`` random hand-empty states per environment with the exact oracle.

    Each environment draws its states from its own generator derived from
    ``rng`` and the seed, so the result does not depend on ``workers``.
    Environments are generated with the named ``profile``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    entropy = int(rng.integers(2**63))
    jobs = [(int(seed), states_per_env, entropy, profile) for seed in env_seeds]
    data = []
    for chunk in ordered_map(_label_env, jobs, workers):
        data.extend(chunk)
    return data


def relabel(datum: TrainingDatum, profile: str = "default") -> float:
    """Recompute a stored datum's label with the exact oracle."""
    if datum.env_seed is None or datum.state is None:
        raise ValueError("datum does not record its environment and state")
    return exact_anticipatory_cost(environment_for_seed(datum.env_seed, profile), datum.state)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    lr: float = 0.01
    batch_size: int = 8
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: int = 32
    n_layers: int = 3


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, beta1: float, beta2: float, eps: float):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def mean_absolute_error(model: EstimatorModel, data: Sequence[TrainingDatum]) -> float:
    """MAE in cost units of the clamped estimate."""
    errs = [abs(max(0.0, forward(model, d.graph)) - d.label) for d in data]
    return float(np.mean(errs))


def train(data: Sequence[TrainingDatum], config: TrainConfig | None = None,
          rng: np.random.Generator | None = None) -> tuple[EstimatorModel, list[float]]:
    """Fit the regressor with Adam on the mean absolute error.

    Labels are divided by their training mean before fitting.  Returns the
    model and the per-epoch mean training loss in cost units (averaged over
    the minibatches of that epoch, measured before each update).
    """
    if not data:
        raise ValueError("training data is empty")
    config = config or TrainConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    labels = np.array([d.label for d in data], dtype=float)
    scale = float(labels.mean())
    if not scale > 0:
        scale = 1.0
    dims = [data[0].graph.nodes.shape[1]] + [config.hidden] * config.n_layers
    model = init_model(rng, dims, scale)
    params = model.parameters()
    opt = Adam(params, config.lr, config.beta1, config.beta2, config.eps)
    prepared = [(d.graph.nodes, d.graph.mean_operator(), d.label) for d in data]
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(prepared))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [prepared[i] for i in order[start:start + config.batch_size]]
            loss, grads = _loss_and_grad(model, batch)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDiverged(
                    f"non-finite loss or gradient at epoch {epoch + 1}, batch {start // config.batch_size}"
                    f" (loss={loss!r}, lr={config.lr})")
            total += loss * len(batch)
            opt.step(grads)
            # the readout bias is stored as a float on the model
            model.readout = (params[-2], float(params[-1][0]))
        history.append(total / len(prepared) * scale)
        log.info("epoch %d: train MAE %.3f", epoch + 1, history[-1])
    return model, history
