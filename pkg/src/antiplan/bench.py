"""Benchmark harness: task sequences under four planner configurations.

Configurations:

``myopic``
    solve each task optimally on its own.
``ap``
    pick each task's goal state with :func:`~antiplan.ap_search.anticipatory_plan`.
``prep+myopic`` / ``prep+ap``
    the same, after :func:`~antiplan.ap_search.prepare` reconfigures the
    initial state (preparation is free unless ``charge_prep`` is set).

Task sequences are drawn per ``(seed, env, sequence)`` so every
configuration sees identical tasks.  Results are CSV rows, one per task.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._parallel import ordered_map
from .anticipatory import EstimatorModel, ExactEstimator, LearnedEstimator, penalty_cost
from .ap_search import MAX_CANDIDATES, anticipatory_plan, myopic_plan, prepare_trace
from .blockworld import (Environment, TaskSpec, WorldState, environment_for_seed, profile_params,
                         sample_task)
from .planner import Unsolvable

log = logging.getLogger(__name__)

CSV_VERSION = 1
CSV_COLUMNS = ("env_seed", "sequence_id", "task_index", "config", "task_cost",
               "cumulative_cost", "wall_ms")
CSV_HEADER_COMMENT = f"# antiplan bench csv v{CSV_VERSION}: " + ",".join(CSV_COLUMNS)
CONFIGURATIONS = ("myopic", "ap", "prep+myopic", "prep+ap")
# stream tags for derived generators
_TASKS, _PREP = 0, 1


class BenchError(RuntimeError):
    pass


@dataclass(frozen=True)
class BenchConfig:
    env_seeds: tuple[int, ...]
    sequences_per_env: int
    tasks_per_sequence: int
    configurations: tuple[str, ...] = CONFIGURATIONS
    estimator: str = "exact"
    model_path: str | None = None
    seed: int = 0
    prep_iterations: int = 200
    max_candidates: int = MAX_CANDIDATES
    charge_prep: bool = False
    timing: bool = False
    workers: int | None = None
    profile: str = "dense"

    def __post_init__(self):
        object.__setattr__(self, "env_seeds", tuple(int(s) for s in self.env_seeds))
        object.__setattr__(self, "configurations", tuple(self.configurations))
        if not self.env_seeds:
            raise ValueError("env_seeds is empty")
        if self.sequences_per_env < 1 or self.tasks_per_sequence < 1:
            raise ValueError("sequence and task counts must be at least 1")
        if self.prep_iterations < 1:
            raise ValueError("prep_iterations must be at least 1")
        unknown = set(self.configurations) - set(CONFIGURATIONS)
        if unknown or not self.configurations:
            raise ValueError(f"unknown configurations {sorted(unknown)}; "
                             f"choose from {', '.join(CONFIGURATIONS)}")
        if self.estimator not in ("exact", "learned"):
            raise ValueError(f"estimator must be 'exact' or 'learned', got {self.estimator!r}")
        profile_params(self.profile)
        if self.estimator == "learned" and not self.model_path:
            raise ValueError("the learned estimator needs model_path")

    @classmethod
    def preset(cls, name: str, **overrides) -> "BenchConfig":
        if name == "desk":
            base = dict(env_seeds=tuple(range(1000, 1008)), sequences_per_env=20, tasks_per_sequence=5)
        elif name == "full":
            base = dict(env_seeds=tuple(range(1000, 1032)), sequences_per_env=100, tasks_per_sequence=10)
        else:
            raise ValueError(f"unknown preset {name!r}; expected 'desk' or 'full'")
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["env_seeds"] = list(self.env_seeds)
        d["configurations"] = list(self.configurations)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known - {"preset"}
        if extra:
            raise ValueError(f"unknown bench config keys: {sorted(extra)}")
        d = dict(d)
        preset = d.pop("preset", None)
        if preset is not None:
            return cls.preset(preset, **d)
        return cls(**d)


@dataclass(frozen=True)
class BenchRecord:
    env_seed: int
    sequence_id: int
    task_index: int
    config: str
    task_cost: float
    cumulative_cost: float
    wall_ms: float = 0.0
    unsolvable: bool = field(default=False, compare=False)

    def row(self) -> list[str]:
        return [str(self.env_seed), str(self.sequence_id), str(self.task_index), self.config,
                repr(float(self.task_cost)), repr(float(self.cumulative_cost)),
                repr(float(self.wall_ms))]


def task_sequence(env: Environment, seed: int, sequence_id: int, length: int) -> list[TaskSpec]:
    rng = np.random.default_rng([seed, env.seed, _TASKS, sequence_id])
    return [sample_task(env.task_distribution, rng) for _ in range(length)]


def make_estimator(env: Environment, config: BenchConfig, model: EstimatorModel | None = None):
    if config.estimator == "exact":
        return ExactEstimator(env)
    if model is None:
        model = EstimatorModel.load(config.model_path)
    return LearnedEstimator(model, env)


def run_sequence(env: Environment, s0: WorldState, tasks: Sequence[TaskSpec], config: str,
                 est=None, env_seed: int | None = None, sequence_id: int = 0,
                 max_candidates: int = MAX_CANDIDATES, initial_cost: float = 0.0,
                 timing: bool = False) -> list[BenchRecord]:
    """Execute ``tasks`` in order, carrying the state from one task to the next.

    ``config`` is ``"myopic"`` or ``"ap"`` (preparation is applied by the
    caller, who passes the prepared ``s0`` and, if charged, its cost as
    ``initial_cost``).  Unsolvable tasks leave the state unchanged and cost
    :func:`~antiplan.anticipatory.penalty_cost`.
    """
    mode = config.split("+")[-1]
    if mode not in ("myopic", "ap"):
        raise ValueError(f"unknown configuration {config!r}")
    if mode == "ap" and est is None:
        raise ValueError("the ap configuration needs an estimator")
    seed = env.seed if env_seed is None else env_seed
    records = []
    state = s0
    total = 0.0
    for i, task in enumerate(tasks, start=1):
        t0 = time.perf_counter()
        unsolvable = False
        try:
            if mode == "ap":
                res = anticipatory_plan(env, state, task, est, max_candidates)
            else:
                res = myopic_plan(env, state, task)
            cost = res.immediate
            state = res.state
        except Unsolvable:
            cost = penalty_cost(env)
            unsolvable = True
            log.warning("env %s sequence %d task %d (%s) unsolvable; penalty %.1f",
                        seed, sequence_id, i, task, cost)
        if i == 1:
            cost += initial_cost
        total += cost
        ms = (time.perf_counter() - t0) * 1000.0 if timing else 0.0
        records.append(BenchRecord(seed, sequence_id, i, config, cost, total, ms, unsolvable))
    return records


def _run_env(job) -> list[BenchRecord]:
    config, env_seed, todo = job
    env = environment_for_seed(env_seed, config.profile)
    est = make_estimator(env, config)
    prepared = None
    records = []
    for seq in range(config.sequences_per_env):
        tasks = task_sequence(env, config.seed, seq, config.tasks_per_sequence)
        for name in config.configurations:
            if (seq, name) not in todo:
                continue
            s0, extra = env.initial_state, 0.0
            if name.startswith("prep+"):
                if prepared is None:
                    prepared = prepare_trace(env, env.initial_state, est, config.prep_iterations,
                                             np.random.default_rng([config.seed, env_seed, _PREP]))
                s0 = prepared.state
                extra = prepared.action_cost if config.charge_prep else 0.0
            records.extend(run_sequence(env, s0, tasks, name, est, env_seed, seq,
                                        config.max_candidates, extra, config.timing))
    return records


def _group_key(r: BenchRecord):
    return (r.env_seed, r.sequence_id, r.config)


def _sort_key(r: BenchRecord, order: dict):
    return (r.env_seed, r.sequence_id, order.get(r.config, 99), r.task_index)


def run_bench(config: BenchConfig, out: str | Path | None = None,
              resume: bool = True) -> list[BenchRecord]:
    """Run every (environment, sequence, configuration) group and return all records.

    With ``out`` the rows are appended to a CSV as each environment finishes.
    An existing file is resumed: complete groups are kept, missing ones are
    run, and a truncated trailing row is discarded.
    """
    done: set = set()
    existing: list[BenchRecord] = []
    path = Path(out) if out is not None else None
    if path is not None and path.exists() and resume:
        existing = _complete_groups(read_csv(path, strict=False), config.tasks_per_sequence)
        done = {_group_key(r) for r in existing}
        _write_csv(path, existing)
    elif path is not None:
        _write_csv(path, [])

    jobs = []
    for env_seed in config.env_seeds:
        todo = {(seq, name) for seq in range(config.sequences_per_env)
                for name in config.configurations if (env_seed, seq, name) not in done}
        if todo:
            jobs.append((config, env_seed, todo))

    order = {c: i for i, c in enumerate(CONFIGURATIONS)}
    results = list(existing)

    def sink(records):
        records = sorted(records, key=lambda r: _sort_key(r, order))
        check_prefix_sums(records)
        if path is not None:
            with path.open("a", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                for r in records:
                    w.writerow(r.row())
        results.extend(records)

    if len(jobs) <= 1 or (config.workers or 0) == 1:
        for job in jobs:
            sink(_run_env(job))
    else:
        for records in ordered_map(_run_env, jobs, config.workers):
            sink(records)
    return sorted(results, key=lambda r: _sort_key(r, order))


def _complete_groups(records: list[BenchRecord], n_tasks: int) -> list[BenchRecord]:
    groups: dict = {}
    for r in records:
        groups.setdefault(_group_key(r), []).append(r)
    keep = []
    for key, rs in groups.items():
        if sorted(r.task_index for r in rs) == list(range(1, n_tasks + 1)):
            keep.extend(rs)
    kept = set(id(r) for r in keep)
    return [r for r in records if id(r) in kept]


def _write_csv(path: Path, records: Iterable[BenchRecord]) -> None:
    with path.open("w", newline="") as fh:
        fh.write(CSV_HEADER_COMMENT + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.row())


def records_to_csv(records: Iterable[BenchRecord]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER_COMMENT + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def read_csv(path: str | Path, strict: bool = True) -> list[BenchRecord]:
    """Parse a bench CSV.  Non-strict mode drops a malformed trailing row."""
    lines = Path(path).read_text().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    if not body or tuple(body[0].split(",")) != CSV_COLUMNS:
        raise BenchError(f"{path}: missing or unexpected CSV header")
    out = []
    rows = list(csv.reader(body[1:]))
    for k, row in enumerate(rows):
        try:
            if len(row) != len(CSV_COLUMNS):
                raise ValueError("wrong column count")
            out.append(BenchRecord(int(row[0]), int(row[1]), int(row[2]), row[3],
                                   float(row[4]), float(row[5]), float(row[6])))
        except ValueError as exc:
            if strict or k != len(rows) - 1:
                raise BenchError(f"{path}: bad row {k + 1}: {exc}") from None
    return out


def check_prefix_sums(records: Sequence[BenchRecord]) -> None:
    """Raise if a cumulative column is not the running sum of its group's task costs."""
    running: dict = {}
    for r in sorted(records, key=lambda r: (_group_key(r), r.task_index)):
        key = _group_key(r)
        total = running.get(key, 0.0) + r.task_cost
        if total != r.cumulative_cost:
            raise BenchError(f"cumulative cost mismatch at {key} index {r.task_index}")
        running[key] = total


# ---------------------------------------------------------------------------
# Summary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Summary:
    mean_cost: dict
    per_index: dict
    improvement: dict
    slope: dict
    counts: dict

    def to_dict(self) -> dict:
        return {"mean_cost": self.mean_cost,
                "per_index": {c: {str(i): v for i, v in d.items()} for c, d in self.per_index.items()},
                "improvement_vs_myopic": self.improvement, "slope": self.slope,
                "records": self.counts}

    def table(self) -> str:
        lines = [f"{'config':<12} {'mean cost':>10} {'vs myopic':>10} {'slope':>9} {'n':>6}"]
        for c in self.mean_cost:
            imp = self.improvement.get(c)
            imp_s = f"{100 * imp:9.2f}%" if imp is not None else f"{'-':>10}"
            lines.append(f"{c:<12} {self.mean_cost[c]:10.2f} {imp_s} {self.slope[c]:9.3f} "
                         f"{self.counts[c]:6d}")
        idx = sorted({i for d in self.per_index.values() for i in d})
        lines.append("")
        lines.append(f"{'index':<6}" + "".join(f"{c:>13}" for c in self.mean_cost))
        for i in idx:
            cells = "".join(f"{self.per_index[c].get(i, float('nan')):13.2f}" for c in self.mean_cost)
            lines.append(f"{i:<6}{cells}")
        return "\n".join(lines)


def summarize(records: Sequence[BenchRecord]) -> Summary:
    """Per-configuration mean task cost, per-index means, improvement vs myopic, index slope."""
    if not records:
        raise ValueError("no records to summarize")
    order = {c: i for i, c in enumerate(CONFIGURATIONS)}
    configs = sorted({r.config for r in records}, key=lambda c: (order.get(c, 99), c))
    mean, per_index, slope, counts = {}, {}, {}, {}
    for c in configs:
        rs = [r for r in records if r.config == c]
        counts[c] = len(rs)
        mean[c] = float(np.mean([r.task_cost for r in rs]))
        by: dict = {}
        for r in rs:
            by.setdefault(r.task_index, []).append(r.task_cost)
        per_index[c] = {i: float(np.mean(v)) for i, v in sorted(by.items())}
        xs = np.array(sorted(by), dtype=float)
        ys = np.array([per_index[c][int(x)] for x in xs])
        slope[c] = float(np.polyfit(xs, ys, 1)[0]) if len(xs) > 1 else 0.0
    improvement = {}
    if "myopic" in mean and mean["myopic"] != 0:
        for c in configs:
            improvement[c] = (mean["myopic"] - mean[c]) / mean["myopic"]
    return Summary(mean, per_index, improvement, slope, counts)


def load_config(path: str | Path) -> BenchConfig:
    return BenchConfig.from_dict(json.loads(Path(path).read_text()))


def with_overrides(config: BenchConfig, **kw) -> BenchConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
