"""Plan one task myopically and anticipatorily, then compare expected totals.

Run from the repository root::

    python demos/anticipate_one_task.py [env_seed]
"""
from __future__ import annotations

import sys

import numpy as np

from antiplan.anticipatory import ExactEstimator
from antiplan.ap_search import anticipatory_plan, expected_total, myopic_plan
from antiplan.blockworld import environment_for_seed, sample_task


def main(seed: int = 1000) -> None:
    env = environment_for_seed(seed, "dense")
    est = ExactEstimator(env)
    rng = np.random.default_rng(seed)
    s0 = env.initial_state
    for _ in range(5):
        task = sample_task(env.task_distribution, rng)
        myo = myopic_plan(env, s0, task, est)
        ap = anticipatory_plan(env, s0, task, est)
        print(f"task {task}")
        print(f"  myopic        now {myo.immediate:8.1f}  next {myo.future:8.1f}  "
              f"total {expected_total(env, s0, myo):8.1f}")
        print(f"  anticipatory  now {ap.immediate:8.1f}  next {ap.future:8.1f}  "
              f"total {expected_total(env, s0, ap):8.1f}  ({ap.candidates_evaluated} candidates)")
        # follow the anticipatory choice so later tasks see its side effects
        s0 = ap.state


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1000)
