"""Reconfigure an environment before any task arrives and show what it buys.

Run from the repository root::

    python demos/prepare_then_plan.py [env_seed] [iterations]
"""
from __future__ import annotations

import sys

import numpy as np

from antiplan.anticipatory import ExactEstimator
from antiplan.ap_search import prepare_trace
from antiplan.blockworld import environment_for_seed


def main(seed: int = 1000, iterations: int = 50) -> None:
    env = environment_for_seed(seed, "dense")
    est = ExactEstimator(env)
    res = prepare_trace(env, env.initial_state, est, iterations, np.random.default_rng(0))
    print(f"expected next-task cost  before {res.initial_value:8.1f}  after {res.value:8.1f}")
    print(f"accepted {res.accepted} of {res.iterations} iterations, "
          f"{len(res.actions)} actions costing {res.action_cost:.1f}")
    for a in res.actions:
        print(f"  {a}")


if __name__ == "__main__":
    args = [int(x) for x in sys.argv[1:3]]
    main(*args)
