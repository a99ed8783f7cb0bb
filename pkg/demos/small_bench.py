"""A two-environment benchmark run with the exact estimator, summarized in place.

Ten sequences are a small sample, so configuration means are noisy here;
the eight-environment desk preset gives steadier numbers.

Run from the repository root::

    python demos/small_bench.py
"""
from __future__ import annotations

from antiplan.bench import BenchConfig, run_bench, summarize


def main() -> None:
    config = BenchConfig.preset("desk", estimator="exact")
    config = BenchConfig.from_dict({**config.to_dict(), "env_seeds": [1000, 1001],
                                    "sequences_per_env": 5})
    records = run_bench(config)
    print(summarize(records).table())


if __name__ == "__main__":
    main()
