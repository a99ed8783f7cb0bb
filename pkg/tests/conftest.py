from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import build_env, region  # noqa: E402

from antiplan.blockworld import GenerationParams, TaskSpec, generate_environment  # noqa: E402


def side_effect_env():
    """Red's only slot holds the white block F; blue is the nearest free slot.

    Clearing red for ``A:red`` myopically parks F in blue, which then blocks
    ``B:blue``.  The white region's slot costs a hair more to use now and
    nothing later.
    """
    regions = [
        region("red", "red", 4.0, 5.0, 1),
        region("blue", "blue", 5.2, 5.0, 1),
        # just off the red-blue-yellow line, so using it is marginally longer
        region("white", "white", 5.8, 3.8, 1, robot_side="above"),
        region("yellow", "yellow", 7.0, 5.0, 3),
        region("green", "green", 1.0, 1.0, 2),
    ]
    objects = {"A": "red", "B": "blue", "C": "green", "F": "white"}
    placements = {"F": "red_s0", "A": "yellow_s0", "B": "yellow_s1", "C": "yellow_s2"}
    return build_env(regions, objects, placements, "yellow", ["A:red", "B:blue", "C:green"])


SIDE_EFFECT_TASKS = [TaskSpec.parse("A:red"), TaskSpec.parse("B:blue"), TaskSpec.parse("C:green")]


def four_slot_env():
    """Two objects, four slots in two regions, three tasks."""
    regions = [region("red", "red", 2.0, 5.0, 2), region("blue", "blue", 6.0, 5.0, 2)]
    return build_env(regions, {"A": "red", "B": "blue"}, {"A": "red_s0", "B": "red_s1"}, "blue",
                     ["A:blue", "B:blue", "A:red,B:blue"])


@pytest.fixture
def side_env():
    return side_effect_env()


@pytest.fixture
def small_env():
    return four_slot_env()


@pytest.fixture(scope="session")
def generated_env():
    return generate_environment(7)


@pytest.fixture(scope="session")
def tiny_params():
    return GenerationParams(n_regions=(3, 3), slots_per_region=(2, 2), n_objects=(3, 3), n_tasks=(4, 6))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
