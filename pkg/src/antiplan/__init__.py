"""Anticipatory task planning in procedurally generated blockworlds.

Submodules are imported on demand; ``antiplan.planner`` compiles its search
kernels on first use.
"""

__version__ = "0.1.0"
