from .grounding import (
    GroundAction,
    GroundedProblem,
    GroundingError,
    MissingMoveCost,
    atoms_to_state,
    blockworld_domain,
    blockworld_domain_text,
    facts_to_state,
    ground,
    ground_goal,
    ground_problem,
    ground_to_state,
    render_problem,
    state_atoms,
    task_goal_atoms,
)
from .parser import (
    ActionSchema,
    CostTerm,
    FeatureUnsupported,
    PddlDomain,
    PddlError,
    PddlProblem,
    PddlSyntaxError,
    parse_domain,
    parse_problem,
)

__all__ = [
    "ActionSchema", "CostTerm", "FeatureUnsupported", "GroundAction", "GroundedProblem",
    "GroundingError", "MissingMoveCost", "PddlDomain", "PddlError", "PddlProblem",
    "PddlSyntaxError", "atoms_to_state", "blockworld_domain", "blockworld_domain_text",
    "facts_to_state", "ground", "ground_goal", "ground_problem", "ground_to_state",
    "parse_domain", "parse_problem", "render_problem", "state_atoms", "task_goal_atoms",
]
