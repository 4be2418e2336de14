"""Vertical road alignment and earthwork allocation toolkit.

Builds multi-haul network-flow MILPs for combined vertical alignment and
earthwork movement, drives external MIP solvers through an MPS file
protocol, validates solutions independently, and benchmarks model variants
with relative-error and performance-profile methodology.
"""

from valign.builder import (
    BuildError,
    BuilderConfig,
    MilpModel,
    QNF_COST_PAIRS,
    build,
    fix_offsets,
    named_config,
)
from valign.gateway import (
    AlignmentResult,
    DecodeError,
    Solution,
    SolveError,
    SolverLimits,
    decode,
    default_solver_command,
    solve,
)
from valign.instance import (
    AccessRoad,
    Block,
    CostModel,
    HaulClass,
    InstanceError,
    Material,
    Pit,
    RoadInstance,
    Section,
    SegmentLayout,
    VolumeCurve,
    big_m,
    block_access_sets,
    cheapest_haul,
    default_cost_model,
    evaluate_grade,
    evaluate_profile,
    global_big_m,
)
from valign.instance_io import (
    RunConfig,
    parse_config,
    parse_instance,
    write_instance,
)
from valign.mps import emit_mps, emit_mps_text, strip_comments
from valign.validate import ViolationReport, recompute_cost, validate

__version__ = "0.1.0"

__all__ = [
    "AccessRoad",
    "AlignmentResult",
    "Block",
    "BuildError",
    "BuilderConfig",
    "CostModel",
    "DecodeError",
    "HaulClass",
    "InstanceError",
    "Material",
    "MilpModel",
    "Pit",
    "QNF_COST_PAIRS",
    "RoadInstance",
    "RunConfig",
    "Section",
    "SegmentLayout",
    "Solution",
    "SolveError",
    "SolverLimits",
    "ViolationReport",
    "VolumeCurve",
    "big_m",
    "block_access_sets",
    "build",
    "cheapest_haul",
    "decode",
    "default_cost_model",
    "default_solver_command",
    "emit_mps",
    "emit_mps_text",
    "evaluate_grade",
    "evaluate_profile",
    "fix_offsets",
    "global_big_m",
    "named_config",
    "parse_config",
    "parse_instance",
    "recompute_cost",
    "strip_comments",
    "validate",
    "write_instance",
    "__version__",
]
