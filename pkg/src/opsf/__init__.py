"""Optimal power shut-off with interchangeable radiality formulations."""

from .cases import CaseSpec, build_multicopy_case, bundled_base, sample_risk_profile
from .cycles import Cycle, cycles_in_topology, enumerate_simple_cycles
from .formulation import OpsfConfig, Solution, build_opsf, predict_radiality_model_size
from .milp import MilpModel, SolveOptions, solve
from .network import (AbstractNetwork, BlockPartition, Network, build_abstract_network,
                      compute_load_blocks, parse_network, validate_internal_radiality)
from .radiality import RadialityStrategy, solve_with_strategy
from .validate import ValidationReport, check_radiality, check_solution

__version__ = "0.1.0"

__all__ = [
    "AbstractNetwork", "BlockPartition", "CaseSpec", "Cycle", "MilpModel", "Network",
    "OpsfConfig", "RadialityStrategy", "Solution", "SolveOptions", "ValidationReport",
    "build_abstract_network", "build_multicopy_case", "build_opsf", "bundled_base",
    "check_radiality", "check_solution", "compute_load_blocks", "cycles_in_topology",
    "enumerate_simple_cycles", "parse_network", "predict_radiality_model_size",
    "sample_risk_profile", "solve", "solve_with_strategy", "validate_internal_radiality",
]
