"""Iterated variable neighborhood search for resource-constrained multi-mode multi-project scheduling."""

from .evaluation import Evaluation, EvaluationConfig, Genotype, Schedule, decode, evaluate, lex_compare
from .instance import (
    ActivitySpec,
    Instance,
    InstanceFormatError,
    InstanceValidationError,
    ModeSpec,
    ProjectSpec,
    critical_path_bound,
    flatten,
    load_instance,
    loads_instance,
    parse_instance,
)
from .modes import ExcessReport, RepairExhausted, excess, random_modes, repair_modes
from .orchestrator import SharedBest, run_parallel_large, run_parallel_small, solve
from .search import SearchConfig, SearchResult, initial_sequence, perturb, run_vns

__version__ = "0.1.0"

__all__ = [
    "ActivitySpec",
    "critical_path_bound",
    "decode",
    "evaluate",
    "Evaluation",
    "EvaluationConfig",
    "excess",
    "ExcessReport",
    "flatten",
    "Genotype",
    "initial_sequence",
    "Instance",
    "InstanceFormatError",
    "InstanceValidationError",
    "lex_compare",
    "load_instance",
    "loads_instance",
    "ModeSpec",
    "parse_instance",
    "perturb",
    "ProjectSpec",
    "random_modes",
    "repair_modes",
    "RepairExhausted",
    "run_parallel_large",
    "run_parallel_small",
    "run_vns",
    "Schedule",
    "SearchConfig",
    "SearchResult",
    "SharedBest",
    "solve",
]
