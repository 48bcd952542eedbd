"""Multi-task extreme learning machines.

Centralized alternating optimization and decentralized consensus-ADMM
solvers for ridge-regularized multi-task ELM models with a shared
low-dimensional output basis.
"""

from .admm import (
    AdmmParams,
    ConditionReport,
    DmtlResult,
    check_conditions,
    comm_ratio_vs_dnsp,
    run_dmtl,
    theorem_tau,
)
from .central import MtlProblem, MtlSolution, objective, solve_mtl_elm
from .config import ExperimentConfig, build_config, load_config_file
from .data import (
    ClassificationTaskSpec,
    SyntheticSpec,
    TaskDataset,
    classify_and_score,
    load_dataset,
    make_prototype_dataset,
    make_synthetic,
    make_tasks,
    save_dataset,
)
from .elm import HiddenLayer, feature_map, sample_hidden_layer, solve_local_elm
from .errors import DivergenceError, ParseError, SingularSystemError, UsageError
from .graph import Topology, build_topology, load_edge_list

__all__ = [
    "AdmmParams",
    "ClassificationTaskSpec",
    "ConditionReport",
    "DivergenceError",
    "DmtlResult",
    "ExperimentConfig",
    "HiddenLayer",
    "MtlProblem",
    "MtlSolution",
    "ParseError",
    "SingularSystemError",
    "SyntheticSpec",
    "TaskDataset",
    "Topology",
    "UsageError",
    "build_config",
    "build_topology",
    "check_conditions",
    "classify_and_score",
    "comm_ratio_vs_dnsp",
    "feature_map",
    "load_config_file",
    "load_dataset",
    "load_edge_list",
    "make_prototype_dataset",
    "make_synthetic",
    "make_tasks",
    "objective",
    "run_dmtl",
    "sample_hidden_layer",
    "save_dataset",
    "solve_local_elm",
    "solve_mtl_elm",
    "theorem_tau",
]
