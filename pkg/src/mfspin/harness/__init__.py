from .config import ExperimentConfig, ObservableSpec, config_from_dict, parse_config
from .oracles import (
    oracle_classical_sector_sum,
    oracle_scalar_curie_weiss,
    oracle_transfer_matrix_1d,
    scalar_rate,
    solve_curie_weiss_magnetization,
)
from .study import BlockRow, ConvergenceReport, DirectRow, emit_report, run_convergence_study

__all__ = [
    "BlockRow",
    "ConvergenceReport",
    "DirectRow",
    "ExperimentConfig",
    "ObservableSpec",
    "config_from_dict",
    "emit_report",
    "oracle_classical_sector_sum",
    "oracle_scalar_curie_weiss",
    "oracle_transfer_matrix_1d",
    "parse_config",
    "run_convergence_study",
    "scalar_rate",
    "solve_curie_weiss_magnetization",
]
