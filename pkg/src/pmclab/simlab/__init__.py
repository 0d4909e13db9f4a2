"""Simulation harness: data generation, replicated experiments and result files."""

from .data import TruthSpec, gen_dataset, gen_orthonormal_design
from .experiments import (
    CASE_I,
    CASE_II,
    CellSummary,
    ConfigError,
    ExperimentConfig,
    PriorCase,
    RegimeParams,
    ResultRecord,
    directed_models,
    evaluate_dataset,
    run_consistency_sweep,
    run_grid,
    run_regimes,
    run_table1,
    summarize,
    table1_config,
)
from .records import read_records_csv, write_experiment, write_records_csv
from .streams import derive_seed, rng_for

__all__ = [
    "CASE_I", "CASE_II", "CellSummary", "ConfigError", "ExperimentConfig", "PriorCase",
    "RegimeParams", "ResultRecord", "TruthSpec", "derive_seed", "directed_models",
    "evaluate_dataset", "gen_dataset", "gen_orthonormal_design", "read_records_csv", "rng_for",
    "run_consistency_sweep", "run_grid", "run_regimes", "run_table1", "summarize", "table1_config",
    "write_experiment", "write_records_csv",
]
