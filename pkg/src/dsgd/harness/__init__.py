"""Experiment specifications, seeded ensembles, cost ledgers and the CLI."""
from .config import ExperimentSpec, TaskSpec, dump_spec, load_spec, parse_spec
from .ensemble import (Ensemble, RunResult, build_task, compare_measurement_frontiers, reference_cost,
                       run_ensemble, run_single, summarize, write_summary)

__all__ = [
    "Ensemble", "ExperimentSpec", "RunResult", "TaskSpec", "build_task", "compare_measurement_frontiers",
    "dump_spec", "load_spec", "parse_spec", "reference_cost", "run_ensemble", "run_single", "summarize",
    "write_summary",
]
