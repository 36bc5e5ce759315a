"""Experiment harness: configs, scenario runs, reports and the command line."""

from .config import (CONFIG_SCHEMA, ExperimentConfig, load_config, parse_config,
                     stacker_to_dict)
from .experiment import (RunReport, SweepRow, compute_bma_evidence_bound,
                         compute_stacking_evidence, finish_report, identity_checks,
                         run_experiment, run_stackers, run_trial, sweep_learning_rates,
                         sweep_stacker)
from .report import (SUMMARY_SCHEMA, CheckResult, TraceTable, check_trace, read_trace,
                     summarize, trace_header, validate_summary, write_experiment,
                     write_report, write_sweep)
from .scenarios import SCENARIOS, ModelFailure, ScenarioData, build_scenario, stream_log_densities

__all__ = [
    "CONFIG_SCHEMA", "CheckResult", "ExperimentConfig", "ModelFailure", "RunReport",
    "SCENARIOS", "SUMMARY_SCHEMA", "ScenarioData", "SweepRow", "TraceTable",
    "build_scenario", "check_trace", "compute_bma_evidence_bound", "compute_stacking_evidence",
    "finish_report", "identity_checks", "load_config", "parse_config", "read_trace",
    "run_experiment", "run_stackers", "run_trial", "stacker_to_dict", "stream_log_densities",
    "summarize", "sweep_learning_rates", "sweep_stacker", "trace_header", "validate_summary",
    "write_experiment", "write_report", "write_sweep",
]
