"""Experiment harness: configs, replicated runs, CSV metrics and plots."""
from .config import ConfigError, ExperimentConfig, build_problem
from .experiment import (COLUMNS, UNDEFINED, MetricRow, compute_normalized_difference, read_csv,
                         run_experiment, run_sweep, summarize, write_csv)
