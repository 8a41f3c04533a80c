"""Experiment orchestration: configs, trial runner, sweeps, lemma suite, output and CLI."""

from dppersonal.harness.config import ConfigError, ExperimentConfig, load_config
from dppersonal.harness.io import emit_results, read_results
from dppersonal.harness.lemmas import run_lemma_suite
from dppersonal.harness.runner import (
    AggregateReport,
    TrialRecord,
    run_attack,
    run_experiment,
)
from dppersonal.harness.sweep import run_separation_sweep

__all__ = [
    "AggregateReport", "ConfigError", "ExperimentConfig", "TrialRecord", "emit_results",
    "load_config", "read_results", "run_attack", "run_experiment", "run_lemma_suite",
    "run_separation_sweep",
]
