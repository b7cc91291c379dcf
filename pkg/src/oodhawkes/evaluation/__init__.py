"""ATE and process-fit metrics and the repetition harness."""
from .experiment import (PLANS, ExperimentConfig, estimation_pairs, load_results, plan_mix, render_table,
                         rep_seed, run_experiment, run_repetition, scaled_mix, summarize)
from .metrics import ATEMetrics, FitMetrics, ate_metrics, process_fit_metrics

__all__ = [
    "ATEMetrics", "ExperimentConfig", "FitMetrics", "PLANS", "ate_metrics", "estimation_pairs",
    "load_results", "plan_mix", "process_fit_metrics", "render_table", "rep_seed", "run_experiment",
    "run_repetition", "scaled_mix", "summarize",
]
