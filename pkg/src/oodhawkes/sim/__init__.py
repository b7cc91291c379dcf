from .dataset import emit_dataset, load_dataset
from .generate import GenerationConfig, example_truth, generate_interventions, random_truth
from .intensity import Force, TrueIntensity
from .oracle import OracleATE, true_ate_oracle
from .params import ExpKernel, GroundTruth, HawkesSpec, InterventionKind, InterventionSpec
from .simulate import simulate, simulate_sequence, tune_horizon

__all__ = [
    "ExpKernel", "Force", "GenerationConfig", "GroundTruth", "HawkesSpec", "InterventionKind",
    "InterventionSpec", "OracleATE", "TrueIntensity", "emit_dataset", "example_truth",
    "generate_interventions", "load_dataset", "random_truth", "simulate", "simulate_sequence",
    "true_ate_oracle", "tune_horizon",
]
