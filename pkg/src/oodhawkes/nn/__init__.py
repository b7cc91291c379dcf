"""Neural intensity model, its differentiation engine and training loop."""
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckResult, grad_check, toy_network
from .losses import LossParts, loss_ce, loss_nll, loss_reg, total_loss
from .model import (Batch, BasisSet, EncodedSequence, IntensityNetwork, ModelConfig, ModelOutput, TypeMap,
                    encode_inputs, forward, intensity_at, make_batch)
from .predict import ModelIntensity, NextEvent, expected_gap, next_time_errors, predict_next
from .preprocess import BinnedSequence, bin_sequence, preprocess
from .train import FitResult, TrainConfig, cyclic_lr, evaluate, fit, write_history

__all__ = [
    "Batch", "BasisSet", "BinnedSequence", "EncodedSequence", "FitResult", "GradCheckResult",
    "IntensityNetwork", "LossParts", "ModelConfig", "ModelIntensity", "ModelOutput", "NextEvent",
    "TrainConfig", "TypeMap", "bin_sequence", "cyclic_lr", "encode_inputs", "evaluate", "expected_gap",
    "fit", "forward", "grad_check", "intensity_at", "load_checkpoint", "loss_ce", "loss_nll", "loss_reg",
    "make_batch", "next_time_errors", "predict_next", "preprocess", "save_checkpoint", "toy_network",
    "total_loss", "write_history",
]
