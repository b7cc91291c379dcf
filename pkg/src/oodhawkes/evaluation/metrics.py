"""ATE accuracy across repetitions and process-fit quality of a fitted model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import EstimationError
from ..events import EventSequence
from ..nn.losses import loss_nll
from ..nn.model import IntensityNetwork
from ..nn.predict import next_time_errors


@dataclass(frozen=True)
class ATEMetrics:
    bias: float
    variance: float
    mse: float
    n: int

    def to_dict(self) -> dict:
        return {"bias": self.bias, "variance": self.variance, "mse": self.mse, "n": self.n}


def ate_metrics(estimates: Sequence[float], truths: Sequence[float]) -> ATEMetrics:
    """bias = mean |est - truth|, variance = sample variance of est, mse = mean (est - truth)^2."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    if est.shape != tru.shape:
        raise EstimationError("estimates and truths must align")
    if est.size < 2:
        raise EstimationError("ate_metrics needs at least 2 repetitions")
    err = est - tru
    return ATEMetrics(float(np.mean(np.abs(err))), float(np.var(est, ddof=1)),
                      float(np.mean(err ** 2)), int(est.size))


@dataclass(frozen=True)
class FitMetrics:
    nll: float
    rmse: float
    mae: float
    n_sequences: int
    n_predictions: int

    def to_dict(self) -> dict:
        return {"nll": self.nll, "rmse": self.rmse, "mae": self.mae,
                "n_sequences": self.n_sequences, "n_predictions": self.n_predictions}


def process_fit_metrics(net: IntensityNetwork, test_data: Sequence[EventSequence],
                        chunk: int = 64) -> FitMetrics:
    """Held-out NLL (per-sequence mean) and RMSE/MAE of next outcome-event times.

    The expected gap is computed from the summed intensity of the types the
    model was trained to compensate, and errors are in data time units.
    """
    if not test_data:
        raise EstimationError("process_fit_metrics needs a non-empty test set")
    total = 0.0
    for lo in range(0, len(test_data), chunk):
        part = list(test_data[lo:lo + chunk])
        batch = net.batch(part)
        total += loss_nll(net.forward(batch), batch).item() * len(part)
    nll = total / len(test_data)
    outcome = np.flatnonzero(net.type_map.outcome_mask)
    comp = np.flatnonzero(net.compensator_mask)
    err = next_time_errors(net, test_data, target_types=outcome, intensity_types=comp)
    if err.size == 0:
        rmse = mae = float("nan")
    else:
        rmse = float(np.sqrt(np.mean(err ** 2)))
        mae = float(np.mean(np.abs(err)))
    return FitMetrics(float(nll), rmse, mae, len(test_data), int(err.size))
