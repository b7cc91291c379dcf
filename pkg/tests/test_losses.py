from __future__ import annotations

import logging
import math

import numpy as np
import pytest

from oodhawkes.errors import TrainingError
from oodhawkes.nn import BasisSet, EncodedSequence, ModelOutput, loss_ce, loss_nll, loss_reg, make_batch, total_loss
from oodhawkes.nn.autodiff import Tensor

B = 8
OFF = -800.0      # exp(OFF) underflows to exactly 0


def enc(times, types, horizon, e_dim=1):
    times = np.asarray(times, dtype=float)
    return EncodedSequence(times, np.asarray(types, dtype=np.int64), np.zeros((times.size, 0)), horizon)


def batch_of(seqs, e_dim=1, outcome=None, quadrature="trapezoid", n_points=32, basis=None):
    mask = np.ones(e_dim, dtype=bool) if outcome is None else np.asarray(outcome)
    return make_batch(seqs, basis or BasisSet(0.3), 0, mask, quadrature, n_points)


def unit_rate_output(batch, e_dim=1) -> ModelOutput:
    """lambda == 1: unity log weight 0, every Gaussian switched off."""
    b, n = batch.dt.shape
    lw = np.full((b, n, e_dim, B), OFF)
    lw[..., 0] = 0.0
    return ModelOutput(Tensor(lw), Tensor(np.zeros((b, n, e_dim))))


def output_with(batch, log_weights: float, logits: np.ndarray | None = None, e_dim=1) -> ModelOutput:
    b, n = batch.dt.shape
    lg = np.zeros((b, n, e_dim)) if logits is None else np.broadcast_to(logits, (b, n, e_dim)).copy()
    return ModelOutput(Tensor(np.full((b, n, e_dim, B), log_weights)), Tensor(lg))


# --- NLL ---------------------------------------------------------------------------

def test_nll_empty_sequence_unit_rate():
    batch = batch_of([enc([], [], 1.0)])
    assert loss_nll(unit_rate_output(batch), batch).item() == pytest.approx(1.0, abs=1e-12)


def test_nll_one_event_unit_rate():
    batch = batch_of([enc([0.4], [0], 1.0)])
    assert loss_nll(unit_rate_output(batch), batch).item() == pytest.approx(1.0, abs=1e-12)


def test_nll_constant_rate_closed_form():
    # lambda == 2 on T = 3 with 5 events: 2 * 3 - 5 ln 2
    batch = batch_of([enc([0.2, 0.9, 1.0, 2.0, 2.5], [0] * 5, 3.0)])
    out = unit_rate_output(batch)
    out.log_weights.data[..., 0] = math.log(2.0)
    assert loss_nll(out, batch).item() == pytest.approx(6.0 - 5 * math.log(2.0), abs=1e-12)


def test_nll_compensator_only_over_masked_types():
    seqs = [enc([0.5], [1], 2.0)]
    full = batch_of(seqs, e_dim=2)
    only0 = batch_of(seqs, e_dim=2, outcome=[True, False])
    out = unit_rate_output(full, e_dim=2)
    assert loss_nll(out, full).item() == pytest.approx(4.0)
    assert loss_nll(out, only0).item() == pytest.approx(2.0)


def test_nll_is_mean_over_sequences():
    batch = batch_of([enc([], [], 1.0), enc([], [], 3.0)])
    assert loss_nll(unit_rate_output(batch), batch).item() == pytest.approx(2.0)


def test_quadrature_doubling_converges():
    rng = np.random.default_rng(0)
    times = np.sort(rng.uniform(0, 5.0, 20))
    seqs = [enc(times, np.zeros(20, dtype=int), 5.0)]
    b32 = batch_of(seqs, n_points=32)
    b64 = batch_of(seqs, n_points=64)
    # smooth fixture: lambda varies on the scale of the mean gap, so the three
    # narrowest bumps (widths mean_gap/16, /8, /4) are switched off
    lw = rng.normal(0.0, 0.5, size=b32.dt.shape + (1, B))
    lw[..., 1:4] = OFF
    out = ModelOutput(Tensor(lw), Tensor(np.zeros(b32.dt.shape + (1,))))
    exact = loss_nll(out, batch_of(seqs, quadrature="exact")).item()
    a, b = loss_nll(out, b32).item(), loss_nll(out, b64).item()
    assert abs(a - b) < 1e-3
    assert abs(b - exact) < abs(a - exact) + 1e-15


def test_trapezoid_error_profile():
    """Per unit-weight bump: below 5e-4 on gaps up to the mean gap, below 5e-3 up to four mean gaps."""
    basis = BasisSet(1.0)
    short = np.array([0.1, 0.25, 0.5, 1.0])
    long = np.array([2.0, 3.0, 4.0])
    for lengths, bound in ((short, 5e-4), (long, 5e-3)):
        err = np.abs(basis.integrals_trapezoid(lengths, 32) - basis.integrals_exact(lengths))
        assert err.max() < bound


@pytest.mark.filterwarnings("ignore:invalid value")
def test_nll_rejects_non_finite_log_intensity():
    batch = batch_of([enc([0.4], [0], 1.0)])
    out = unit_rate_output(batch)
    out.log_weights.data[...] = -np.inf
    with pytest.raises(TrainingError):
        loss_nll(out, batch)


def test_empty_batch_losses_warn(caplog):
    batch = batch_of([])
    out = ModelOutput(Tensor(np.zeros((0, 1, 1, B))), Tensor(np.zeros((0, 1, 1))))
    with caplog.at_level(logging.WARNING):
        assert loss_reg(out, batch).item() == 0.0
        assert loss_nll(out, batch).item() == 0.0
    assert "empty_batch" in caplog.text


# --- CE ------------------------------------------------------------------------------

def test_ce_uniform_is_log_e():
    e_dim = 5
    batch = batch_of([enc([0.1, 0.2, 0.7], [0, 3, 4], 1.0)], e_dim=e_dim)
    assert loss_ce(output_with(batch, 0.0, e_dim=e_dim), batch).item() == pytest.approx(3 * math.log(5), abs=1e-12)


def test_ce_perfect_prediction():
    types = [1, 0, 1]
    batch = batch_of([enc([0.1, 0.2, 0.7], types, 1.0)], e_dim=2)
    logits = np.zeros((1, 4, 2))
    for i, k in enumerate(types):
        logits[0, i, k] = 60.0
    out = ModelOutput(Tensor(np.zeros((1, 4, 2, B))), Tensor(logits))
    assert loss_ce(out, batch).item() == pytest.approx(0.0, abs=1e-20)


def test_ce_ninety_percent():
    batch = batch_of([enc(np.arange(1, 11) / 20.0, [0] * 10, 1.0)], e_dim=2)
    logits = np.array([math.log(0.9), math.log(0.1)])
    assert loss_ce(output_with(batch, 0.0, logits, e_dim=2), batch).item() == pytest.approx(1.0536051565782631, abs=1e-12)


# --- regulariser ----------------------------------------------------------------------

def test_reg_zero_weights():
    batch = batch_of([enc([0.3], [0], 1.0)])
    assert loss_reg(output_with(batch, 0.0), batch).item() == pytest.approx(8.0)


def test_reg_log_two_weights():
    batch = batch_of([enc([0.3], [0], 1.0)])
    assert loss_reg(output_with(batch, math.log(2.0)), batch).item() == pytest.approx(32.0)


def test_reg_uses_events_own_type_row():
    batch = batch_of([enc([0.3], [1], 1.0)], e_dim=2)
    lw = np.zeros((1, 2, 2, B))
    lw[0, 0, 0] = 5.0                     # wrong row, must not count
    out = ModelOutput(Tensor(lw), Tensor(np.zeros((1, 2, 2))))
    assert loss_reg(out, batch).item() == pytest.approx(8.0)


# --- composition --------------------------------------------------------------------

@pytest.mark.parametrize("alpha,beta", [(0.0, 0.0), (5.0, 0.01), (1.3, 2.0)])
def test_total_is_exact_weighted_sum(alpha, beta):
    rng = np.random.default_rng(1)
    batch = batch_of([enc([0.1, 0.5, 0.8], [0, 1, 1], 1.0), enc([0.3], [1], 1.0)], e_dim=2)
    out = ModelOutput(Tensor(rng.normal(size=batch.dt.shape + (2, B))), Tensor(rng.normal(size=batch.dt.shape + (2,))))
    parts = total_loss(out, batch, alpha, beta)
    expect = loss_nll(out, batch).item() + alpha * loss_ce(out, batch).item() + beta * loss_reg(out, batch).item()
    assert parts.total.item() == expect
    if alpha == beta == 0.0:
        assert parts.total.item() == loss_nll(out, batch).item()
