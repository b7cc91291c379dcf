from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oodhawkes.events import EventSequence, Taxonomy
from oodhawkes.nn import (BasisSet, IntensityNetwork, ModelConfig, ModelIntensity, TypeMap, bin_sequence,
                          intensity_at, next_time_errors, predict_next, preprocess)

TAX = Taxonomy.build(2, 1, 1)     # model types 0,1,2; intervention 3
OFF = -800.0


def constant_net(rate_total: float, time_unit: float = 1.0, mean_gap: float = 0.5) -> IntensityNetwork:
    """Every type has the same constant intensity; lambda_tot = rate_total (model units)."""
    cfg = ModelConfig.desk(3, 1, embed_dim=8, hidden_dim=8, head_dim=8, ffn_dim=8, dropout=0.0)
    net = IntensityNetwork.create(cfg, BasisSet(mean_gap), TypeMap.from_taxonomy(TAX), 1.0, time_unit, seed=0)
    net.params["head_w"][:] = 0.0
    bias = np.full((3, 8), OFF)
    bias[:, 0] = math.log(rate_total / 3.0)
    net.params["head_b"] = bias.reshape(-1)
    return net


def seq_of(times, types, horizon=10.0):
    return EventSequence("s", horizon, np.asarray(times, dtype=float), np.asarray(types))


def test_rate_two_gives_half():
    res = predict_next(constant_net(2.0), seq_of([1.0, 2.0], [0, 2]))
    assert res.t_hat - 2.0 == pytest.approx(0.5, rel=1e-6)


@given(st.floats(0.05, 20.0))
def test_constant_rate_mean_gap(mu):
    res = predict_next(constant_net(mu), seq_of([0.7], [1]))
    assert res.t_hat - 0.7 == pytest.approx(1.0 / mu, rel=1e-3)


def test_type_distribution_normalised():
    net = constant_net(1.0)
    net.params["cls_w"] = np.random.default_rng(0).normal(size=net.params["cls_w"].shape)
    res = predict_next(net, seq_of([0.5, 1.0, 1.5], [0, 1, 2]))
    assert res.type_probs.shape == (3,)
    assert abs(res.type_probs.sum() - 1.0) < 1e-6 and np.all(res.type_probs > 0)


def test_prediction_restricted_to_types():
    res = predict_next(constant_net(3.0), seq_of([1.0], [0]), types=[2])
    assert res.t_hat - 1.0 == pytest.approx(1.0, rel=1e-6)


def test_time_unit_scales_prediction():
    res = predict_next(constant_net(2.0, time_unit=10.0), seq_of([10.0, 20.0], [0, 2], 100.0))
    assert res.t_hat == pytest.approx(25.0, rel=1e-6)


def test_next_time_errors():
    net = constant_net(2.0)
    seq = seq_of([0.5, 1.0, 2.5, 2.6], [0, 2, 1, 2])
    errs = next_time_errors(net, [seq], target_types=[2])
    assert np.allclose(errs, [0.5 - 0.5, 0.5 - 0.1], atol=1e-6)


def test_model_intensity_matches_forward():
    net = constant_net(1.0)
    rng = np.random.default_rng(1)
    net.params = {k: v + rng.normal(0, 0.2, v.shape) for k, v in net.params.items()}
    seq = seq_of([0.4, 1.0, 1.3, 2.0], [0, 3, 2, 1], 3.0)
    prov = ModelIntensity(net)
    lw = net.forward(net.batch([seq])).log_weights.data[0]
    # modelled events at 0.4, 1.3, 2.0 -> positions 1..3; t = 1.3 exactly still uses position 1
    t = np.array([0.2, 1.0, 1.3, 1.31, 2.9])
    got = prov.intensity(seq, 2, t)
    pos, last = [0, 1, 1, 2, 3], [0.0, 0.4, 0.4, 1.3, 2.0]
    want = [intensity_at(lw[p], net.basis, np.array([x - l]))[0, 2] for p, l, x in zip(pos, last, t)]
    assert np.allclose(got, want, rtol=1e-12)


def test_model_intensity_time_unit():
    net = constant_net(3.0, time_unit=4.0)
    seq = seq_of([4.0], [0], 40.0)
    assert np.allclose(ModelIntensity(net).intensity(seq, 2, np.array([1.0, 30.0])), 1.0 / 4.0)


# --- temporal binning -----------------------------------------------------------------

def long_seq(n, horizon=None, seed=0):
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.exponential(1.0, n))
    return EventSequence("L", horizon or float(t[-1] + 1.0), t, rng.integers(0, 3, n))


def test_bin_counts():
    assert len(bin_sequence(long_seq(1000), 400, 100)) == 7
    assert len(bin_sequence(long_seq(10), 400, 100)) == 1
    assert len(preprocess([long_seq(1000), long_seq(10)], 400, 100)) == 8


def test_bins_are_normalised_slices():
    seq = long_seq(1000)
    bins = bin_sequence(seq, 400, 100)
    for k, b in enumerate(bins):
        assert b.seq.horizon == 1.0 and len(b.seq) == 400
        assert b.seq.times[0] > 0 and b.seq.times[-1] < 1.0
        assert np.array_equal(b.seq.types, seq.types[100 * k:100 * k + 400])
        assert b.source_id == "L" and b.seq.seq_id == f"L/b{k}"


@given(st.integers(1, 600), st.integers(0, 50))
def test_denormalise_round_trip(n, seed):
    seq = long_seq(n, seed=seed)
    for b in bin_sequence(seq, 400, 100):
        k = int(np.searchsorted(seq.times, b.denormalize(b.seq.times[:1])[0] - 1e-9))
        orig = seq.times[k:k + len(b.seq)]
        assert np.allclose(b.denormalize(b.seq.times), orig, rtol=1e-12, atol=0)
