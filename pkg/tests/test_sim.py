from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from oodhawkes.errors import ConfigError, SimulationError
from oodhawkes.events import EventSequence, Role, Taxonomy, indicator_set
from oodhawkes.sim import (ExpKernel, GenerationConfig, GroundTruth, HawkesSpec, InterventionKind,
                           InterventionSpec,
                           TrueIntensity, emit_dataset, example_truth, generate_interventions,
                           load_dataset, random_truth, simulate, true_ate_oracle, tune_horizon)
from oodhawkes.sim.intensity import kernel_sum


def poisson_truth(mu, seed=0, horizon=100.0) -> GroundTruth:
    mu = list(mu)
    return GroundTruth(Taxonomy([Role.CAUSE] * len(mu)), HawkesSpec.poisson(mu), [], seed, horizon)


# --- parameters ----------------------------------------------------------------

def test_kernel_and_spec_validation():
    assert ExpKernel(0.5, 1.0)(np.array([0.0, 1.0])).tolist() == pytest.approx([0.5, 0.5 * np.exp(-1)])
    with pytest.raises(ConfigError):
        ExpKernel(-1.0, 1.0)
    with pytest.raises(ConfigError):
        ExpKernel(1.0, 0.0)
    hk = HawkesSpec(np.array([1.0]), np.array([[1.5]]), np.array([[1.0]]))
    assert not hk.is_stationary()
    with pytest.raises(ConfigError, match="stationary"):
        simulate(GroundTruth(Taxonomy([Role.CAUSE]), hk, [], 0, 10.0), 1)


def test_intervention_roles_checked():
    tax = Taxonomy.build(1, 1, 1)
    with pytest.raises(Exception):
        GroundTruth(tax, HawkesSpec.poisson([1, 1, 0]),
                    [InterventionSpec(1, InterventionKind.BASELINE, 0, 1, 0.5, 0.7, 0.5, 2.0)], 0, 10.0)


@given(st.lists(st.floats(0, 50, allow_nan=False), max_size=30, unique=True),
       st.floats(0.0, 3.0), st.floats(0.1, 5.0),
       st.lists(st.floats(0, 60, allow_nan=False), min_size=1, max_size=10))
def test_kernel_sum_matches_brute_force(src, a, b, t):
    src = np.sort(np.array(src, dtype=float))
    t = np.array(t)
    brute = np.array([sum(a * np.exp(-b * (x - s)) for s in src if s < x) for x in t])
    assert np.allclose(kernel_sum(src, a, b, t), brute, rtol=1e-10, atol=1e-12)


# --- thinning ------------------------------------------------------------------

def test_poisson_gaps_pass_ks():
    seqs = simulate(poisson_truth([2.5], seed=11), 40, 100.0)
    gaps = np.concatenate([np.diff(np.concatenate([[0.0], s.times])) for s in seqs])[:10_000]
    assert gaps.size == 10_000
    assert stats.kstest(gaps, "expon", args=(0, 1 / 2.5)).pvalue > 0.01


def test_poisson_count_mean():
    seqs = simulate(poisson_truth([2.5], seed=3), 200, 100.0)
    counts = np.array([len(s) for s in seqs])
    assert abs(counts.mean() - 250.0) <= 3 * np.sqrt(250.0 / counts.size)


def test_multivariate_stationary_rates():
    hk = HawkesSpec(np.array([0.5, 0.3]), np.array([[0.3, 0.4], [0.2, 0.2]]), np.full((2, 2), 1.5))
    truth = GroundTruth(Taxonomy([Role.CAUSE, Role.OUTCOME]), hk, [], 5, 500.0)
    seqs = simulate(truth, 8, 500.0)
    emp = np.array([sum((s.types == k).sum() for s in seqs) for k in (0, 1)]) / (8 * 500.0)
    assert np.allclose(emp, hk.stationary_rates(), rtol=0.08)


def _rescaled_gaps(truth: GroundTruth, seqs, target: int, sub: int) -> np.ndarray:
    """Compensator increments between target events (time-rescaling theorem).

    The CIF is smooth between events and window edges, so a midpoint rule on
    ``sub`` cells per piece integrates it (exactly when it is piecewise constant).
    """
    model = TrueIntensity(truth)
    out = []
    for seq in seqs:
        edges = [np.array([0.0, seq.horizon]), seq.times]
        for s in truth.interventions:
            for k, w in ((s.intervention_id, s.window), (s.cause_id, s.cause_window)):
                t = seq.times_of([k])
                edges += [t, np.minimum(t + w, seq.horizon)]
        edges = np.unique(np.concatenate(edges))
        step = np.diff(edges)[:, None] / sub
        mids = (edges[:-1, None] + step * (np.arange(sub) + 0.5)).ravel()
        right = (edges[:-1, None] + step * (np.arange(sub) + 1)).ravel()
        cum = np.cumsum(model.intensity(seq, target, mids) * np.repeat(step.ravel(), sub))
        at = np.interp(seq.times_of([target]), np.concatenate([[0.0], right]),
                       np.concatenate([[0.0], cum]))
        out.append(np.diff(np.concatenate([[0.0], at])))
    return np.concatenate(out)


@pytest.mark.parametrize("kind,sub", [("Baseline", 1), ("Cause", 16), ("Covariate", 16)])
def test_simulator_agrees_with_true_intensity(kind, sub):
    truth = example_truth(kind, master_seed=21, horizon=60.0)
    seqs = simulate(truth, 20, 60.0)
    gaps = _rescaled_gaps(truth, seqs, 1, sub)
    assert gaps.size > 1000
    assert stats.kstest(gaps, "expon").pvalue > 0.01


def test_baseline_edit_rates_inside_and_outside():
    truth = example_truth("Baseline", master_seed=2, horizon=100.0)
    seqs = simulate(truth, 60, 100.0)
    n_in = n_out = 0
    m_in = m_out = 0.0
    for s in seqs:
        on = indicator_set(s, [0], 0.5).intersection(indicator_set(s, [2], 0.7))
        o = s.times_of([1])
        inside = on.contains(np.nextafter(o, -np.inf)) & on.contains(o)
        n_in += int(inside.sum())
        n_out += int((~inside).sum())
        m_in += on.measure
        m_out += s.horizon - on.measure
    assert abs(n_in - 5.5 * m_in) <= 3 * np.sqrt(5.5 * m_in)
    assert abs(n_out - 1.5 * m_out) <= 3 * np.sqrt(1.5 * m_out)


def test_sequences_are_valid_and_deterministic():
    truth = example_truth("Cause", master_seed=9, horizon=30.0)
    a = simulate(truth, 6, 30.0)
    b = simulate(truth, 6, 30.0)
    c = simulate(truth, 6, 30.0, jobs=2)
    assert a == b == c
    for s in a:
        s.validate(truth.taxonomy)
        assert np.all(np.diff(s.times) > 0) and s.times[-1] < 30.0
    other = simulate(example_truth("Cause", master_seed=10, horizon=30.0), 6, 30.0)
    assert other != a


def test_sequence_depends_only_on_seed_and_index():
    truth = example_truth("Baseline", master_seed=4, horizon=20.0)
    full = simulate(truth, 5, 20.0)
    tail = simulate(truth, 2, 20.0, seq_seed_offset=3)
    assert np.array_equal(full[3].times, tail[0].times)
    assert np.array_equal(full[4].types, tail[1].types)


def test_runaway_names_sequence():
    with pytest.raises(SimulationError, match="sequence 0"):
        simulate(poisson_truth([50.0]), 1, 100.0, max_events=100)


def test_tune_horizon_hits_target_length():
    truth = poisson_truth([2.0, 3.0])
    horizon = tune_horizon(truth, 500.0)
    assert horizon == pytest.approx(100.0)
    lengths = [len(s) for s in simulate(truth, 30, horizon)]
    assert abs(np.mean(lengths) - 500.0) < 3 * np.sqrt(500.0 / 30)


# --- intervention generation -----------------------------------------------------

def test_generate_interventions_kind_mix():
    cfg = GenerationConfig(n_cause=20, n_outcome=10, kind_mix=(10, 12, 8))
    tax = cfg.taxonomy()
    rng = np.random.default_rng(0)
    from oodhawkes.sim.generate import random_hawkes
    hk = random_hawkes(tax, cfg, rng)
    specs = generate_interventions(tax, hk, (10, 12, 8), np.random.default_rng(1), cfg)
    kinds = [s.kind for s in specs]
    assert len(specs) == 30
    assert kinds.count(InterventionKind.BASELINE) == 10
    assert kinds.count(InterventionKind.CAUSE) == 12
    assert kinds.count(InterventionKind.COVARIATE) == 8
    for s in specs:
        s.check_roles(tax)
        assert 0 < s.rate < 1 and s.window > 0
    again = generate_interventions(tax, hk, (10, 12, 8), np.random.default_rng(1), cfg)
    assert [x.to_dict() for x in again] == [x.to_dict() for x in specs]
    assert generate_interventions(tax, hk, (0, 0, 0), np.random.default_rng(1), cfg) == []


def test_generate_interventions_needs_cause_and_outcome():
    tax = Taxonomy([Role.OUTCOME, Role.INTERVENTION])
    with pytest.raises(ConfigError):
        generate_interventions(tax, HawkesSpec.poisson([1.0, 0.0]), (1, 0, 0), np.random.default_rng(0))


def test_random_truth_is_stationary_and_deterministic():
    cfg = GenerationConfig(n_cause=6, n_outcome=3, kind_mix=(1, 1, 1))
    a = random_truth(cfg, 5, 50.0)
    assert a.hawkes.is_stationary()
    assert a.to_dict() == random_truth(cfg, 5, 50.0).to_dict()
    assert a.to_dict() != random_truth(cfg, 6, 50.0).to_dict()


# --- dataset files ----------------------------------------------------------------

def test_emit_dataset_round_trip(tmp_path):
    truth = example_truth("Covariate", master_seed=1, horizon=20.0)
    seqs = simulate(truth, 4, 20.0)
    emit_dataset(seqs, truth, tmp_path)
    back, tax, t2 = load_dataset(tmp_path)
    assert back == seqs and tax == truth.taxonomy
    assert t2.to_dict() == truth.to_dict()
    assert t2.true_ate is None


# --- oracle -------------------------------------------------------------------------

def test_oracle_baseline_closed_form():
    truth = example_truth("Baseline")
    assert true_ate_oracle(truth, (0, 1, 2), 1).tau == pytest.approx(4.0)
    assert true_ate_oracle(truth, (0, 1, 2), 0).tau == 0.0


def test_oracle_monte_carlo_matches_closed_form():
    truth = example_truth("Baseline", master_seed=8, horizon=50.0)
    r1 = true_ate_oracle(truth, (0, 1, 2), 1, mc_sequences=20, allow_closed_form=False)
    r0 = true_ate_oracle(truth, (0, 1, 2), 0, mc_sequences=20, allow_closed_form=False)
    assert r1.method == "monte-carlo"
    assert r1.tau == pytest.approx(4.0, abs=1e-9)
    assert r0.tau == pytest.approx(0.0, abs=1e-9)


def test_oracle_cause_kind_is_positive_only_under_intervention():
    truth = example_truth("Cause", master_seed=8, horizon=50.0)
    r1 = true_ate_oracle(truth, (0, 1, 2), 1, mc_sequences=20)
    r0 = true_ate_oracle(truth, (0, 1, 2), 0, mc_sequences=20)
    assert r1.tau > 0.5
    assert r0.tau == pytest.approx(0.0, abs=1e-12)


def test_oracle_unlinked_pair_is_zero():
    tax = Taxonomy([Role.CAUSE, Role.OUTCOME, Role.CAUSE, Role.OUTCOME, Role.INTERVENTION])
    gt = GroundTruth(tax, HawkesSpec.poisson([2.5, 1.5, 1.0, 1.0, 0.0]),
                     [InterventionSpec(4, InterventionKind.BASELINE, 0, 1, 0.5, 0.7, 0.5, 5.5)], 0, 30.0)
    for v in (0, 1):
        assert true_ate_oracle(gt, (2, 3, 4), v, mc_sequences=5).tau == 0.0
        assert true_ate_oracle(gt, (2, 3, 4), v, mc_sequences=5, allow_closed_form=False).tau == 0.0


def test_oracle_rejects_zero_sequences():
    with pytest.raises(ConfigError):
        true_ate_oracle(example_truth("Baseline"), (0, 1, 2), 1, mc_sequences=0)
