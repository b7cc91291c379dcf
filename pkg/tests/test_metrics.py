from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oodhawkes.errors import ConfigError, EstimationError
from oodhawkes.evaluation import (ExperimentConfig, ate_metrics, load_results, process_fit_metrics,
                                  run_experiment, run_repetition, summarize)
from oodhawkes.evaluation.experiment import plan_mix, rep_seed
from oodhawkes.events import EventSequence, Role, Taxonomy
from oodhawkes.nn import BasisSet, IntensityNetwork, ModelConfig, TypeMap

OFF = -800.0


# --- ATE metrics ---------------------------------------------------------------------

def test_ate_metrics_exact():
    m = ate_metrics([4.0, 4.0, 4.0], [4.0, 4.0, 4.0])
    assert (m.bias, m.variance, m.mse) == (0.0, 0.0, 0.0)


def test_ate_metrics_plus_minus():
    m = ate_metrics([4.1, 3.9], [4.0, 4.0])
    assert m.bias == pytest.approx(0.1)
    assert m.variance == pytest.approx(0.02)
    assert m.mse == pytest.approx(0.01)


def test_ate_metrics_needs_two():
    with pytest.raises(EstimationError):
        ate_metrics([1.0], [1.0])


@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=2, max_size=40))
def test_ate_metrics_match_straight_line(rows):
    est = [r[0] for r in rows]
    tru = [r[1] for r in rows]
    n = len(rows)
    mean = sum(est) / n
    bias = sum(abs(e - t) for e, t in rows) / n
    var = sum((e - mean) ** 2 for e in est) / (n - 1)
    mse = sum((e - t) ** 2 for e, t in rows) / n
    m = ate_metrics(est, tru)
    assert m.bias == pytest.approx(bias, rel=1e-9, abs=1e-9)
    assert m.variance == pytest.approx(var, rel=1e-9, abs=1e-9)
    assert m.mse == pytest.approx(mse, rel=1e-9, abs=1e-9)


# --- process fit ------------------------------------------------------------------------

ONE = Taxonomy([Role.OUTCOME])


def constant_outcome_net(rate: float) -> IntensityNetwork:
    cfg = ModelConfig.desk(1, 0, embed_dim=8, hidden_dim=8, head_dim=8, ffn_dim=8, dropout=0.0)
    net = IntensityNetwork.create(cfg, BasisSet(1.0 / rate), TypeMap.from_taxonomy(ONE), 1.0, seed=0)
    net.params["head_w"][:] = 0.0
    b = np.full(8, OFF)
    b[0] = math.log(rate)
    net.params["head_b"] = b
    return net


def test_fit_nll_of_empty_unit_sequence():
    m = process_fit_metrics(constant_outcome_net(1.0), [EventSequence("e", 1.0, np.empty(0), np.empty(0))])
    assert m.nll == pytest.approx(1.0, abs=1e-12)
    assert m.n_predictions == 0 and math.isnan(m.rmse)


def test_constant_rate_rmse_is_exponential_std():
    rate = 2.0
    rng = np.random.default_rng(0)
    data = []
    for k in range(10):
        t = np.cumsum(rng.exponential(1.0 / rate, 400))
        data.append(EventSequence(str(k), float(t[-1] + 1.0), t, np.zeros(400, dtype=int)))
    m = process_fit_metrics(constant_outcome_net(rate), data)
    assert m.n_predictions == 10 * 399
    assert m.rmse == pytest.approx(1.0 / rate, rel=0.10)
    assert m.mae <= m.rmse


# --- experiments ------------------------------------------------------------------------------

def test_plan_mixes():
    assert plan_mix("all-impact", "paper") == (10, 12, 8)
    assert plan_mix("all-impact", "desk") == (1, 1, 1)
    assert plan_mix("no-ood", "desk") == (0, 0, 0)
    assert plan_mix("baseline", "desk") == (3, 0, 0)
    with pytest.raises(ConfigError):
        plan_mix("other", "desk")


def test_config_round_trip_and_strictness():
    cfg = ExperimentConfig.preset_config("all-impact", reps=3)
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.to_dict() == cfg.to_dict()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"plan": "baseline", "bogus": 1})


def test_rep_seeds_distinct_and_stable():
    seeds = [rep_seed(7, r) for r in range(50)]
    assert len(set(seeds)) == 50 and seeds == [rep_seed(7, r) for r in range(50)]
    assert rep_seed(8, 0) != seeds[0]


def tiny(plan, **kw) -> ExperimentConfig:
    base = dict(reps=2, n_sequences=10, horizon=10.0, mc_sequences=4, oracle_grid=200,
                model={"preset": "desk", "embed_dim": 8, "hidden_dim": 8, "head_dim": 8, "ffn_dim": 8})
    base.update(kw)
    cfg = ExperimentConfig.preset_config(plan, **base)
    cfg.train.max_epochs = 2
    return cfg


def test_no_ood_sanity_plan(tmp_path):
    res = run_repetition(tiny("no-ood", fit_model=False), 0, tmp_path)
    assert res["status"] == "ok"
    truth = json.loads((tmp_path / "rep00" / "data" / "truth.json").read_text())
    assert truth["interventions"] == []
    for p in res["pairs"]:
        assert p["intervention"] is None and set(p["truth"]) == {"0"}


def test_experiment_is_deterministic_and_recomputable(tmp_path):
    cfg = tiny("all-impact")
    a = run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    for f in ("summary.json", "table.txt", "rep00/result.json", "rep01/checkpoint/params.bin",
              "rep01/data/sequences.jsonl"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f
    offline = summarize(load_results(tmp_path / "a"))
    assert offline["ate"] == a["ate"] and offline["process_fit"] == a["process_fit"]
    assert set(a["ate"]) == {"model", "oracle"}
