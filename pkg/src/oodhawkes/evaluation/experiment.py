"""Repeated simulate -> fit -> estimate -> score runs with on-disk artifacts."""
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..causal import check_overlap, estimate_ate, estimate_propensity, naive_ate
from ..config import strict_from_dict, to_plain
from ..errors import ConfigError, DataIOError, OODError
from ..events import EventSequence, Role, WindowConfig
from ..io import read_json, write_json
from ..nn.checkpoint import save_checkpoint
from ..nn.model import ModelConfig
from ..nn.predict import ModelIntensity
from ..nn.train import TrainConfig, fit, split_sequences, write_history
from ..sim import GenerationConfig, GroundTruth, TrueIntensity, emit_dataset, random_truth, simulate
from ..sim.oracle import true_ate_oracle
from ..sim.params import ate_key
from .metrics import ate_metrics, process_fit_metrics

log = logging.getLogger(__name__)

PLANS = ("no-ood", "baseline", "all-impact")
PAPER_MIX = (10, 12, 8)
DESK_SCALE = 0.1


def scaled_mix(scale: float) -> tuple[int, int, int]:
    """The (Baseline, Cause, Covariate) mix scaled down, keeping every kind present."""
    return tuple(max(1, int(math.floor(m * scale + 0.5))) for m in PAPER_MIX)


def plan_mix(plan: str, preset: str) -> tuple[int, int, int]:
    if plan not in PLANS:
        raise ConfigError(f"plan must be one of {PLANS}, got {plan!r}")
    full = PAPER_MIX if preset == "paper" else scaled_mix(DESK_SCALE)
    if plan == "no-ood":
        return (0, 0, 0)
    if plan == "baseline":
        return (sum(full), 0, 0)
    return tuple(full)


@dataclass
class ExperimentConfig:
    plan: str = "baseline"
    preset: str = "desk"
    reps: int = 20
    master_seed: int = 0
    n_sequences: int = 100
    horizon: float = 50.0
    test_fraction: float = 0.2
    fit_model: bool = True
    confounded: bool = False
    confounder_amplitude: float = 0.6
    confounder_decay: float = 4.0
    mc_sequences: int = 50
    oracle_grid: int = 1000
    max_pairs: int = 3
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    model: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if self.plan not in PLANS:
            raise ConfigError(f"experiment.plan must be one of {PLANS}")
        if self.preset not in ("desk", "paper"):
            raise ConfigError("experiment.preset must be 'desk' or 'paper'")
        if self.reps < 1 or self.n_sequences < 2:
            raise ConfigError("experiment.reps must be >= 1 and n_sequences >= 2")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("experiment.test_fraction must lie in (0, 1)")

    @classmethod
    def preset_config(cls, plan: str, preset: str = "desk", **overrides) -> "ExperimentConfig":
        mix = plan_mix(plan, preset)
        if preset == "paper":
            gen = GenerationConfig(kind_mix=mix)
            base = dict(n_sequences=1000, horizon=100.0, mc_sequences=200, oracle_grid=2000,
                        train=TrainConfig(), model={"preset": "paper"})
        else:
            gen = GenerationConfig(n_cause=4, n_outcome=2, kind_mix=mix)
            base = dict(n_sequences=100, horizon=50.0,
                        train=TrainConfig(max_epochs=20, early_stop_patience=5),
                        model={"preset": "desk"})
        base.update(overrides)
        return cls(plan=plan, preset=preset, generation=gen, **base)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        gen = GenerationConfig.from_dict(d.pop("generation", {}))
        train = strict_from_dict(TrainConfig, d.pop("train", {}), "experiment.train")
        obj = strict_from_dict(cls, d, "experiment")
        obj.generation, obj.train = gen, train
        return obj

    def to_dict(self) -> dict:
        return to_plain(self)

    def generation_for_run(self) -> GenerationConfig:
        """Generation ranges with the kind mix forced to agree with the plan."""
        gen = dataclasses.replace(self.generation)
        if self.plan == "no-ood":
            gen.kind_mix = (0, 0, 0)
        elif self.plan == "baseline":
            gen.kind_mix = (sum(gen.kind_mix) or sum(plan_mix("baseline", self.preset)), 0, 0)
        elif sum(gen.kind_mix) == 0:
            gen.kind_mix = plan_mix("all-impact", self.preset)
        if self.confounded:
            gen.confounder_amplitude = self.confounder_amplitude
            gen.confounder_decay = self.confounder_decay
        return gen


def rep_seed(master_seed: int, rep: int) -> int:
    """Independent seed per repetition, derived from the master seed."""
    state = np.random.SeedSequence(int(master_seed), spawn_key=(0xE7, rep)).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(2))


def _model_config(cfg: ExperimentConfig, n_event: int, n_inter: int) -> ModelConfig:
    spec = dict(cfg.model)
    preset = spec.pop("preset", cfg.preset)
    if preset == "paper":
        base = ModelConfig.paper(n_event, n_inter).to_dict()
    else:
        base = ModelConfig.desk(n_event, n_inter).to_dict()
    base.update(spec)
    base["n_event_types"], base["n_intervention_types"] = n_event, n_inter
    return strict_from_dict(ModelConfig, base, "experiment.model")


def estimation_pairs(truth: GroundTruth, max_pairs: int) -> list[tuple[int, int, int | None]]:
    """One (cause, outcome, intervention) per intervention; kernel-linked pairs when there are none."""
    if truth.interventions:
        return [(s.cause_id, s.outcome_id, s.intervention_id) for s in truth.interventions]
    amp = truth.hawkes.amplitude
    pairs = [(c, o, None) for o in truth.taxonomy.ids(Role.OUTCOME)
             for c in truth.taxonomy.ids(Role.CAUSE, Role.COVARIATE) if amp[o, c] > 0]
    if not pairs:
        c = truth.taxonomy.ids(Role.CAUSE, Role.COVARIATE)[0]
        pairs = [(c, truth.taxonomy.ids(Role.OUTCOME)[0], None)]
    return pairs[:max_pairs]


def _windows(truth: GroundTruth, pair, default_cause_window: float) -> WindowConfig:
    c, o, vid = pair
    if vid is None:
        return WindowConfig(default_cause_window, default_cause_window)
    spec = truth.intervention(vid)
    return WindowConfig(spec.cause_window, spec.window)


def _v_values(pair) -> tuple[int, ...]:
    return (0, 1) if pair[2] is not None else (0,)


def run_repetition(cfg: ExperimentConfig, rep: int, out_dir: str | Path) -> dict:
    """One repetition; every intermediate is written under ``out_dir/repXX``."""
    rdir = Path(out_dir) / f"rep{rep:02d}"
    seed = rep_seed(cfg.master_seed, rep)
    result: dict = {"rep": rep, "rep_seed": seed, "status": "ok", "pairs": []}
    try:
        gen = cfg.generation_for_run()
        truth = random_truth(gen, seed, cfg.horizon)
        seqs = simulate(truth, cfg.n_sequences, cfg.horizon)
        emit_dataset(seqs, truth, rdir / "data")
        pairs = estimation_pairs(truth, cfg.max_pairs)
        providers = {"oracle": TrueIntensity(truth)}
        if cfg.fit_model:
            fit_seqs, test_seqs = split_sequences(seqs, cfg.test_fraction, seed)
            tm_event = truth.taxonomy.ids(Role.CAUSE, Role.OUTCOME, Role.COVARIATE)
            tm_inter = truth.taxonomy.ids(Role.INTERVENTION)
            mcfg = _model_config(cfg, len(tm_event), len(tm_inter))
            wv = [truth.intervention(k).window for k in tm_inter] or gen.cause_window
            tcfg = dataclasses.replace(cfg.train, seed=seed % (2**32))
            res = fit(fit_seqs, truth.taxonomy, wv, mcfg, tcfg, out_dir=rdir)
            save_checkpoint(res.net, rdir / "checkpoint", {"best_epoch": res.best_epoch})
            write_history(rdir / "history.csv", res.history)
            fm = process_fit_metrics(res.net, test_seqs)
            result["process_fit"] = fm.to_dict()
            result["test_ids"] = [s.seq_id for s in test_seqs]
            providers["model"] = ModelIntensity(res.net)
        for pair in pairs:
            result["pairs"].append(_score_pair(cfg, truth, seqs, pair, providers))
    except OODError as exc:
        log.error("event=rep_failed rep=%d error=%s", rep, exc)
        result["status"] = "failed"
        result["error"] = str(exc)
    write_json(rdir / "result.json", result)
    return result


def _score_pair(cfg: ExperimentConfig, truth: GroundTruth, seqs: Sequence[EventSequence], pair,
                providers: dict) -> dict:
    win = _windows(truth, pair, cfg.generation.cause_window)
    c, o, vid = pair
    table = estimate_propensity(seqs, truth.taxonomy, win, (c, vid))
    row: dict = {"key": ate_key(c, o, vid), "cause": c, "outcome": o, "intervention": vid,
                 "truth": {}, "estimates": {}}
    for v in _v_values(pair):
        ora = true_ate_oracle(truth, pair, v, mc_sequences=cfg.mc_sequences,
                              grid_points=cfg.oracle_grid)
        row["truth"][str(v)] = {"tau": ora.tau, "stderr": ora.stderr, "method": ora.method}
    for name, prov in providers.items():
        rep = estimate_ate(seqs, prov, table, win, pair)
        naive = naive_ate(seqs, prov, win, pair, rep.grid_dt)
        row["estimates"][name] = {
            "ipw": {str(v): rep.tau[v] for v in _v_values(pair)},
            "naive": {str(v): naive[v] for v in _v_values(pair)},
            "fallback_measure": rep.fallback_measure,
        }
    row["overlap_passed"] = check_overlap(table, table.epsilon).passed
    return row


def summarize(results: Sequence[dict]) -> dict:
    """Aggregate repetition results (pure function of the per-rep records)."""
    results = sorted(results, key=lambda r: r["rep"])
    ok = [r for r in results if r["status"] == "ok"]
    summary: dict = {"reps": len(results), "completed": len(ok),
                     "incomplete": [r["rep"] for r in results if r["status"] != "ok"], "ate": {}}
    methods = sorted({m for r in ok for p in r["pairs"] for m in p["estimates"]})
    for m in methods:
        for est in ("ipw", "naive"):
            for v in ("0", "1"):
                xs, ts = [], []
                for r in ok:
                    for p in r["pairs"]:
                        e = p["estimates"].get(m, {}).get(est, {}).get(v)
                        t = p["truth"].get(v, {}).get("tau")
                        if e is None or t is None or not np.isfinite(e) or not np.isfinite(t):
                            continue
                        xs.append(e)
                        ts.append(t)
                if len(xs) >= 2:
                    summary["ate"].setdefault(m, {}).setdefault(est, {})[v] = ate_metrics(xs, ts).to_dict()
    fits = [r["process_fit"] for r in ok if "process_fit" in r]
    if fits:
        summary["process_fit"] = {k: float(np.nanmean([f[k] for f in fits])) for k in ("nll", "rmse", "mae")}
    return summary


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path, jobs: int = 1) -> dict:
    out = Path(out_dir)
    write_json(out / "experiment.json", cfg.to_dict())
    if jobs > 1 and cfg.reps > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(run_repetition, [cfg] * cfg.reps, range(cfg.reps), [out] * cfg.reps))
    else:
        results = [run_repetition(cfg, r, out) for r in range(cfg.reps)]
    summary = summarize(results)
    summary["plan"] = cfg.plan
    summary["preset"] = cfg.preset
    summary["master_seed"] = cfg.master_seed
    write_json(out / "summary.json", summary)
    (out / "table.txt").write_text(render_table(summary))
    return summary


def load_results(out_dir: str | Path) -> list[dict]:
    out = Path(out_dir)
    reps = sorted(p for p in out.glob("rep*/result.json"))
    if not reps:
        raise DataIOError(f"{out}: no rep*/result.json files")
    return [read_json(p) for p in reps]


def render_table(summary: dict) -> str:
    """Plain-text layout: one block per method, rows per estimator, columns bias/variance/MSE per v."""
    lines = [f"plan={summary.get('plan', '?')} preset={summary.get('preset', '?')} "
             f"reps={summary['completed']}/{summary['reps']}", ""]
    header = f"{'intensity':<10}{'estimator':<10}" + "".join(
        f"{f'{k}(v={v})':>14}" for v in ("0", "1") for k in ("bias", "var", "mse"))
    lines.append(header)
    lines.append("-" * len(header))
    for m, by_est in sorted(summary["ate"].items()):
        for est, by_v in sorted(by_est.items()):
            cells = []
            for v in ("0", "1"):
                mt = by_v.get(v)
                for k in ("bias", "variance", "mse"):
                    cells.append(f"{mt[k]:>14.4f}" if mt else f"{'-':>14}")
            lines.append(f"{m:<10}{est:<10}" + "".join(cells))
    if "process_fit" in summary:
        pf = summary["process_fit"]
        lines += ["", f"{'NLL':>12}{'RMSE':>12}{'MAE':>12}",
                  f"{pf['nll']:>12.4f}{pf['rmse']:>12.4f}{pf['mae']:>12.4f}"]
    return "\n".join(lines) + "\n"
