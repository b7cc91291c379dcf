"""Ground-truth ATE under a known DGP."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..events import indicator_set
from .intensity import Force, TrueIntensity
from .params import GroundTruth, InterventionKind, ate_key
from .simulate import simulate

# spawn-key offset so oracle draws never reuse the training sequences' streams
ORACLE_STREAM = 1 << 40


@dataclass(frozen=True)
class OracleATE:
    tau: float
    stderr: float
    method: str


def _cause_window(truth: GroundTruth, cause: int, outcome: int, intervention: int | None,
                  default: float | None) -> float:
    if default is not None:
        return default
    if intervention is not None:
        return truth.intervention(intervention).cause_window
    for s in truth.interventions:
        if s.cause_id == cause and s.outcome_id == outcome:
            return s.cause_window
    return truth.interventions[0].cause_window if truth.interventions else 1.0


def closed_form_ate(truth: GroundTruth, pair: tuple[int, int, int | None], v: int) -> float | None:
    """Exact tau(v) when the cause acts on the outcome only through Baseline edits.

    Returns None when the closed form does not apply.
    """
    c, o, vid = pair
    if truth.hawkes.amplitude[o, c] != 0:
        return None
    on_pair = [s for s in truth.interventions if s.cause_id == c and s.outcome_id == o]
    if not on_pair:
        return 0.0
    if len(on_pair) > 1 or on_pair[0].kind is not InterventionKind.BASELINE:
        return None
    spec = on_pair[0]
    if spec.intervention_id != vid:
        return None
    rivals = [s for s in truth.interventions
              if s.outcome_id == o and s.kind is InterventionKind.BASELINE and s is not spec]
    if rivals:
        return None
    return float(spec.modified) - float(truth.hawkes.baselines[o]) if v == 1 else 0.0


def true_ate_oracle(truth: GroundTruth, pair: tuple[int, int, int | None], v: int,
                    mc_sequences: int = 200, rng_seed: int | None = None,
                    horizon: float | None = None, grid_points: int = 2000,
                    cause_window: float | None = None,
                    allow_closed_form: bool = True) -> OracleATE:
    """tau(v) = E[(1/T) int (lambda^(1,v) - lambda^(0,v)) dt] on the known DGP.

    Monte Carlo: simulate fresh sequences, and on a midpoint grid restricted to
    times where the observed intervention state equals ``v`` evaluate the
    outcome CIF with the cause indicator forced to 1 and to 0 (all other
    history held fixed), then average the difference.
    """
    c, o, vid = pair
    if mc_sequences <= 0:
        raise ConfigError("mc_sequences must be positive")
    if v not in (0, 1):
        raise ConfigError(f"v must be 0 or 1, got {v}")
    truth.taxonomy.check(c)
    truth.taxonomy.check(o)
    if vid is not None:
        truth.taxonomy.check(vid)
    if allow_closed_form:
        cf = closed_form_ate(truth, pair, v)
        if cf is not None:
            return OracleATE(cf, 0.0, "closed-form")
    horizon = truth.horizon if horizon is None else horizon
    w = _cause_window(truth, c, o, vid, cause_window)
    wv = truth.intervention(vid).window if vid is not None else None
    seed = truth.master_seed if rng_seed is None else rng_seed
    probe = GroundTruth(truth.taxonomy, truth.hawkes, truth.interventions, seed, horizon)
    seqs = simulate(probe, mc_sequences, horizon, seq_seed_offset=ORACLE_STREAM)
    model = TrueIntensity(truth)
    grid = (np.arange(grid_points) + 0.5) * (horizon / grid_points)
    sums, counts = [], []
    for seq in seqs:
        if vid is None:
            v_obs = np.zeros(grid.shape, dtype=bool)
        else:
            v_obs = indicator_set(seq, [vid], wv).contains(grid)
        pts = grid[v_obs == bool(v)]
        if pts.size == 0:
            sums.append(0.0)
            counts.append(0)
            continue
        v_flag = bool(v) if vid is not None else None
        hi = model.intensity(seq, o, pts, Force(c, w, True, vid, v_flag))
        lo = model.intensity(seq, o, pts, Force(c, w, False, vid, v_flag))
        sums.append(float(np.sum(hi - lo)))
        counts.append(pts.size)
    sums_a, counts_a = np.array(sums), np.array(counts, dtype=float)
    total = counts_a.sum()
    if total == 0:
        return OracleATE(float("nan"), float("nan"), "monte-carlo")
    tau = sums_a.sum() / total
    n = len(seqs)
    resid = sums_a - tau * counts_a
    se = float(np.sqrt(np.sum(resid ** 2) * n / max(n - 1, 1)) / total)
    return OracleATE(float(tau), se, "monte-carlo")


def oracle_table(truth: GroundTruth, pairs, mc_sequences: int = 100,
                 grid_points: int = 1000) -> dict[str, dict[str, float]]:
    """tau(0), tau(1) for each (cause, outcome, intervention) triple."""
    out: dict[str, dict[str, float]] = {}
    for c, o, vid in pairs:
        row = {}
        for v in (0, 1):
            if vid is None and v == 1:
                continue
            r = true_ate_oracle(truth, (c, o, vid), v, mc_sequences=mc_sequences,
                                grid_points=grid_points)
            row[str(v)] = r.tau
            row[f"se{v}"] = r.stderr
        out[ate_key(c, o, vid)] = row
    return out
