"""IPW estimation of the intervention-conditional ATE and overlap diagnostics."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from ..errors import EstimationError
from ..events import EventSequence, WindowConfig
from .propensity import Pattern, PropensityTable
from .timeline import joint_timeline

log = logging.getLogger(__name__)

CONTROL_MODES = ("joint", "complement")


class IntensityProvider(Protocol):
    name: str

    def intensity(self, seq: EventSequence, target: int, times: np.ndarray) -> np.ndarray:
        """CIF of ``target`` at ``times`` given the history strictly before each time."""


class ConstantIntensity:
    name = "constant"

    def __init__(self, value: float):
        self.value = float(value)

    def intensity(self, seq, target, times):
        return np.full(np.shape(times), self.value)


class ScaledIntensity:
    """``scale * inner`` (linearity checks)."""

    def __init__(self, inner: IntensityProvider, scale: float):
        self.inner, self.scale = inner, float(scale)
        self.name = f"{scale}*{inner.name}"

    def intensity(self, seq, target, times):
        return self.scale * self.inner.intensity(seq, target, times)


def ipw_weight(c: int, v_obs: int, v_target: int, e: float, e_control: float | None = None) -> float:
    """Signed IPW weight for one instant.

    ``1/e`` on the treated arm ``(c, v_obs) = (1, v_target)``, ``-1/e_control``
    on the control arm ``(0, v_target)`` and 0 otherwise.  ``e_control``
    defaults to ``1 - e``.
    """
    if not 0.0 < e < 1.0:
        raise ValueError(f"propensity must lie in (0, 1), got {e}")
    if e_control is None:
        e_control = 1.0 - e
    elif not 0.0 < e_control < 1.0:
        raise ValueError(f"control propensity must lie in (0, 1), got {e_control}")
    if v_obs != v_target:
        return 0.0
    return 1.0 / e if c == 1 else -1.0 / e_control


@dataclass
class ATEReport:
    cause: int
    outcome: int
    intervention: int | None
    tau: dict[int, float | None]
    naive: dict[int, float | None]
    contributions: dict[int, list[float]]
    grid_dt: float
    control_mode: str
    intensity: str
    fallback_measure: float
    overlap: dict
    propensity: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pair": {"cause": self.cause, "outcome": self.outcome, "intervention": self.intervention},
            "tau": {str(k): v for k, v in self.tau.items()},
            "naive": {str(k): v for k, v in self.naive.items()},
            "contributions": {str(k): v for k, v in self.contributions.items()},
            "grid_dt": self.grid_dt,
            "control_mode": self.control_mode,
            "intensity": self.intensity,
            "fallback_measure": self.fallback_measure,
            "overlap": self.overlap,
            "propensity": self.propensity,
        }


def default_grid_dt(data: Sequence[EventSequence]) -> float:
    """Half the median inter-event gap over the dataset."""
    gaps = [np.diff(s.times) for s in data if len(s) > 1]
    gaps = np.concatenate(gaps) if gaps else np.empty(0)
    if gaps.size == 0:
        return max(s.horizon for s in data) / 100.0
    return float(np.median(gaps)) / 2.0


def _cells(edges: np.ndarray, grid_dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Subdivide each piece into equal cells no longer than ``grid_dt``.

    Returns (left, right, piece index) per cell.
    """
    lengths = np.diff(edges)
    n = np.maximum(1, np.ceil(lengths / grid_dt - 1e-9)).astype(np.int64)
    piece = np.repeat(np.arange(lengths.size), n)
    offset = np.arange(piece.size) - np.repeat(np.cumsum(n) - n, n)
    step = lengths[piece] / n[piece]
    left = edges[piece] + offset * step
    right = np.where(offset == n[piece] - 1, edges[piece + 1], left + step)
    return left, right, piece


def _weights(tl, table: PropensityTable, v_target: int, control_mode: str,
             cache: dict) -> np.ndarray:
    keys = tl.pattern_keys()
    w = np.zeros(len(keys))
    for k, (key, c, v) in enumerate(zip(keys, tl.c.tolist(), tl.v.tolist())):
        if int(v) != v_target:
            continue
        ck = (key, v_target)
        if ck not in cache:
            e = table.score(key, v_target)
            ec = table.control_score(key, v_target) if control_mode == "joint" else None
            cache[ck] = (1.0 / e, -1.0 / (ec if ec is not None else 1.0 - e))
        w[k] = cache[ck][0] if c else cache[ck][1]
    return w


def estimate_ate(data: Sequence[EventSequence], intensity: IntensityProvider, table: PropensityTable,
                 windows: WindowConfig, pair: tuple[int, int, int | None], grid_dt: float | None = None,
                 control_mode: str = "joint") -> ATEReport:
    """tau_hat(v) = mean_k (1/T) int alpha_t(v) lambda(t) dt for v in {0, 1}.

    The time axis is split at every indicator breakpoint and every event, so
    the weight is constant and ``lambda`` is continuous on each piece; pieces
    are subdivided into cells of at most ``grid_dt`` and ``lambda`` is
    integrated by the trapezoid rule.

    ``control_mode="joint"`` weights the control arm by ``1/P(c=0, v | x)``;
    ``"complement"`` uses ``1/(1 - P(c=1, v | x))``.
    """
    cause, outcome, intervention = pair
    if control_mode not in CONTROL_MODES:
        raise EstimationError(f"control_mode must be one of {CONTROL_MODES}")
    if (cause, intervention) != (table.cause, table.intervention):
        raise EstimationError("propensity table was built for a different (cause, intervention)")
    if not data:
        raise EstimationError("no sequences")
    grid_dt = default_grid_dt(data) if grid_dt is None else float(grid_dt)
    if not grid_dt > 0:
        raise EstimationError("grid_dt must be > 0")
    contrib = {0: [], 1: []}
    naive_int = {(c, v): 0.0 for c in (0, 1) for v in (0, 1)}
    naive_meas = dict.fromkeys(naive_int, 0.0)
    fallback = 0.0
    cache: dict = {}
    for seq in data:
        tl = joint_timeline(seq, cause, intervention, table.covariates, windows,
                            extra_breaks=seq.times)
        left, right, piece = _cells(tl.edges, grid_dt)
        lam_l = intensity.intensity(seq, outcome, np.nextafter(left, np.inf))
        lam_r = intensity.intensity(seq, outcome, right)
        cell_int = 0.5 * (right - left) * (lam_l + lam_r)
        piece_int = np.bincount(piece, weights=cell_int, minlength=tl.lengths.size)
        for v in (0, 1):
            w = _weights(tl, table, v, control_mode, cache)
            contrib[v].append(float(np.dot(w, piece_int)) / seq.horizon)
        lengths = tl.lengths
        for c in (0, 1):
            for v in (0, 1):
                sel = (tl.c == bool(c)) & (tl.v == bool(v))
                naive_int[(c, v)] += float(piece_int[sel].sum())
                naive_meas[(c, v)] += float(lengths[sel].sum())
        keys = tl.pattern_keys()
        fb = np.array([table.uses_fallback(k) for k in keys], dtype=bool)
        fallback += float(lengths[fb].sum())
    if fallback > 0:
        log.info("event=propensity_fallback measure=%.6g", fallback)
    tau = {v: float(np.mean(contrib[v])) for v in (0, 1)}
    naive: dict[int, float | None] = {}
    for v in (0, 1):
        if naive_meas[(1, v)] > 0 and naive_meas[(0, v)] > 0:
            naive[v] = naive_int[(1, v)] / naive_meas[(1, v)] - naive_int[(0, v)] / naive_meas[(0, v)]
        else:
            naive[v] = None
    return ATEReport(cause, outcome, intervention, tau, naive, contrib, grid_dt, control_mode,
                     getattr(intensity, "name", type(intensity).__name__), fallback,
                     overlap_diagnostics(table), table.to_dict())


def naive_ate(data: Sequence[EventSequence], intensity: IntensityProvider, windows: WindowConfig,
              pair: tuple[int, int, int | None], grid_dt: float | None = None) -> dict[int, float | None]:
    """Unweighted contrast: mean lambda over {c=1, v} minus over {c=0, v}."""
    cause, outcome, intervention = pair
    grid_dt = default_grid_dt(data) if grid_dt is None else float(grid_dt)
    num = {(c, v): 0.0 for c in (0, 1) for v in (0, 1)}
    den = dict.fromkeys(num, 0.0)
    for seq in data:
        tl = joint_timeline(seq, cause, intervention, (), windows, extra_breaks=seq.times)
        left, right, piece = _cells(tl.edges, grid_dt)
        lam = 0.5 * (intensity.intensity(seq, outcome, np.nextafter(left, np.inf))
                     + intensity.intensity(seq, outcome, right))
        piece_int = np.bincount(piece, weights=lam * (right - left), minlength=tl.lengths.size)
        for c in (0, 1):
            for v in (0, 1):
                sel = (tl.c == bool(c)) & (tl.v == bool(v))
                num[(c, v)] += float(piece_int[sel].sum())
                den[(c, v)] += float(tl.lengths[sel].sum())
    out: dict[int, float | None] = {}
    for v in (0, 1):
        if den[(1, v)] > 0 and den[(0, v)] > 0:
            out[v] = num[(1, v)] / den[(1, v)] - num[(0, v)] / den[(0, v)]
        else:
            out[v] = None
    return out


@dataclass
class OverlapResult:
    passed: bool
    epsilon: float
    violations: list[dict]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "epsilon": self.epsilon, "violations": self.violations}


def check_overlap(table: PropensityTable, epsilon: float = 0.01, include_control: bool = True,
                  v_values: Sequence[int] = (0, 1)) -> OverlapResult:
    """Every retained stratum needs raw scores strictly inside ``(epsilon, 1 - epsilon)``."""
    violations = []
    for key, s in sorted(table.retained().items()):
        for v in v_values:
            checks = [("treated", s.raw(v))]
            if include_control:
                checks.append(("control", s.raw_control(v)))
            for arm, e in checks:
                if not epsilon < e < 1.0 - epsilon:
                    violations.append({"pattern": "".join(map(str, key)) or "-", "v": v,
                                       "arm": arm, "e": e})
    return OverlapResult(not violations, epsilon, violations)


def overlap_diagnostics(table: PropensityTable) -> dict:
    rows = {}
    for key, s in sorted(table.retained().items()):
        raws = [s.raw(v) for v in (0, 1)] + [s.raw_control(v) for v in (0, 1)]
        rows["".join(map(str, key)) or "-"] = {"min": min(raws), "max": max(raws), "duration": s.total}
    res = check_overlap(table, table.epsilon)
    return {"strata": rows, "passed": res.passed, "n_violations": len(res.violations)}
