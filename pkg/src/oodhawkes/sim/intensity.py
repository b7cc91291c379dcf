"""Exact evaluation of the ground-truth CIF on an observed sequence.

This is the reference used by the oracle-intensity estimator and by the
true-ATE oracle.  It must agree with the incremental state kept by the
thinning simulator; ``tests/test_sim.py`` checks that.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..events import EventSequence
from .params import GroundTruth, InterventionKind, InterventionSpec


def kernel_sum(src: np.ndarray, amplitude: float, decay: float, t: np.ndarray) -> np.ndarray:
    """``sum_{s in src, s < t} amplitude * exp(-decay * (t - s))`` for each ``t``."""
    t = np.asarray(t, dtype=float)
    if amplitude == 0.0 or src.size == 0:
        return np.zeros(t.shape)
    # G[j] = sum_{i <= j} exp(-decay (s_j - s_i))
    g = np.empty(src.size)
    acc = 0.0
    prev = src[0]
    for j, s in enumerate(src.tolist()):
        acc = acc * np.exp(-decay * (s - prev)) + 1.0
        g[j] = acc
        prev = s
    j = np.searchsorted(src, t, side="left") - 1
    jj = np.maximum(j, 0)
    val = amplitude * g[jj] * np.exp(-decay * (t - src[jj]))
    return np.where(j >= 0, val, 0.0)


def _count_in(src: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Number of ``s`` with ``lo <= s < hi``."""
    return np.searchsorted(src, hi, side="left") - np.searchsorted(src, lo, side="left")


def _window_state(starts: np.ndarray, w: float, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(open?, start of the latest event) for the window ``(s, s + w]`` at ``t``."""
    j = np.searchsorted(starts, t, side="left") - 1
    jj = np.maximum(j, 0)
    last = np.where(j >= 0, starts[jj] if starts.size else 0.0, -np.inf)
    return (j >= 0) & (t <= last + w), last


@dataclass(frozen=True)
class Force:
    """Counterfactual override of the cause and intervention indicators.

    ``c_flag`` replaces the cause-window state of ``cause_id`` (and removes or
    adds in-window cause events for its kernel into the target); ``v_flag``
    replaces the window state of ``intervention_id``.
    """

    cause_id: int
    cause_window: float
    c_flag: bool
    intervention_id: int | None = None
    v_flag: bool | None = None


class TrueIntensity:
    """Ground-truth CIF ``lambda_e(t)`` given the observed history before ``t``.

    Implements the intensity-provider protocol used by the causal estimator.
    """

    name = "oracle"

    def __init__(self, truth: GroundTruth):
        self.truth = truth
        self.hawkes = truth.hawkes

    def intensity(self, seq: EventSequence, target: int, times, force: Force | None = None) -> np.ndarray:
        t = np.asarray(times, dtype=float)
        hk = self.hawkes
        by_type = {k: seq.times[seq.types == k] for k in np.unique(seq.types).tolist()}
        empty = np.empty(0)
        srcs = lambda k: by_type.get(k, empty)  # noqa: E731

        specs = [s for s in self.truth.interventions if s.outcome_id == target]
        active, start = {}, {}
        for s in specs:
            c_open, _ = _window_state(srcs(s.cause_id), s.cause_window, t)
            v_open, v_last = _window_state(srcs(s.intervention_id), s.window, t)
            if force is not None and s.cause_id == force.cause_id:
                c_open = np.full(t.shape, bool(force.c_flag))
            if force is not None and s.intervention_id == force.intervention_id:
                v_open = np.full(t.shape, bool(force.v_flag))
                v_last = np.where(v_open, t, -np.inf)
            active[s.intervention_id] = c_open & v_open
            start[s.intervention_id] = np.where(c_open & v_open, v_last, -np.inf)

        def winner(group: list[InterventionSpec]) -> tuple[np.ndarray, np.ndarray]:
            """Index into ``group`` of the last-activated open edit, -1 if none."""
            if not group:
                return np.full(t.shape, -1), np.zeros(t.shape, dtype=bool)
            st = np.stack([start[s.intervention_id] for s in group])
            any_on = np.any(np.stack([active[s.intervention_id] for s in group]), axis=0)
            return np.where(any_on, np.argmax(st, axis=0), -1), any_on

        # baseline
        lam = np.full(t.shape, hk.baselines[target])
        base_group = [s for s in specs if s.kind is InterventionKind.BASELINE]
        win, on = winner(base_group)
        for g, s in enumerate(base_group):
            lam = np.where(win == g, float(s.modified), lam)

        # kernels
        for k in range(hk.n_types):
            group = [s for s in specs if s.source_id == k]
            base = hk.kernel(target, k)
            if base.amplitude == 0.0 and not group:
                continue
            win, on = winner(group)
            contrib = self._source_sum(srcs(k), base.amplitude, base.decay, t, k, force)
            for g, s in enumerate(group):
                sel = win == g
                if np.any(sel):
                    m = s.modified
                    alt = self._source_sum(srcs(k), m.amplitude, m.decay, t, k, force)
                    contrib = np.where(sel, alt, contrib)
            lam = lam + contrib
        return lam

    def _source_sum(self, src, a, b, t, source_id, force: Force | None) -> np.ndarray:
        full = kernel_sum(src, a, b, t)
        if force is None or source_id != force.cause_id or a == 0.0:
            return full
        w = force.cause_window
        n_in = _count_in(src, t - w, t)
        if force.c_flag:
            # expected contribution of one cause event uniform in [t - w, t)
            virtual = a * (1.0 - np.exp(-b * w)) / (b * w)
            return np.where(n_in > 0, full, full + virtual)
        older = np.exp(-b * w) * kernel_sum(src, a, b, t - w)
        return older

    def all_intensities(self, seq: EventSequence, times) -> np.ndarray:
        """``(len(times), K)`` matrix of every type's CIF."""
        return np.stack([self.intensity(seq, k, times) for k in range(self.hawkes.n_types)], axis=1)
