"""Joint piecewise-constant timeline of cause, intervention and covariate indicators."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..events import EventSequence, Taxonomy, WindowConfig, indicator_set
from ..intervals import IntervalSet


@dataclass(frozen=True)
class JointTimeline:
    """Pieces ``(edges[k], edges[k+1]]`` with constant ``c``, ``v`` and covariate bits."""

    edges: np.ndarray
    c: np.ndarray        # (n,) bool
    v: np.ndarray        # (n,) bool
    x: np.ndarray        # (n, J) bool

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.edges)

    def pattern_keys(self) -> list[tuple[int, ...]]:
        return [tuple(int(b) for b in row) for row in self.x]


def joint_timeline(seq: EventSequence, cause: int, intervention: int | None,
                   covariates: Sequence[int], windows: WindowConfig,
                   taxonomy: Taxonomy | None = None,
                   extra_breaks: np.ndarray | None = None) -> JointTimeline:
    """Split ``(0, T]`` at every indicator breakpoint (and ``extra_breaks``)."""
    w = windows.cause_window
    c_set = indicator_set(seq, [cause], w, taxonomy)
    if intervention is None:
        v_set = IntervalSet.empty()
    else:
        v_set = indicator_set(seq, [intervention], windows.intervention_window, taxonomy)
    x_sets = [indicator_set(seq, [k], w, taxonomy) for k in covariates]
    parts = [np.array([0.0, seq.horizon]), c_set.breakpoints(), v_set.breakpoints()]
    parts += [s.breakpoints() for s in x_sets]
    if extra_breaks is not None:
        parts.append(np.asarray(extra_breaks, dtype=float))
    edges = np.unique(np.clip(np.concatenate(parts), 0.0, seq.horizon))
    mids = 0.5 * (edges[:-1] + edges[1:])
    x = np.zeros((mids.size, len(x_sets)), dtype=bool)
    for j, s in enumerate(x_sets):
        x[:, j] = s.contains(mids)
    return JointTimeline(edges, c_set.contains(mids), v_set.contains(mids), x)
