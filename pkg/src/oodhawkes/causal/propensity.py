"""Duration-ratio propensity scores stratified by covariate pattern."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import EstimationError
from ..events import EventSequence, Role, Taxonomy, WindowConfig
from .timeline import joint_timeline

log = logging.getLogger(__name__)

Pattern = tuple[int, ...]


@dataclass
class StratumDurations:
    """Raw time measures for one covariate pattern.

    ``treated[v]`` is the measure of ``{c = 1, v_t = v, x_t = x}``,
    ``control[v]`` the measure of ``{c = 0, v_t = v, x_t = x}`` and
    ``total`` the measure of ``{x_t = x}``.
    """

    total: float = 0.0
    treated: list = field(default_factory=lambda: [0.0, 0.0])
    control: list = field(default_factory=lambda: [0.0, 0.0])

    def add(self, other: "StratumDurations") -> None:
        self.total += other.total
        for v in (0, 1):
            self.treated[v] += other.treated[v]
            self.control[v] += other.control[v]

    def raw(self, v: int) -> float:
        return self.treated[v] / self.total

    def raw_control(self, v: int) -> float:
        return self.control[v] / self.total


@dataclass
class PropensityTable:
    """Propensity ``P(c = 1, v_t = v | x_t)`` per covariate pattern.

    ``score`` returns the clipped treated score; ``control_score`` the clipped
    ``P(c = 0, v_t = v | x_t)`` used for the control arm of the IPW weight.
    Patterns with ``total < min_duration`` (and patterns never seen) use the
    pooled, pattern-marginal durations instead.
    """

    cause: int
    intervention: int | None
    covariates: tuple[int, ...]
    windows: WindowConfig
    strata: dict[Pattern, StratumDurations]
    marginal: StratumDurations
    epsilon: float = 0.01
    min_duration: float = 0.0

    def retained(self) -> dict[Pattern, StratumDurations]:
        return {k: s for k, s in self.strata.items() if s.total > 0 and s.total >= self.min_duration}

    def _stratum(self, pattern: Pattern) -> tuple[StratumDurations, bool]:
        s = self.strata.get(pattern)
        if s is None or s.total <= 0 or s.total < self.min_duration:
            return self.marginal, True
        return s, False

    def _clip(self, e: float) -> float:
        return float(min(max(e, self.epsilon), 1.0 - self.epsilon))

    def score(self, pattern: Pattern, v: int) -> float:
        return self._clip(self._stratum(pattern)[0].raw(v))

    def control_score(self, pattern: Pattern, v: int) -> float:
        return self._clip(self._stratum(pattern)[0].raw_control(v))

    def uses_fallback(self, pattern: Pattern) -> bool:
        return self._stratum(pattern)[1]

    def to_dict(self) -> dict:
        def row(s: StratumDurations) -> dict:
            return {
                "total": s.total, "treated": list(s.treated), "control": list(s.control),
                "e": [self._clip(s.raw(v)) for v in (0, 1)],
                "e_control": [self._clip(s.raw_control(v)) for v in (0, 1)],
            }
        return {
            "cause": self.cause, "intervention": self.intervention,
            "covariates": list(self.covariates),
            "windows": {"w": self.windows.cause_window, "w_v": self.windows.intervention_window},
            "epsilon": self.epsilon, "min_duration": self.min_duration,
            "marginal": row(self.marginal),
            "strata": {"".join(map(str, k)) or "-": row(s) for k, s in sorted(self.strata.items())},
        }


def default_covariates(taxonomy: Taxonomy, cause: int, outcome: int | None = None,
                       intervention: int | None = None) -> list[int]:
    """Every cause/covariate-role type other than the pair's own ids."""
    skip = {cause, outcome, intervention}
    return [k for k in taxonomy.ids(Role.CAUSE, Role.COVARIATE) if k not in skip]


def stratum_durations(seq: EventSequence, cause: int, intervention: int | None,
                      covariates: Sequence[int], windows: WindowConfig,
                      taxonomy: Taxonomy | None = None) -> dict[Pattern, StratumDurations]:
    tl = joint_timeline(seq, cause, intervention, covariates, windows, taxonomy)
    out: dict[Pattern, StratumDurations] = {}
    lengths = tl.lengths
    for key, length, c, v in zip(tl.pattern_keys(), lengths.tolist(), tl.c.tolist(), tl.v.tolist()):
        s = out.setdefault(key, StratumDurations())
        s.total += length
        if c:
            s.treated[int(v)] += length
        else:
            s.control[int(v)] += length
    return out


def estimate_propensity(data: Sequence[EventSequence], taxonomy: Taxonomy, windows: WindowConfig,
                        pair: tuple[int, int | None], covariate_ids: Sequence[int] | None = None,
                        epsilon: float = 0.01, min_duration: float = 0.0) -> PropensityTable:
    """Pool exact indicator durations over all sequences, per covariate pattern."""
    if not data:
        raise EstimationError("propensity estimation needs at least one sequence")
    cause, intervention = pair
    taxonomy.check(cause)
    if intervention is not None:
        taxonomy.check(intervention)
    if covariate_ids is None:
        covariate_ids = default_covariates(taxonomy, cause, None, intervention)
    covariate_ids = tuple(int(k) for k in covariate_ids)
    if cause in covariate_ids or (intervention is not None and intervention in covariate_ids):
        raise EstimationError("covariates must exclude the cause and the intervention")
    strata: dict[Pattern, StratumDurations] = {}
    for seq in data:
        for key, s in stratum_durations(seq, cause, intervention, covariate_ids, windows, taxonomy).items():
            strata.setdefault(key, StratumDurations()).add(s)
    dropped = [k for k, s in strata.items() if s.total <= 0]
    for k in dropped:
        log.warning("event=stratum_dropped pattern=%s reason=zero_duration", "".join(map(str, k)))
        del strata[k]
    if not strata:
        raise EstimationError("every covariate stratum has zero duration")
    marginal = StratumDurations()
    for s in strata.values():
        marginal.add(s)
    return PropensityTable(cause, intervention, covariate_ids, windows, strata, marginal,
                           epsilon, min_duration)
