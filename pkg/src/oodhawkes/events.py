"""Event vocabulary: types, sequences, windows and windowed indicators."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, TaxonomyError
from .intervals import IntervalSet


class Role(str, enum.Enum):
    CAUSE = "Cause"
    OUTCOME = "Outcome"
    INTERVENTION = "Intervention"
    COVARIATE = "Covariate"


@dataclass(frozen=True)
class EventType:
    id: int
    role: Role


class Taxonomy:
    """Dense map ``0..K-1`` -> :class:`Role`."""

    def __init__(self, roles: Sequence[Role | str]):
        self._roles = tuple(Role(r) for r in roles)

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "Taxonomy":
        ids = sorted(int(k) for k in mapping)
        if ids != list(range(len(ids))):
            raise TaxonomyError(f"taxonomy ids must be dense 0..K-1, got {ids}")
        try:
            return cls([Role(mapping[k] if k in mapping else mapping[str(k)]) for k in ids])
        except ValueError as exc:
            raise TaxonomyError(str(exc)) from None

    @classmethod
    def build(cls, n_cause: int, n_outcome: int, n_intervention: int = 0,
              n_covariate: int = 0) -> "Taxonomy":
        return cls([Role.CAUSE] * n_cause + [Role.OUTCOME] * n_outcome
                   + [Role.COVARIATE] * n_covariate
                   + [Role.INTERVENTION] * n_intervention)

    def to_mapping(self) -> dict[str, str]:
        return {str(i): r.value for i, r in enumerate(self._roles)}

    def __len__(self) -> int:
        return len(self._roles)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Taxonomy) and self._roles == other._roles

    def __repr__(self) -> str:
        return f"Taxonomy({[r.value for r in self._roles]})"

    @property
    def types(self) -> list[EventType]:
        return [EventType(i, r) for i, r in enumerate(self._roles)]

    def role(self, type_id: int) -> Role:
        self.check(type_id)
        return self._roles[type_id]

    def ids(self, *roles: Role) -> list[int]:
        return [i for i, r in enumerate(self._roles) if r in roles]

    def check(self, type_id: int) -> None:
        if not (0 <= int(type_id) < len(self._roles)):
            raise TaxonomyError(f"unknown event type id {type_id} (taxonomy has {len(self)})")

    def check_role(self, type_id: int, *roles: Role) -> None:
        if self.role(type_id) not in roles:
            names = "/".join(r.value for r in roles)
            raise TaxonomyError(f"type {type_id} has role {self.role(type_id).value}, expected {names}")


@dataclass(frozen=True)
class EventSequence:
    """Events ``(type, t)`` on ``[0, T)`` with strictly increasing times."""

    seq_id: str
    horizon: float
    times: np.ndarray
    types: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float).reshape(-1)
        types = np.asarray(self.types, dtype=np.int64).reshape(-1)
        if times.shape != types.shape:
            raise ValueError("times and types must align")
        if not self.horizon > 0:
            raise ValueError(f"sequence {self.seq_id}: horizon must be > 0")
        if times.size:
            if times[0] < 0 or times[-1] >= self.horizon:
                raise ValueError(f"sequence {self.seq_id}: events must lie in [0, T)")
            if np.any(np.diff(times) <= 0):
                raise ValueError(f"sequence {self.seq_id}: timestamps must be strictly increasing")
        times.setflags(write=False)
        types.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "horizon", float(self.horizon))

    def __len__(self) -> int:
        return int(self.times.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventSequence):
            return NotImplemented
        return (self.seq_id == other.seq_id and self.horizon == other.horizon
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.types, other.types))

    def validate(self, taxonomy: Taxonomy) -> None:
        if self.types.size and (self.types.min() < 0 or self.types.max() >= len(taxonomy)):
            bad = self.types[(self.types < 0) | (self.types >= len(taxonomy))][0]
            raise TaxonomyError(f"sequence {self.seq_id}: unknown event type id {bad}")

    def times_of(self, type_ids: Iterable[int]) -> np.ndarray:
        mask = np.isin(self.types, np.fromiter(type_ids, dtype=np.int64))
        return self.times[mask]

    def without(self, type_ids: Iterable[int]) -> "EventSequence":
        mask = ~np.isin(self.types, np.fromiter(type_ids, dtype=np.int64))
        return EventSequence(self.seq_id, self.horizon, self.times[mask], self.types[mask])

    def to_record(self) -> dict:
        return {
            "seq_id": self.seq_id,
            "T": self.horizon,
            "events": [{"t": t, "type": e} for t, e in zip(self.times.tolist(), self.types.tolist())],
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "EventSequence":
        events = rec.get("events", [])
        return cls(str(rec["seq_id"]), float(rec["T"]),
                   np.array([float(e["t"]) for e in events]),
                   np.array([int(e["type"]) for e in events], dtype=np.int64))


@dataclass(frozen=True)
class WindowConfig:
    cause_window: float
    intervention_window: float

    def __post_init__(self) -> None:
        if not (self.cause_window > 0 and self.intervention_window > 0):
            raise ConfigError("window lengths must be strictly positive")

    def check_horizon(self, horizon: float) -> None:
        if self.cause_window > horizon or self.intervention_window > horizon:
            raise ConfigError(f"windows {self} exceed horizon {horizon}")


def indicator_set(seq: EventSequence, type_ids: Iterable[int], w: float,
                  taxonomy: Taxonomy | None = None) -> IntervalSet:
    """Times ``t`` at which a listed type occurred in ``[t - w, t)``.

    Equivalently the union of ``(s, s + w]`` over matching events ``s``,
    clipped to ``(0, T]``.
    """
    if not w > 0:
        raise ConfigError(f"window must be > 0, got {w}")
    type_ids = list(type_ids)
    if taxonomy is not None:
        for k in type_ids:
            taxonomy.check(k)
    s = seq.times_of(type_ids)
    return IntervalSet.union_of(s, np.minimum(s + w, seq.horizon)).clip(0.0, seq.horizon)


@dataclass(frozen=True)
class PatternTimeline:
    """Piecewise-constant bit-vector on ``(0, T]``.

    Piece ``k`` covers ``(edges[k], edges[k+1]]`` and carries ``patterns[k]``.
    Consecutive pieces always differ.
    """

    edges: np.ndarray
    patterns: np.ndarray  # (n_pieces, n_bits) bool

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.edges)

    def keys(self) -> list[tuple[int, ...]]:
        return [tuple(int(b) for b in row) for row in self.patterns]

    def at(self, t) -> np.ndarray:
        """Pattern rows for times ``t`` in ``(0, T]``."""
        k = np.searchsorted(self.edges, np.asarray(t, dtype=float), side="left") - 1
        k = np.clip(k, 0, len(self.patterns) - 1)
        return self.patterns[k]

    def measure_by_pattern(self) -> dict[tuple[int, ...], float]:
        out: dict[tuple[int, ...], float] = {}
        for key, length in zip(self.keys(), self.lengths.tolist()):
            out[key] = out.get(key, 0.0) + length
        return out

    def sets_by_pattern(self) -> dict[tuple[int, ...], IntervalSet]:
        grouped: dict[tuple[int, ...], list[int]] = {}
        for k, key in enumerate(self.keys()):
            grouped.setdefault(key, []).append(k)
        return {key: IntervalSet(self.edges[idx], self.edges[np.asarray(idx) + 1])
                for key, idx in grouped.items()}


def covariate_pattern_timeline(seq: EventSequence, covariate_ids: Sequence[int], w: float,
                               taxonomy: Taxonomy | None = None) -> PatternTimeline:
    sets = [indicator_set(seq, [k], w, taxonomy) for k in covariate_ids]
    edges = np.unique(np.concatenate([[0.0, seq.horizon]] + [s.breakpoints() for s in sets]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    pats = np.zeros((mids.size, len(sets)), dtype=bool)
    for j, s in enumerate(sets):
        pats[:, j] = s.contains(mids)
    # collapse equal neighbours so pieces are maximal
    if mids.size > 1:
        change = np.any(pats[1:] != pats[:-1], axis=1)
        keep = np.concatenate([[True], change])
        pats = pats[keep]
        edges = np.concatenate([edges[:-1][keep], [edges[-1]]])
    return PatternTimeline(edges, pats)
