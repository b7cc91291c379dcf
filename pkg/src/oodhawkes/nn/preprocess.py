"""Temporal binning: overlapping fixed-length windows of events, rescaled to [0, 1]."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from ..events import EventSequence


@dataclass(frozen=True)
class BinnedSequence:
    """A rescaled slice plus what is needed to map it back to the source clock."""

    seq: EventSequence
    source_id: str
    offset: float
    scale: float

    def denormalize(self, t) -> np.ndarray:
        return np.asarray(t, dtype=float) * self.scale + self.offset

    def to_record(self) -> dict:
        return {"seq_id": self.seq.seq_id, "source_id": self.source_id,
                "offset": self.offset, "scale": self.scale}


def bin_sequence(seq: EventSequence, bin_len: int = 400, stride: int = 100) -> list[BinnedSequence]:
    """Slices of ``bin_len`` events starting at every ``stride``-th event.

    Each slice is rebased so that the previous event (or 0) sits at time 0
    and divided by its span, which maps it into ``[0, 1)``: the slice's
    horizon becomes 1.  A sequence shorter than ``bin_len`` is passed through
    whole (still rescaled).
    """
    if stride <= 0 or bin_len <= 0:
        raise ConfigError("bin_len and stride must be positive")
    n = len(seq)
    if n <= bin_len:
        starts = [0]
    else:
        starts = list(range(0, n - bin_len + 1, stride))
    out = []
    for k, s in enumerate(starts):
        e = min(s + bin_len, n)
        offset = float(seq.times[s - 1]) if s > 0 else 0.0
        end = float(seq.times[e]) if e < n else seq.horizon
        scale = end - offset
        times = (seq.times[s:e] - offset) / scale
        sub_id = seq.seq_id if len(starts) == 1 else f"{seq.seq_id}/b{k}"
        out.append(BinnedSequence(EventSequence(sub_id, 1.0, times, seq.types[s:e]), seq.seq_id, offset, scale))
    return out


def preprocess(data: Sequence[EventSequence], bin_len: int = 400, stride: int = 100) -> list[BinnedSequence]:
    out: list[BinnedSequence] = []
    for seq in data:
        out.extend(bin_sequence(seq, bin_len, stride))
    return out
