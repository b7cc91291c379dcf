"""Dataset directories: ``sequences.jsonl``, ``taxonomy.json``, ``truth.json``."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

from ..events import EventSequence, Taxonomy
from ..io import read_json, read_sequences, read_taxonomy, write_json, write_sequences, write_taxonomy
from .params import GroundTruth


def emit_dataset(sequences: Sequence[EventSequence], truth: GroundTruth, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    write_sequences(out / "sequences.jsonl", sequences)
    write_taxonomy(out / "taxonomy.json", truth.taxonomy)
    write_json(out / "truth.json", truth.to_dict())
    return out


def load_dataset(data_dir: str | Path) -> tuple[list[EventSequence], Taxonomy, GroundTruth | None]:
    """Sequences, taxonomy and (when present) the ground truth of a dataset dir."""
    data_dir = Path(data_dir)
    taxonomy = read_taxonomy(data_dir / "taxonomy.json")
    seqs = read_sequences(data_dir / "sequences.jsonl", taxonomy)
    truth_path = data_dir / "truth.json"
    truth = GroundTruth.from_dict(read_json(truth_path)) if truth_path.exists() else None
    return seqs, taxonomy, truth
