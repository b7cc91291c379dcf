"""File formats shared by every subcommand.

* ``sequences.jsonl``: one ``{"seq_id", "T", "events": [{"t", "type"}]}`` per line.
* ``taxonomy.json``: ``{"0": "Cause", "1": "Outcome", ...}``.

Floats are written with ``repr`` precision, so a write/read cycle is exact.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .errors import DataIOError, TaxonomyError
from .events import EventSequence, Taxonomy


def _json_default(o: Any) -> Any:
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"Object of type {type(o).__name__} is not JSON serializable")


def write_json(path: str | Path, obj: Any) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataIOError(f"{path}: invalid JSON ({exc})") from exc


def write_sequences(path: str | Path, seqs: Iterable[EventSequence]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            for s in seqs:
                fh.write(json.dumps(s.to_record(), separators=(",", ":")) + "\n")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_sequences(path: str | Path, taxonomy: Taxonomy | None = None) -> list[EventSequence]:
    path = Path(path)
    out = []
    try:
        with path.open() as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    seq = EventSequence.from_record(json.loads(line))
                except (KeyError, ValueError, TypeError) as exc:
                    raise DataIOError(f"{path}:{lineno}: bad sequence record ({exc})") from exc
                if taxonomy is not None:
                    try:
                        seq.validate(taxonomy)
                    except TaxonomyError as exc:
                        raise TaxonomyError(f"{path}:{lineno}: {exc}") from None
                out.append(seq)
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return out


def write_taxonomy(path: str | Path, taxonomy: Taxonomy) -> None:
    write_json(path, taxonomy.to_mapping())


def read_taxonomy(path: str | Path) -> Taxonomy:
    return Taxonomy.from_mapping(read_json(path))


def load_dataset_dir(data_dir: str | Path) -> tuple[list[EventSequence], Taxonomy]:
    data_dir = Path(data_dir)
    taxonomy = read_taxonomy(data_dir / "taxonomy.json")
    return read_sequences(data_dir / "sequences.jsonl", taxonomy), taxonomy
