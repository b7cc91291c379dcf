"""Checkpoints: a JSON manifest plus a little-endian float64 sidecar."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ConfigError, DataIOError
from ..io import read_json, write_json
from .model import BasisSet, IntensityNetwork, ModelConfig, TypeMap, param_shapes

FORMAT = "oodhawkes-intensity-net/1"
MANIFEST = "manifest.json"
WEIGHTS = "params.bin"


def save_checkpoint(net: IntensityNetwork, out_dir: str | Path, extra: dict | None = None) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"{out}: {exc.strerror}") from exc
    entries, offset, chunks = [], 0, []
    for name, arr in net.params.items():
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").reshape(-1))
    blob = np.concatenate(chunks) if chunks else np.empty(0, dtype="<f8")
    try:
        (out / WEIGHTS).write_bytes(blob.astype("<f8").tobytes())
    except OSError as exc:
        raise DataIOError(f"{out / WEIGHTS}: {exc.strerror}") from exc
    write_json(out / MANIFEST, {
        "format": FORMAT,
        "config": net.config.to_dict(),
        "basis": {"mean_gap": net.basis.mean_gap, "count": net.basis.count},
        "type_map": net.type_map.to_dict(),
        "intervention_window": net.intervention_window,
        "time_unit": net.time_unit,
        "nll_types": net.nll_types,
        "params": entries,
        "n_values": int(offset),
        "extra": extra or {},
    })
    return out


def load_checkpoint(path: str | Path) -> IntensityNetwork:
    path = Path(path)
    root = path.parent if path.name == MANIFEST else path
    man = read_json(root / MANIFEST)
    if man.get("format") != FORMAT:
        raise ConfigError(f"{root / MANIFEST}: unsupported checkpoint format {man.get('format')!r}")
    try:
        raw = (root / WEIGHTS).read_bytes()
    except OSError as exc:
        raise DataIOError(f"{root / WEIGHTS}: {exc.strerror or exc}") from exc
    flat = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if flat.size != man["n_values"]:
        raise DataIOError(f"{root / WEIGHTS}: expected {man['n_values']} values, found {flat.size}")
    cfg = ModelConfig(**man["config"])
    expected = param_shapes(cfg)
    params = {}
    for e in man["params"]:
        shape = tuple(e["shape"])
        if expected.get(e["name"]) != shape:
            raise ConfigError(f"{root / MANIFEST}: parameter {e['name']} has shape {shape}, "
                              f"config implies {expected.get(e['name'])}")
        n = int(np.prod(shape, dtype=np.int64))
        params[e["name"]] = flat[e["offset"]:e["offset"] + n].reshape(shape).copy()
    if set(params) != set(expected):
        raise ConfigError(f"{root / MANIFEST}: parameter set does not match the config")
    return IntensityNetwork(cfg, BasisSet(man["basis"]["mean_gap"], man["basis"]["count"]),
                            TypeMap.from_dict(man["type_map"]), man["intervention_window"],
                            man["time_unit"], params, man.get("nll_types", "outcome"))
