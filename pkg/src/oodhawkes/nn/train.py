"""Training loop: Adam, triangular cyclic learning rate, clipping, early stopping."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DataIOError, TrainingError
from ..events import EventSequence, Taxonomy
from ..io import write_json
from .losses import accuracy, loss_ce, loss_nll, loss_reg, total_loss
from .model import Batch, BasisSet, IntensityNetwork, ModelConfig, TypeMap, make_batch

log = logging.getLogger(__name__)

HISTORY_FIELDS = ("epoch", "lr", "train_nll", "train_ce", "train_reg", "train_acc",
                  "val_nll", "val_ce", "val_reg", "val_acc")


@dataclass
class TrainConfig:
    base_lr: float = 0.0005
    max_lr: float = 0.001
    lr_step_epochs: int = 20
    batch_size: int = 64
    alpha_ce: float = 5.0
    beta_reg: float = 0.01
    grad_clip_norm: float = 1.0
    early_stop_patience: int = 20
    max_epochs: int = 300
    val_fraction: float = 0.2
    seed: int = 0
    quadrature: str = "trapezoid"
    quad_points: int = 32
    nll_types: str = "outcome"

    def __post_init__(self) -> None:
        for name in ("base_lr", "max_lr", "lr_step_epochs", "batch_size", "grad_clip_norm",
                     "early_stop_patience", "max_epochs", "quad_points"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"train.{name} must be positive")
        if self.base_lr > self.max_lr:
            raise ConfigError("train.base_lr must not exceed train.max_lr")
        if self.alpha_ce < 0 or self.beta_reg < 0:
            raise ConfigError("train loss weights must be >= 0")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("train.val_fraction must lie in [0, 1)")
        if self.quadrature not in ("trapezoid", "exact"):
            raise ConfigError("train.quadrature must be 'trapezoid' or 'exact'")
        if self.nll_types not in ("outcome", "all"):
            raise ConfigError("train.nll_types must be 'outcome' or 'all'")
        if self.quad_points < 2:
            raise ConfigError("train.quad_points must be >= 2")


def cyclic_lr(epoch: int, cfg: TrainConfig) -> float:
    """Triangular schedule: base -> max over ``lr_step_epochs`` epochs and back."""
    cycle = math.floor(1 + epoch / (2 * cfg.lr_step_epochs))
    x = abs(epoch / cfg.lr_step_epochs - 2 * cycle + 1)
    return cfg.base_lr + (cfg.max_lr - cfg.base_lr) * max(0.0, 1.0 - x)


class Adam:
    def __init__(self, params: dict[str, np.ndarray], b1: float = 0.9, b2: float = 0.999,
                 eps: float = 1e-8):
        self.b1, self.b2, self.eps = b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            params[k] -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for k in grads:
            grads[k] = grads[k] * scale
    return norm


@dataclass
class FitResult:
    net: IntensityNetwork
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    train_ids: list[str] = field(default_factory=list)
    val_ids: list[str] = field(default_factory=list)
    stopped_early: bool = False


def mean_gap(seqs: Sequence[EventSequence], type_map: TypeMap, time_unit: float = 1.0) -> float:
    """Mean inter-event gap of the modelled events (first gap measured from 0)."""
    gaps = []
    keep = np.asarray(type_map.event_ids, dtype=np.int64)
    for s in seqs:
        t = s.times[np.isin(s.types, keep)] / time_unit
        gaps.append(np.diff(np.concatenate([[0.0], t])))
    g = np.concatenate(gaps) if gaps else np.empty(0)
    if g.size == 0 or not g.mean() > 0:
        return max(s.horizon for s in seqs) / time_unit
    return float(g.mean())


def split_sequences(seqs: Sequence[EventSequence], val_fraction: float,
                    seed: int) -> tuple[list[EventSequence], list[EventSequence]]:
    n = len(seqs)
    n_val = int(round(n * val_fraction)) if n >= 2 else 0
    n_val = min(n_val, n - 1)
    order = np.random.default_rng(seed).permutation(n)
    val = sorted(order[:n_val].tolist())
    train = sorted(order[n_val:].tolist())
    return [seqs[i] for i in train], [seqs[i] for i in val]


def _init_head(net: IntensityNetwork, batch: Batch) -> None:
    """Start near a per-type Poisson fit: unity weight at the empirical rate."""
    e, nb = net.config.n_event_types, net.config.basis_count_B
    exposure = float(batch.quad[:, :, 0].sum())
    counts = np.bincount(batch.types[batch.valid], minlength=e).astype(float)
    rate = np.maximum(counts, 0.5) / max(exposure, 1e-12)
    bias = np.empty((e, nb))
    bias[:, 0] = np.log(rate)
    bias[:, 1:] = np.log(rate)[:, None] - 3.0
    net.params["head_b"] = bias.reshape(-1)
    net.params["head_w"] = net.params["head_w"] * 0.1


def evaluate(net: IntensityNetwork, batch: Batch, chunk: int = 64) -> dict[str, float]:
    """Dataset-level NLL/CE/reg (per-sequence means) and next-type accuracy, no dropout."""
    if batch.size == 0:
        return {"nll": float("nan"), "ce": float("nan"), "reg": float("nan"), "acc": float("nan")}
    tot = {"nll": 0.0, "ce": 0.0, "reg": 0.0}
    correct = n = 0
    for lo in range(0, batch.size, chunk):
        sub = batch.subset(np.arange(lo, min(lo + chunk, batch.size)))
        out = net.forward(sub)
        tot["nll"] += loss_nll(out, sub).item() * sub.size
        tot["ce"] += loss_ce(out, sub).item() * sub.size
        tot["reg"] += loss_reg(out, sub).item() * sub.size
        c, m = accuracy(out, sub)
        correct, n = correct + c, n + m
    res = {k: v / batch.size for k, v in tot.items()}
    res["acc"] = correct / n if n else float("nan")
    return res


def _dump(out_dir: Path | None, epoch: int, ids: list[str], losses: dict) -> str:
    if out_dir is None:
        return ""
    path = out_dir / "nonfinite_batch.json"
    try:
        write_json(path, {"epoch": epoch, "seq_ids": ids, "losses": losses})
    except DataIOError:
        return ""
    return str(path)


def fit(seqs: Sequence[EventSequence], taxonomy: Taxonomy, intervention_window: float | Sequence[float],
        model_cfg: ModelConfig | None = None, train_cfg: TrainConfig | None = None,
        out_dir: str | Path | None = None, time_unit: float = 1.0) -> FitResult:
    """Train an intensity network; returns the best (lowest validation NLL) snapshot."""
    if not seqs:
        raise TrainingError("no training sequences")
    train_cfg = train_cfg or TrainConfig()
    type_map = TypeMap.from_taxonomy(taxonomy)
    if model_cfg is None:
        model_cfg = ModelConfig.desk(len(type_map.event_ids), len(type_map.intervention_ids))
    out_path = Path(out_dir) if out_dir is not None else None
    train_seqs, val_seqs = split_sequences(seqs, train_cfg.val_fraction, train_cfg.seed)
    basis = BasisSet(mean_gap(train_seqs, type_map, time_unit), model_cfg.basis_count_B)
    net = IntensityNetwork.create(model_cfg, basis, type_map, intervention_window, time_unit,
                                  seed=train_cfg.seed, nll_types=train_cfg.nll_types)

    def build(ss: Sequence[EventSequence]) -> Batch:
        return make_batch([net.encode(s) for s in ss], basis, model_cfg.n_intervention_types,
                          net.compensator_mask, train_cfg.quadrature, train_cfg.quad_points)

    train_b = build(train_seqs)
    val_b = build(val_seqs) if val_seqs else None
    _init_head(net, train_b)
    if train_b.n_events == 0:
        log.warning("event=no_training_events")

    rng = np.random.default_rng([train_cfg.seed, 1])
    adam = Adam(net.params)
    history: list[dict] = []

    def record(epoch: int, lr: float) -> dict:
        tr = evaluate(net, train_b)
        va = evaluate(net, val_b) if val_b is not None else tr
        row = {"epoch": epoch, "lr": lr,
               "train_nll": tr["nll"], "train_ce": tr["ce"], "train_reg": tr["reg"], "train_acc": tr["acc"],
               "val_nll": va["nll"], "val_ce": va["ce"], "val_reg": va["reg"], "val_acc": va["acc"]}
        history.append(row)
        log.info("event=epoch epoch=%d lr=%.6g train_nll=%.6g val_nll=%.6g train_ce=%.6g",
                 epoch, lr, tr["nll"], va["nll"], tr["ce"])
        return row

    row = record(0, 0.0)
    best = {"val": row["val_nll"], "epoch": 0, "params": {k: v.copy() for k, v in net.params.items()}}
    stale, stopped = 0, False
    ids = [s.seq_id for s in train_seqs]
    for epoch in range(1, train_cfg.max_epochs + 1):
        lr = cyclic_lr(epoch - 1, train_cfg)
        order = rng.permutation(train_b.size)
        for lo in range(0, order.size, train_cfg.batch_size):
            idx = np.sort(order[lo:lo + train_cfg.batch_size])
            sub = train_b.subset(idx)
            params = net.tensors()
            out = net.forward(sub, params, dropout_rng=rng)
            parts = total_loss(out, sub, train_cfg.alpha_ce, train_cfg.beta_reg)
            if not np.isfinite(parts.total.item()):
                where = _dump(out_path, epoch, [ids[i] for i in idx],
                              {"nll": parts.nll, "ce": parts.ce, "reg": parts.reg})
                raise TrainingError(f"non-finite loss at epoch {epoch}"
                                    + (f"; batch dumped to {where}" if where else ""))
            parts.total.backward()
            grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in params.items()}
            clip_global_norm(grads, train_cfg.grad_clip_norm)
            adam.step(net.params, grads, lr)
        row = record(epoch, lr)
        if not np.isfinite(row["val_nll"]):
            where = _dump(out_path, epoch, ids, {"val_nll": row["val_nll"]})
            raise TrainingError(f"non-finite validation NLL at epoch {epoch}"
                                + (f"; dumped to {where}" if where else ""))
        if row["val_nll"] < best["val"]:
            best = {"val": row["val_nll"], "epoch": epoch,
                    "params": {k: v.copy() for k, v in net.params.items()}}
            stale = 0
        else:
            stale += 1
            if stale >= train_cfg.early_stop_patience:
                stopped = True
                log.info("event=early_stop epoch=%d best_epoch=%d", epoch, best["epoch"])
                break
    net.params = best["params"]
    return FitResult(net, history, best["epoch"], ids, [s.seq_id for s in val_seqs], stopped)


def write_history(path: str | Path, history: Sequence[dict]) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS, lineterminator="\n")
            w.writeheader()
            for row in history:
                w.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k] for k in HISTORY_FIELDS})
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
