"""Training criteria: point-process NLL, next-type cross-entropy, basis-weight penalty."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError
from . import autodiff as ad
from .autodiff import Tensor
from .model import Batch, ModelOutput

log = logging.getLogger(__name__)


def _event_rows(out: ModelOutput, batch: Batch) -> Tensor:
    """Log weights governing each event: position i-1, the event's own type row -> (b, L, B)."""
    b, lmax = batch.types.shape
    bi = np.arange(b)[:, None].repeat(lmax, axis=1)
    pi = np.arange(lmax)[None, :].repeat(b, axis=0)
    return ad.getitem(out.log_weights, (bi, pi, batch.types))


def loss_nll(out: ModelOutput, batch: Batch) -> Tensor:
    """(1/b) sum_k [-sum_i log lambda_{e_i}(t_i) + sum_{e in outcome} int_0^T lambda_e]."""
    if batch.size == 0:
        log.warning("event=empty_batch loss=nll")
        return Tensor(0.0)
    if batch.n_events:
        loglam = ad.logsumexp(_event_rows(out, batch) + batch.log_kappa, axis=-1)   # (b, L)
        if not np.all(np.isfinite(loglam.data[batch.valid])):
            raise TrainingError("non-finite log-intensity at an observed event")
        log_term = ad.tsum(ad.where(batch.valid, loglam, 0.0))
    else:
        log_term = Tensor(0.0)
    outcome = np.flatnonzero(batch.outcome_mask)
    w = ad.exp(ad.getitem(out.log_weights, (slice(None), slice(None), outcome)))    # (b, n, Eo, B)
    integral = ad.tsum(w * batch.quad[:, :, None, :])
    return (integral - log_term) * (1.0 / batch.size)


def loss_ce(out: ModelOutput, batch: Batch) -> Tensor:
    """Cross-entropy of event i's type predicted from position i-1."""
    if batch.size == 0 or batch.n_events == 0:
        if batch.size == 0:
            log.warning("event=empty_batch loss=ce")
        return Tensor(0.0)
    lmax = batch.types.shape[1]
    logp = ad.log_softmax(ad.getitem(out.logits, (slice(None), slice(0, lmax))), axis=-1)
    b = batch.size
    bi = np.arange(b)[:, None].repeat(lmax, axis=1)
    pi = np.arange(lmax)[None, :].repeat(b, axis=0)
    picked = ad.getitem(logp, (bi, pi, batch.types))
    return -ad.tsum(ad.where(batch.valid, picked, 0.0)) * (1.0 / b)


def loss_reg(out: ModelOutput, batch: Batch) -> Tensor:
    """(1/b) sum_k sum_i sum_l exp(w_l)^2 over the event's own type row."""
    if batch.size == 0:
        log.warning("event=empty_batch loss=reg")
        return Tensor(0.0)
    if batch.n_events == 0:
        return Tensor(0.0)
    sq = ad.exp(_event_rows(out, batch) * 2.0)
    return ad.tsum(sq * batch.valid[:, :, None]) * (1.0 / batch.size)


@dataclass
class LossParts:
    total: Tensor
    nll: float
    ce: float
    reg: float


def total_loss(out: ModelOutput, batch: Batch, alpha: float, beta: float) -> LossParts:
    nll = loss_nll(out, batch)
    ce = loss_ce(out, batch)
    reg = loss_reg(out, batch)
    total = nll + ce * alpha + reg * beta
    return LossParts(total, nll.item(), ce.item(), reg.item())


def accuracy(out: ModelOutput, batch: Batch) -> tuple[int, int]:
    """(correct, total) next-type predictions."""
    lmax = batch.types.shape[1]
    pred = np.argmax(out.logits.data[:, :lmax], axis=-1)
    return int(((pred == batch.types) & batch.valid).sum()), int(batch.valid.sum())
