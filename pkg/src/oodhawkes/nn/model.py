"""Intervention-aware neural intensity model.

Events are embedded, mixed with a projection of the active-intervention
bit-vector through a learned sigmoid gate, offset by a sinusoidal encoding
of the inter-event gap and passed through a causal transformer encoder and a
convolution whose output channels match the number of basis functions.  The
heads emit per-type log basis weights and next-type logits.  Position 0 is a
learned start token; position ``i`` summarises events ``1..i`` and governs
the intensity on ``(t_i, t_{i+1}]``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erf

from ..errors import ConfigError
from ..events import EventSequence, Role, Taxonomy, indicator_set
from . import autodiff as ad
from .autodiff import Tensor

LN_EPS = 1e-6
MASK_FILL = -1e9
NLL_TYPES = ("outcome", "all")


@dataclass
class ModelConfig:
    n_event_types: int
    n_intervention_types: int
    embed_dim: int = 128
    hidden_dim: int = 64
    encoder_layers: int = 2
    attention_heads: int = 2
    head_dim: int = 64
    ffn_dim: int = 256
    dropout: float = 0.1
    cnn_kernel: int = 5
    cnn_padding: int = 2
    basis_count_B: int = 8
    causal_cnn: bool = True

    def __post_init__(self) -> None:
        ints = ("n_event_types", "embed_dim", "hidden_dim", "encoder_layers", "attention_heads",
                "head_dim", "ffn_dim", "cnn_kernel", "basis_count_B")
        for name in ints:
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"model.{name} must be positive")
        if self.n_intervention_types < 0:
            raise ConfigError("model.n_intervention_types must be >= 0")
        if self.cnn_kernel % 2 != 1 or 2 * self.cnn_padding != self.cnn_kernel - 1:
            raise ConfigError("model.cnn_padding must equal (cnn_kernel - 1) / 2")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("model.dropout must lie in [0, 1)")
        if self.basis_count_B < 1:
            raise ConfigError("model.basis_count_B must be >= 1")

    @classmethod
    def desk(cls, n_event_types: int, n_intervention_types: int, **kw) -> "ModelConfig":
        base = dict(embed_dim=32, hidden_dim=32, encoder_layers=1, attention_heads=1, head_dim=32,
                    ffn_dim=64, basis_count_B=8)
        base.update(kw)
        return cls(n_event_types, n_intervention_types, **base)

    @classmethod
    def paper(cls, n_event_types: int, n_intervention_types: int) -> "ModelConfig":
        return cls(n_event_types, n_intervention_types)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# basis ------------------------------------------------------------------------------

@dataclass(frozen=True)
class BasisSet:
    """Unity plus ``B - 1`` Gaussian bumps over elapsed time.

    Bump ``l`` (1-based) is centred at ``mean_gap * 2**(l - 4)`` with standard
    deviation half its centre and unit peak height.
    """

    mean_gap: float
    count: int = 8

    def __post_init__(self) -> None:
        if not self.mean_gap > 0:
            raise ConfigError("basis mean_gap must be > 0")

    @property
    def centers(self) -> np.ndarray:
        return self.mean_gap * 2.0 ** (np.arange(1, self.count) - 4.0)

    @property
    def widths(self) -> np.ndarray:
        return self.centers / 2.0

    def log_values(self, tau) -> np.ndarray:
        """``log kappa_l(tau)``, shape ``tau.shape + (B,)``."""
        tau = np.asarray(tau, dtype=float)[..., None]
        g = -0.5 * ((tau - self.centers) / self.widths) ** 2
        return np.concatenate([np.zeros(tau.shape), g], axis=-1)

    def values(self, tau) -> np.ndarray:
        return np.exp(self.log_values(tau))

    def integrals_trapezoid(self, lengths, n_points: int = 32) -> np.ndarray:
        """Trapezoid rule for ``int_0^L kappa_l`` with ``n_points`` nodes per interval."""
        lengths = np.asarray(lengths, dtype=float)
        u = np.linspace(0.0, 1.0, n_points)
        w = np.full(n_points, 1.0 / (n_points - 1))
        w[[0, -1]] *= 0.5
        vals = self.values(lengths[..., None] * u)            # (..., n_points, B)
        return np.einsum("...mb,m->...b", vals, w) * lengths[..., None]

    def integrals_exact(self, lengths) -> np.ndarray:
        lengths = np.asarray(lengths, dtype=float)[..., None]
        c, s = self.centers, self.widths
        z = math.sqrt(2.0)
        g = s * math.sqrt(math.pi / 2.0) * (erf((lengths - c) / (z * s)) - erf(-c / (z * s)))
        return np.concatenate([lengths, g], axis=-1)


# inputs ------------------------------------------------------------------------------

@dataclass(frozen=True)
class TypeMap:
    """Translation between taxonomy ids and the model's dense index spaces."""

    event_ids: tuple[int, ...]          # model event index -> taxonomy id
    intervention_ids: tuple[int, ...]   # bit index -> taxonomy id
    outcome_ids: tuple[int, ...]

    @classmethod
    def from_taxonomy(cls, taxonomy: Taxonomy) -> "TypeMap":
        return cls(tuple(taxonomy.ids(Role.CAUSE, Role.OUTCOME, Role.COVARIATE)),
                   tuple(taxonomy.ids(Role.INTERVENTION)),
                   tuple(taxonomy.ids(Role.OUTCOME)))

    def model_index(self, type_id: int) -> int:
        try:
            return self.event_ids.index(int(type_id))
        except ValueError:
            raise ConfigError(f"type {type_id} is not modelled") from None

    @property
    def outcome_mask(self) -> np.ndarray:
        return np.isin(np.asarray(self.event_ids), np.asarray(self.outcome_ids, dtype=np.int64))

    def to_dict(self) -> dict:
        return {"event_ids": list(self.event_ids), "intervention_ids": list(self.intervention_ids),
                "outcome_ids": list(self.outcome_ids)}

    @classmethod
    def from_dict(cls, d: dict) -> "TypeMap":
        return cls(tuple(d["event_ids"]), tuple(d["intervention_ids"]), tuple(d["outcome_ids"]))


@dataclass
class EncodedSequence:
    """Model-space view of one sequence (times in model units)."""

    times: np.ndarray           # (L,)
    types: np.ndarray           # (L,) model indices
    vbin: np.ndarray            # (L, n_interventions) float 0/1
    horizon: float

    def __len__(self) -> int:
        return int(self.times.size)


def intervention_bits(seq: EventSequence, intervention_ids: Sequence[int], window: float | Sequence[float],
                      at: np.ndarray) -> np.ndarray:
    """Bit j is 1 iff intervention j occurred in ``[t - window_j, t)``."""
    windows = np.broadcast_to(np.asarray(window, dtype=float), (len(intervention_ids),))
    out = np.zeros((np.size(at), len(intervention_ids)))
    for j, k in enumerate(intervention_ids):
        out[:, j] = indicator_set(seq, [k], float(windows[j])).contains(at)
    return out


def encode_inputs(seq: EventSequence, type_map: TypeMap, intervention_window: float | Sequence[float],
                  time_unit: float = 1.0) -> EncodedSequence:
    """Drop intervention events and attach the active-intervention bits to the rest.

    ``intervention_window`` is one window for every intervention type or one
    per intervention type.
    """
    keep = np.isin(seq.types, np.asarray(type_map.event_ids, dtype=np.int64))
    times = seq.times[keep]
    lookup = {k: i for i, k in enumerate(type_map.event_ids)}
    types = np.array([lookup[int(k)] for k in seq.types[keep]], dtype=np.int64)
    vbin = intervention_bits(seq, type_map.intervention_ids, intervention_window, times)
    return EncodedSequence(times / time_unit, types, vbin, seq.horizon / time_unit)


@dataclass
class Batch:
    """Padded batch.  Positions ``0..L`` per sequence; event ``i`` sits at position ``i``."""

    types: np.ndarray        # (b, Lmax) int, event i at column i-1
    valid: np.ndarray        # (b, Lmax) bool
    dt: np.ndarray           # (b, Lmax+1) elapsed since previous event, 0 at the start token
    vbin: np.ndarray         # (b, Lmax+1, V)
    pos_valid: np.ndarray    # (b, Lmax+1) bool
    log_kappa: np.ndarray    # (b, Lmax, B) log basis values at each event
    quad: np.ndarray         # (b, Lmax+1, B) int of kappa over the interval a position governs
    lengths: np.ndarray      # (b,)
    outcome_mask: np.ndarray  # (E,) bool

    @property
    def size(self) -> int:
        return int(self.lengths.size)

    @property
    def n_events(self) -> int:
        return int(self.lengths.sum())

    def subset(self, idx) -> "Batch":
        """Rows ``idx``, trimmed to their longest sequence."""
        idx = np.asarray(idx, dtype=np.int64)
        n = int(self.lengths[idx].max()) if idx.size else 0
        return Batch(self.types[idx, :n], self.valid[idx, :n], self.dt[idx, :n + 1],
                     self.vbin[idx, :n + 1], self.pos_valid[idx, :n + 1], self.log_kappa[idx, :n],
                     self.quad[idx, :n + 1], self.lengths[idx], self.outcome_mask)


def make_batch(seqs: Sequence[EncodedSequence], basis: BasisSet, n_interventions: int,
               outcome_mask: np.ndarray, quadrature: str = "trapezoid",
               n_points: int = 32) -> Batch:
    b = len(seqs)
    lmax = max((len(s) for s in seqs), default=0)
    nb = basis.count
    types = np.zeros((b, lmax), dtype=np.int64)
    valid = np.zeros((b, lmax), dtype=bool)
    dt = np.zeros((b, lmax + 1))
    vbin = np.zeros((b, lmax + 1, n_interventions))
    pos_valid = np.zeros((b, lmax + 1), dtype=bool)
    log_kappa = np.zeros((b, lmax, nb))
    quad = np.zeros((b, lmax + 1, nb))
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    for k, s in enumerate(seqs):
        n = len(s)
        prev = np.concatenate([[0.0], s.times])
        gaps = np.diff(prev)
        types[k, :n] = s.types
        valid[k, :n] = True
        dt[k, 1:n + 1] = gaps
        vbin[k, 1:n + 1] = s.vbin
        pos_valid[k, :n + 1] = True
        log_kappa[k, :n] = basis.log_values(gaps)
        spans = np.diff(np.concatenate([prev, [s.horizon]]))
        if quadrature == "trapezoid":
            quad[k, :n + 1] = basis.integrals_trapezoid(spans, n_points)
        elif quadrature == "exact":
            quad[k, :n + 1] = basis.integrals_exact(spans)
        else:
            raise ConfigError(f"unknown quadrature {quadrature!r}")
    return Batch(types, valid, dt, vbin, pos_valid, log_kappa, quad, lengths,
                 np.asarray(outcome_mask, dtype=bool))


def sinusoid(x: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal encoding of a dimensionless gap; geometric frequencies 8*pi .. 8*pi/256."""
    k = dim // 2
    freqs = 8.0 * math.pi * (1.0 / 256.0) ** (np.arange(k) / max(k - 1, 1))
    ang = np.asarray(x, dtype=float)[..., None] * freqs
    out = np.zeros(np.shape(x) + (dim,))
    out[..., 0:2 * k:2] = np.sin(ang)
    out[..., 1:2 * k:2] = np.cos(ang)
    if dim % 2:
        out[..., -1] = 1.0
    return out


# network --------------------------------------------------------------------------------

@dataclass
class ModelOutput:
    log_weights: Tensor   # (b, L+1, E, B)
    logits: Tensor        # (b, L+1, E)


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape or (fan_in, fan_out))


@dataclass
class IntensityNetwork:
    config: ModelConfig
    basis: BasisSet
    type_map: TypeMap
    intervention_window: float | list[float] = 1.0
    time_unit: float = 1.0
    params: dict[str, np.ndarray] = field(default_factory=dict)
    nll_types: str = "outcome"

    @property
    def compensator_mask(self) -> np.ndarray:
        """Types whose integral enters the NLL: outcome types, or every modelled type."""
        if self.nll_types == "all":
            return np.ones(self.config.n_event_types, dtype=bool)
        return self.type_map.outcome_mask

    @classmethod
    def create(cls, config: ModelConfig, basis: BasisSet, type_map: TypeMap,
               intervention_window: float | Sequence[float] = 1.0, time_unit: float = 1.0,
               seed: int = 0, nll_types: str = "outcome") -> "IntensityNetwork":
        if len(type_map.event_ids) != config.n_event_types:
            raise ConfigError("n_event_types disagrees with the taxonomy")
        if len(type_map.intervention_ids) != config.n_intervention_types:
            raise ConfigError("n_intervention_types disagrees with the taxonomy")
        if basis.count != config.basis_count_B:
            raise ConfigError("basis size disagrees with basis_count_B")
        if nll_types not in NLL_TYPES:
            raise ConfigError(f"nll_types must be one of {NLL_TYPES}")
        if np.ndim(intervention_window):
            intervention_window = [float(w) for w in intervention_window]
            if len(intervention_window) != config.n_intervention_types:
                raise ConfigError("need one intervention window per intervention type")
        else:
            intervention_window = float(intervention_window)
        net = cls(config, basis, type_map, intervention_window, float(time_unit),
                  nll_types=nll_types)
        net.params = init_params(config, np.random.default_rng(seed))
        return net

    @property
    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def encode(self, seq: EventSequence) -> EncodedSequence:
        return encode_inputs(seq, self.type_map, self.intervention_window, self.time_unit)

    def batch(self, seqs: Sequence[EventSequence], quadrature: str = "trapezoid",
              n_points: int = 32) -> Batch:
        enc = [self.encode(s) for s in seqs]
        return make_batch(enc, self.basis, self.config.n_intervention_types,
                          self.compensator_mask, quadrature, n_points)

    def tensors(self) -> dict[str, Tensor]:
        return {k: Tensor(v, requires_grad=True, name=k) for k, v in self.params.items()}

    def forward(self, batch: Batch, params: dict[str, Tensor] | None = None,
                dropout_rng: np.random.Generator | None = None) -> ModelOutput:
        if params is None:
            params = {k: Tensor(v) for k, v in self.params.items()}
        return forward(self.config, params, batch, self.basis.mean_gap, dropout_rng)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, h, e, v, nb = cfg.embed_dim, cfg.hidden_dim, cfg.n_event_types, cfg.n_intervention_types, cfg.basis_count_B
    inner = cfg.attention_heads * cfg.head_dim
    shapes: dict[str, tuple[int, ...]] = {
        "embed": (e, d), "start": (d,), "proj_v": (max(v, 1), d), "gate": (1,),
        "in_w": (d, h), "in_b": (h,),
    }
    for layer in range(cfg.encoder_layers):
        p = f"enc{layer}."
        shapes.update({
            p + "wq": (h, inner), p + "wk": (h, inner), p + "wv": (h, inner),
            p + "wo": (inner, h), p + "bo": (h,),
            p + "ln1_g": (h,), p + "ln1_b": (h,),
            p + "ff_w1": (h, cfg.ffn_dim), p + "ff_b1": (cfg.ffn_dim,),
            p + "ff_w2": (cfg.ffn_dim, h), p + "ff_b2": (h,),
            p + "ln2_g": (h,), p + "ln2_b": (h,),
        })
    shapes.update({
        "cnn_w": (cfg.cnn_kernel, h, nb), "cnn_b": (nb,),
        "head_w": (h + nb, e * nb), "head_b": (e * nb,),
        "cls_w": (h + nb, e), "cls_b": (e,),
    })
    return shapes


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.split(".")[-1]
        if leaf.startswith("ln") and leaf.endswith("_g"):
            out[name] = np.ones(shape)
        elif name in ("embed", "start", "proj_v"):
            out[name] = rng.normal(0.0, 1.0 / math.sqrt(cfg.embed_dim), size=shape)
        elif len(shape) == 1:
            out[name] = np.zeros(shape)
        elif name == "cnn_w":
            out[name] = _xavier(rng, shape[0] * shape[1], shape[2], shape)
        else:
            out[name] = _xavier(rng, shape[0], shape[1])
    return out


def _dropout(x: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    if rng is None or p <= 0:
        return x
    keep = rng.random(x.shape) >= p
    return x * (keep / (1.0 - p))


def _attention(cfg: ModelConfig, p: dict[str, Tensor], prefix: str, x: Tensor,
               allowed: np.ndarray) -> Tensor:
    b, n, _ = x.shape
    nh, dk = cfg.attention_heads, cfg.head_dim

    def heads(t: Tensor) -> Tensor:
        return ad.transpose(ad.reshape(t, (b, n, nh, dk)), (0, 2, 1, 3))

    q = heads(x @ p[prefix + "wq"])
    k = heads(x @ p[prefix + "wk"])
    v = heads(x @ p[prefix + "wv"])
    scores = ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(dk))
    scores = ad.where(allowed[:, None], scores, MASK_FILL)
    ctx = ad.matmul(ad.softmax(scores, axis=-1), v)
    ctx = ad.reshape(ad.transpose(ctx, (0, 2, 1, 3)), (b, n, nh * dk))
    return ctx @ p[prefix + "wo"] + p[prefix + "bo"]


def forward(cfg: ModelConfig, p: dict[str, Tensor], batch: Batch, mean_gap: float,
            dropout_rng: np.random.Generator | None = None) -> ModelOutput:
    b, n = batch.dt.shape
    if batch.vbin.shape[-1] != cfg.n_intervention_types:
        raise ConfigError(f"batch has {batch.vbin.shape[-1]} intervention bits, "
                          f"model expects {cfg.n_intervention_types}")
    if batch.types.size and batch.types.max() >= cfg.n_event_types:
        raise ConfigError("batch contains event types outside the model")
    e_dim, nb = cfg.n_event_types, cfg.basis_count_B

    # position 0 is the start token; event i (column i-1 of types) sits at position i
    emb = ad.getitem(p["embed"], batch.types)                          # (b, n-1, d)
    start = ad.reshape(p["start"], (1, 1, cfg.embed_dim)) * np.ones((b, 1, 1))
    events = ad.concat([start, emb], axis=1)                           # (b, n, d)
    gate = ad.sigmoid(p["gate"])
    if cfg.n_intervention_types:
        proj = ad.matmul(batch.vbin, p["proj_v"])
        is_event = np.ones((1, n, 1))
        is_event[:, 0] = 0.0
        mixed = gate * events + (1.0 - gate) * proj * is_event
        # the start token is not an event, keep it unmixed
        mixed = ad.where(np.broadcast_to(is_event > 0, mixed.shape), mixed, events)
    else:
        mixed = ad.where(np.broadcast_to(np.arange(n)[None, :, None] > 0, events.shape),
                         gate * events, events)
    x = mixed + sinusoid(batch.dt / mean_gap, cfg.embed_dim)
    x = _dropout(x, cfg.dropout, dropout_rng)
    h = x @ p["in_w"] + p["in_b"]

    causal = np.tril(np.ones((n, n), dtype=bool))
    allowed = causal[None] & batch.pos_valid[:, None, :]
    for layer in range(cfg.encoder_layers):
        pre = f"enc{layer}."
        a = _attention(cfg, p, pre, h, allowed)
        h = ad.layer_norm(h + _dropout(a, cfg.dropout, dropout_rng), p[pre + "ln1_g"], p[pre + "ln1_b"], LN_EPS)
        f = ad.relu(h @ p[pre + "ff_w1"] + p[pre + "ff_b1"]) @ p[pre + "ff_w2"] + p[pre + "ff_b2"]
        h = ad.layer_norm(h + _dropout(f, cfg.dropout, dropout_rng), p[pre + "ln2_g"], p[pre + "ln2_b"], LN_EPS)

    k = cfg.cnn_kernel
    if cfg.causal_cnn:
        padded = ad.pad_time(h, k - 1, 0)
    else:
        padded = ad.pad_time(h * batch.pos_valid[:, :, None], cfg.cnn_padding, cfg.cnn_padding)
    conv = None
    for j in range(k):
        term = ad.getitem(padded, (slice(None), slice(j, j + n))) @ p["cnn_w"][j]
        conv = term if conv is None else conv + term
    conv = ad.relu(conv + p["cnn_b"])

    z = ad.concat([h, conv], axis=-1)
    logw = ad.reshape(z @ p["head_w"] + p["head_b"], (b, n, e_dim, nb))
    logits = z @ p["cls_w"] + p["cls_b"]
    return ModelOutput(logw, logits)


def intensity_at(log_weights: np.ndarray, basis: BasisSet, tau) -> np.ndarray:
    """lambda_e(t_i + tau) for every type from one position's ``(E, B)`` log weights."""
    if np.any(np.asarray(tau) <= 0):
        raise ValueError("intensity is defined only after the governing event (tau > 0)")
    kap = basis.values(tau)                                          # (..., B)
    return np.einsum("...b,eb->...e", kap, np.exp(log_weights))
