"""Central-difference audit of the analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..events import EventSequence, Taxonomy
from .losses import total_loss
from .model import Batch, BasisSet, IntensityNetwork, ModelConfig, TypeMap


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst_param: str
    worst_index: tuple
    n_coords: int
    per_param: dict[str, float]

    def to_dict(self) -> dict:
        return {"max_rel_error": self.max_rel_error, "worst_param": self.worst_param,
                "worst_index": list(self.worst_index), "n_coords": self.n_coords,
                "per_param": self.per_param}


def toy_network(seed: int = 0, causal_cnn: bool = True) -> tuple[IntensityNetwork, Batch]:
    """d = 16 network on two short sequences (at most 8 events each)."""
    rng = np.random.default_rng(seed)
    tax = Taxonomy.build(1, 2, 2)
    cfg = ModelConfig(3, 2, embed_dim=16, hidden_dim=16, encoder_layers=1, attention_heads=2,
                      head_dim=8, ffn_dim=16, dropout=0.0, basis_count_B=8, causal_cnn=causal_cnn)
    net = IntensityNetwork.create(cfg, BasisSet(0.5, 8), TypeMap.from_taxonomy(tax), 0.7, seed=seed)
    for k in ("head_w", "head_b", "gate", "start", "in_b", "cls_b", "cnn_b"):
        net.params[k] = rng.normal(0.0, 0.3, size=net.params[k].shape)
    seqs = []
    for k, n in enumerate((8, 5)):
        times = np.sort(rng.uniform(0.0, 4.0, size=n))
        types = rng.integers(0, 5, size=n)
        seqs.append(EventSequence(f"toy{k}", 4.0, times, types))
    return net, net.batch(seqs)


def grad_check(net: IntensityNetwork, batch: Batch, epsilon: float = 1e-5, alpha: float = 5.0,
               beta: float = 0.01) -> GradCheckResult:
    """Max over all coordinates of |g - g_cd| / max(|g|, |g_cd|, 1e-8)."""
    params = net.tensors()
    total_loss(net.forward(batch, params), batch, alpha, beta).total.backward()
    analytic = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in params.items()}

    def loss() -> float:
        return total_loss(net.forward(batch), batch, alpha, beta).total.item()

    worst, worst_name, worst_idx, count = 0.0, "", (), 0
    per_param: dict[str, float] = {}
    for name, arr in net.params.items():
        pmax = 0.0
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + epsilon
            up = loss()
            arr[idx] = orig - epsilon
            down = loss()
            arr[idx] = orig
            cd = (up - down) / (2.0 * epsilon)
            g = analytic[name][idx]
            rel = abs(g - cd) / max(abs(g), abs(cd), 1e-8)
            count += 1
            pmax = max(pmax, rel)
            if rel > worst:
                worst, worst_name, worst_idx = rel, name, idx
        per_param[name] = pmax
    return GradCheckResult(worst, worst_name, tuple(int(i) for i in worst_idx), count, per_param)
