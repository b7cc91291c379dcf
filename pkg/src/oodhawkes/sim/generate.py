"""Random ground-truth generation and the hand-built example processes."""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from ..config import strict_from_dict
from ..errors import ConfigError
from ..events import Role, Taxonomy
from .params import ExpKernel, GroundTruth, HawkesSpec, InterventionKind, InterventionSpec

KINDS = (InterventionKind.BASELINE, InterventionKind.CAUSE, InterventionKind.COVARIATE)


@dataclass
class GenerationConfig:
    """Ranges for random DGP and intervention draws.

    Sizes default to the full scale: 20 cause/covariate types, 10 outcome
    types and a (10, 12, 8) Baseline/Cause/Covariate mix.
    """

    n_cause: int = 20
    n_outcome: int = 10
    kind_mix: tuple[int, int, int] = (10, 12, 8)
    mu_cause: tuple[float, float] = (0.2, 0.6)
    mu_outcome: tuple[float, float] = (0.2, 0.6)
    kernel_density: float = 0.15
    amplitude: tuple[float, float] = (0.2, 1.0)
    decay: tuple[float, float] = (1.0, 3.0)
    max_spectral_radius: float = 0.7
    occurrence_prob: tuple[float, float] = (0.1, 0.5)
    intervention_window: tuple[float, float] = (0.5, 1.5)
    cause_window: float = 1.0
    modify_factor: tuple[float, float] = (1.5, 4.0)
    zero_prob: float = 0.5
    confounder_amplitude: float = 0.0
    confounder_decay: float = 4.0

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationConfig":
        obj = strict_from_dict(cls, d, "generation")
        obj.kind_mix = tuple(int(x) for x in obj.kind_mix)
        for f in fields(cls):
            v = getattr(obj, f.name)
            if isinstance(v, list):
                setattr(obj, f.name, tuple(v))
        return obj

    @property
    def n_interventions(self) -> int:
        return int(sum(self.kind_mix))

    def taxonomy(self) -> Taxonomy:
        return Taxonomy.build(self.n_cause, self.n_outcome, self.n_interventions)


def random_hawkes(taxonomy: Taxonomy, cfg: GenerationConfig, rng: np.random.Generator) -> HawkesSpec:
    """Sparse exponential kernels from cause/covariate sources into non-intervention targets."""
    k = len(taxonomy)
    causes = taxonomy.ids(Role.CAUSE, Role.COVARIATE)
    outcomes = taxonomy.ids(Role.OUTCOME)
    mu = np.zeros(k)
    mu[causes] = rng.uniform(*cfg.mu_cause, size=len(causes))
    mu[outcomes] = rng.uniform(*cfg.mu_outcome, size=len(outcomes))
    amp = np.zeros((k, k))
    dec = np.ones((k, k))
    targets = causes + outcomes
    for tgt in targets:
        for src in causes:
            if rng.uniform() < cfg.kernel_density:
                amp[tgt, src] = rng.uniform(*cfg.amplitude)
                dec[tgt, src] = rng.uniform(*cfg.decay)
    spec = HawkesSpec(mu, amp, dec)
    rho = spec.spectral_radius
    if rho > cfg.max_spectral_radius:
        spec = HawkesSpec(mu, amp * (cfg.max_spectral_radius / rho), dec)
    return spec


def _edit_kernel(current: ExpKernel, cfg: GenerationConfig, rng: np.random.Generator) -> ExpKernel:
    if current.amplitude > 0:
        if rng.uniform() < cfg.zero_prob:
            return ExpKernel(0.0, current.decay)
        return ExpKernel(current.amplitude * rng.uniform(*cfg.modify_factor), current.decay)
    return ExpKernel(rng.uniform(*cfg.amplitude), rng.uniform(*cfg.decay))


def generate_interventions(taxonomy: Taxonomy, hawkes: HawkesSpec, kind_mix: Sequence[int],
                           rng: np.random.Generator,
                           cfg: GenerationConfig | None = None) -> list[InterventionSpec]:
    """Draw one :class:`InterventionSpec` per intervention type.

    Kinds are assigned in order: ``kind_mix[0]`` Baseline edits, then Cause,
    then Covariate edits, to the intervention type ids in ascending order.
    """
    cfg = cfg or GenerationConfig()
    n = int(sum(kind_mix))
    if n == 0:
        return []
    causes = taxonomy.ids(Role.CAUSE, Role.COVARIATE)
    outcomes = taxonomy.ids(Role.OUTCOME)
    if not causes or not outcomes:
        raise ConfigError("intervention generation needs at least one cause and one outcome type")
    inter_ids = taxonomy.ids(Role.INTERVENTION)
    if len(inter_ids) < n:
        raise ConfigError(f"kind_mix asks for {n} interventions but the taxonomy has {len(inter_ids)} "
                          "intervention types")
    if kind_mix[2] and len(causes) < 2:
        raise ConfigError("Covariate interventions need at least two cause/covariate types")
    kinds = [kind for kind, m in zip(KINDS, kind_mix) for _ in range(int(m))]
    specs = []
    for vid, kind in zip(inter_ids, kinds):
        c = int(rng.choice(causes))
        o = int(rng.choice(outcomes))
        p = float(rng.uniform(*cfg.occurrence_prob))
        wv = float(rng.uniform(*cfg.intervention_window))
        cov = None
        if kind is InterventionKind.BASELINE:
            mod = float(hawkes.baselines[o] * rng.uniform(*cfg.modify_factor))
        elif kind is InterventionKind.CAUSE:
            mod = _edit_kernel(hawkes.kernel(o, c), cfg, rng)
        else:
            cov = int(rng.choice([d for d in causes if d != c]))
            mod = _edit_kernel(hawkes.kernel(o, cov), cfg, rng)
        specs.append(InterventionSpec(vid, kind, c, o, p, wv, cfg.cause_window, mod, cov))
    return specs


def add_confounder(hawkes: HawkesSpec, cause: int, outcome: int, confounder: int,
                   amplitude: float, decay: float) -> HawkesSpec:
    """Copy of ``hawkes`` where ``confounder`` excites both ``cause`` and ``outcome``."""
    a = hawkes.amplitude.copy()
    b = hawkes.decay.copy()
    for tgt in (cause, outcome):
        a[tgt, confounder] = amplitude
        b[tgt, confounder] = decay
    return HawkesSpec(hawkes.baselines, a, b)


def random_truth(cfg: GenerationConfig, master_seed: int, horizon: float) -> GroundTruth:
    """Fresh DGP + interventions keyed off ``master_seed``.

    With ``confounder_amplitude > 0`` the first intervention's (cause, outcome)
    pair gets a shared parent among the other cause/covariate types.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(2**31 - 1,)))
    taxonomy = cfg.taxonomy()
    hawkes = random_hawkes(taxonomy, cfg, rng)
    specs = generate_interventions(taxonomy, hawkes, cfg.kind_mix, rng, cfg)
    meta: dict = {}
    if cfg.confounder_amplitude > 0 and specs:
        s0 = specs[0]
        others = [d for d in taxonomy.ids(Role.CAUSE, Role.COVARIATE) if d != s0.cause_id]
        if others:
            d = int(rng.choice(others))
            hawkes = add_confounder(hawkes, s0.cause_id, s0.outcome_id, d,
                                    cfg.confounder_amplitude, cfg.confounder_decay)
            if not hawkes.is_stationary():
                raise ConfigError("confounder makes the process non-stationary; lower its amplitude")
            meta["confounder"] = d
    return GroundTruth(taxonomy, hawkes, specs, int(master_seed), float(horizon), meta=meta)


# --- hand-built processes --------------------------------------------------

def example_truth(kind: str = "Baseline", master_seed: int = 0, horizon: float = 100.0,
                  rate: float = 0.5) -> GroundTruth:
    """Single cause (0), outcome (1) and intervention; covariate (2) for ``Covariate``.

    Windows 0.5 (cause) and 0.7 (intervention), mu_c = 2.5, mu_o = 1.5 and an
    all-zero kernel matrix; the edit raises mu_o to 5.5 (Baseline), sets the
    cause->outcome kernel to 5 exp(-t) (Cause) or the covariate->outcome
    kernel to 7 exp(-t) (Covariate).  The occurrence probability is not fixed
    by the example and defaults to 0.5 per unit time.
    """
    kind = InterventionKind(kind)
    if kind is InterventionKind.COVARIATE:
        tax = Taxonomy([Role.CAUSE, Role.OUTCOME, Role.COVARIATE, Role.INTERVENTION])
        mu = [2.5, 1.5, 1.5, 0.0]
    else:
        tax = Taxonomy([Role.CAUSE, Role.OUTCOME, Role.INTERVENTION])
        mu = [2.5, 1.5, 0.0]
    v = len(mu) - 1
    hawkes = HawkesSpec.poisson(mu)
    if kind is InterventionKind.BASELINE:
        spec = InterventionSpec(v, kind, 0, 1, rate, 0.7, 0.5, 5.5)
    elif kind is InterventionKind.CAUSE:
        spec = InterventionSpec(v, kind, 0, 1, rate, 0.7, 0.5, ExpKernel(5.0, 1.0))
    else:
        spec = InterventionSpec(v, kind, 0, 1, rate, 0.7, 0.5, ExpKernel(7.0, 1.0), covariate_id=2)
    return GroundTruth(tax, hawkes, [spec], master_seed, horizon, meta={"example": kind.value})
