"""Ground-truth generative parameters for the simulator."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import ConfigError
from ..events import Role, Taxonomy

TRIGGER_CLOCK = (
    "each intervention type fires attempts as a Poisson process with rate p_v per unit time; "
    "an attempt while the intervention window is already open is ignored; a successful attempt "
    "is recorded as an event of the intervention type and opens the window (s, s + w_v]"
)


@dataclass(frozen=True)
class ExpKernel:
    """``phi(tau) = amplitude * exp(-decay * tau)``."""

    amplitude: float
    decay: float

    def __post_init__(self) -> None:
        if self.amplitude < 0 or not self.decay > 0:
            raise ConfigError(f"invalid kernel a={self.amplitude}, b={self.decay}")

    @property
    def branching(self) -> float:
        return self.amplitude / self.decay

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.where(tau >= 0, self.amplitude * np.exp(-self.decay * np.maximum(tau, 0)), 0.0)

    def to_dict(self) -> dict:
        return {"a": self.amplitude, "b": self.decay}

    @classmethod
    def from_dict(cls, d: dict) -> "ExpKernel":
        return cls(float(d["a"]), float(d["b"]))


@dataclass(frozen=True)
class HawkesSpec:
    """Constant baselines plus exponential kernels ``amplitude[target, source]``."""

    baselines: np.ndarray
    amplitude: np.ndarray
    decay: np.ndarray

    def __post_init__(self) -> None:
        mu = np.asarray(self.baselines, dtype=float).reshape(-1)
        a = np.asarray(self.amplitude, dtype=float)
        b = np.asarray(self.decay, dtype=float)
        k = mu.size
        if a.shape != (k, k) or b.shape != (k, k):
            raise ConfigError(f"kernel matrices must be {k}x{k}")
        if np.any(mu < 0) or np.any(a < 0) or np.any(b <= 0):
            raise ConfigError("baselines and amplitudes must be >= 0, decays > 0")
        for arr in (mu, a, b):
            arr.setflags(write=False)
        object.__setattr__(self, "baselines", mu)
        object.__setattr__(self, "amplitude", a)
        object.__setattr__(self, "decay", b)

    @classmethod
    def poisson(cls, baselines) -> "HawkesSpec":
        mu = np.asarray(baselines, dtype=float)
        k = mu.size
        return cls(mu, np.zeros((k, k)), np.ones((k, k)))

    @property
    def n_types(self) -> int:
        return int(self.baselines.size)

    def kernel(self, target: int, source: int) -> ExpKernel:
        return ExpKernel(float(self.amplitude[target, source]), float(self.decay[target, source]))

    @property
    def branching_matrix(self) -> np.ndarray:
        return self.amplitude / self.decay

    @property
    def spectral_radius(self) -> float:
        if self.n_types == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.branching_matrix))))

    def is_stationary(self) -> bool:
        return self.spectral_radius < 1.0

    def stationary_rates(self) -> np.ndarray:
        """Mean event rate per type, ``(I - A/B)^{-1} mu``."""
        return np.linalg.solve(np.eye(self.n_types) - self.branching_matrix, self.baselines)

    def to_dict(self) -> dict:
        return {"mu": self.baselines.tolist(), "a": self.amplitude.tolist(), "b": self.decay.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "HawkesSpec":
        return cls(np.array(d["mu"], dtype=float), np.array(d["a"], dtype=float),
                   np.array(d["b"], dtype=float))


class InterventionKind(str, enum.Enum):
    BASELINE = "Baseline"
    CAUSE = "Cause"
    COVARIATE = "Covariate"


@dataclass(frozen=True)
class InterventionSpec:
    """One OOD intervention type and the CIF edit it triggers.

    While the intervention window and the cause window are both open, the
    outcome's baseline (``Baseline``) or the kernel from ``cause_id``
    (``Cause``) / ``covariate_id`` (``Covariate``) into ``outcome_id`` is
    replaced by ``modified``.
    """

    intervention_id: int
    kind: InterventionKind
    cause_id: int
    outcome_id: int
    rate: float
    window: float
    cause_window: float
    modified: float | ExpKernel
    covariate_id: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", InterventionKind(self.kind))
        if not 0 < self.rate < 1:
            raise ConfigError(f"intervention {self.intervention_id}: occurrence probability must be in (0, 1)")
        if not (self.window > 0 and self.cause_window > 0):
            raise ConfigError(f"intervention {self.intervention_id}: windows must be > 0")
        if self.kind is InterventionKind.BASELINE:
            if isinstance(self.modified, ExpKernel) or float(self.modified) < 0:
                raise ConfigError(f"intervention {self.intervention_id}: Baseline needs a rate >= 0")
        elif not isinstance(self.modified, ExpKernel):
            raise ConfigError(f"intervention {self.intervention_id}: {self.kind.value} needs a kernel")
        if self.kind is InterventionKind.COVARIATE and self.covariate_id is None:
            raise ConfigError(f"intervention {self.intervention_id}: Covariate needs covariate_id")

    @property
    def source_id(self) -> int | None:
        """Source type whose kernel is edited, or None for Baseline edits."""
        if self.kind is InterventionKind.CAUSE:
            return self.cause_id
        if self.kind is InterventionKind.COVARIATE:
            return self.covariate_id
        return None

    def check_roles(self, taxonomy: Taxonomy) -> None:
        taxonomy.check_role(self.intervention_id, Role.INTERVENTION)
        taxonomy.check_role(self.cause_id, Role.CAUSE, Role.COVARIATE)
        taxonomy.check_role(self.outcome_id, Role.OUTCOME)
        if self.covariate_id is not None:
            taxonomy.check_role(self.covariate_id, Role.CAUSE, Role.COVARIATE)
            if self.covariate_id == self.cause_id:
                raise ConfigError(f"intervention {self.intervention_id}: covariate must differ from cause")

    def to_dict(self) -> dict:
        mod: Any = self.modified.to_dict() if isinstance(self.modified, ExpKernel) else float(self.modified)
        return {
            "intervention_id": self.intervention_id, "kind": self.kind.value,
            "cause_id": self.cause_id, "outcome_id": self.outcome_id,
            "covariate_id": self.covariate_id, "p": self.rate, "w_v": self.window,
            "cause_window": self.cause_window, "modified": mod,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InterventionSpec":
        mod = d["modified"]
        mod = ExpKernel.from_dict(mod) if isinstance(mod, dict) else float(mod)
        cov = d.get("covariate_id")
        return cls(int(d["intervention_id"]), InterventionKind(d["kind"]), int(d["cause_id"]),
                   int(d["outcome_id"]), float(d["p"]), float(d["w_v"]), float(d["cause_window"]),
                   mod, None if cov is None else int(cov))


def ate_key(cause: int, outcome: int, intervention: int | None) -> str:
    return f"{cause},{outcome},{'-' if intervention is None else intervention}"


@dataclass
class GroundTruth:
    taxonomy: Taxonomy
    hawkes: HawkesSpec
    interventions: list[InterventionSpec]
    master_seed: int
    horizon: float
    true_ate: dict[str, dict[str, float]] | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.taxonomy) != self.hawkes.n_types:
            raise ConfigError("HawkesSpec size does not match the taxonomy")
        for spec in self.interventions:
            spec.check_roles(self.taxonomy)
        ids = [s.intervention_id for s in self.interventions]
        if len(set(ids)) != len(ids):
            raise ConfigError("each intervention type may carry only one InterventionSpec")
        inter = self.taxonomy.ids(Role.INTERVENTION)
        if np.any(self.hawkes.baselines[inter] != 0) or np.any(self.hawkes.amplitude[:, inter] != 0) \
                or np.any(self.hawkes.amplitude[inter, :] != 0):
            raise ConfigError("intervention types are driven only by the trigger clock; "
                              "their baselines and kernels must be zero")

    def intervention(self, intervention_id: int) -> InterventionSpec:
        for s in self.interventions:
            if s.intervention_id == intervention_id:
                return s
        raise KeyError(intervention_id)

    def to_dict(self) -> dict:
        return {
            "taxonomy": self.taxonomy.to_mapping(),
            "hawkes": self.hawkes.to_dict(),
            "interventions": [s.to_dict() for s in self.interventions],
            "master_seed": self.master_seed,
            "horizon": self.horizon,
            "trigger_clock": TRIGGER_CLOCK,
            "true_ate": self.true_ate,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(Taxonomy.from_mapping(d["taxonomy"]), HawkesSpec.from_dict(d["hawkes"]),
                   [InterventionSpec.from_dict(s) for s in d["interventions"]],
                   int(d["master_seed"]), float(d["horizon"]), d.get("true_ate"),
                   dict(d.get("meta") or {}))
