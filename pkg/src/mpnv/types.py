"""Problem data model: instance, demand model, order plan, sample set.

All types are immutable after construction (frozen dataclasses with
read-only numpy buffers), so they are safe to share across workers.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError

NORMAL = "normal"
POISSON = "poisson"
FAMILIES = (NORMAL, POISSON)


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Instance:
    """Costs, budget and horizon of the budget-constrained multi-period newsvendor.

    `w` must be non-increasing (w_t >= w_{t+1}); `a(t) = h + b + p*1{t=T}`
    is the combined per-unit mismatch cost used by the closed-form objectives.
    """

    T: int
    p: float
    h: float
    b: float
    w: np.ndarray
    W: float
    eps_W: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen_array(self.w, "w"))
        if self.T < 1 or self.T != int(self.T):
            raise ParameterError(f"T must be a positive integer, got {self.T}")
        if len(self.w) != self.T:
            raise DimensionError(f"w has length {len(self.w)}, expected T={self.T}")
        if min(self.p, self.h, self.b, self.W) < 0:
            raise ParameterError("p, h, b and W must be non-negative")
        if np.any(self.w <= 0):
            raise ParameterError("all wholesale prices w_t must be positive")
        if np.any(np.diff(self.w) > 0):
            raise ParameterError("w must be non-increasing over periods")
        if self.eps_W < 0:
            raise ParameterError("eps_W must be non-negative")

    @property
    def a(self) -> np.ndarray:
        """Vector a_t = h + b + p*1{t=T}."""
        out = np.full(self.T, self.h + self.b)
        out[-1] += self.p
        return out

    def spend(self, q) -> float:
        """Exact budget spend sum_t w_t q_t."""
        q = np.asarray(q, dtype=float)
        if q.shape != (self.T,):
            raise DimensionError(f"plan has shape {q.shape}, expected ({self.T},)")
        return math.fsum(float(wt) * float(qt) for wt, qt in zip(self.w, q))

    def to_dict(self) -> dict:
        doc = {"T": self.T, "p": self.p, "h": self.h, "b": self.b,
               "w": [float(v) for v in self.w], "W": self.W}
        if self.eps_W != 1e-6:
            doc["eps_W"] = self.eps_W
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Instance":
        return cls(T=int(doc["T"]), p=float(doc["p"]), h=float(doc["h"]),
                   b=float(doc["b"]), w=doc["w"], W=float(doc["W"]),
                   eps_W=float(doc.get("eps_W", 1e-6)))


@dataclass(frozen=True)
class DemandModel:
    """Independent per-period demand: Normal(mu_t, sigma_t^2) or Poisson(lambda_t)."""

    kind: str
    mu: np.ndarray | None = None
    sigma: np.ndarray | None = None
    lam: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ParameterError(f"unknown demand family {self.kind!r}")
        if self.kind == NORMAL:
            if self.mu is None or self.sigma is None:
                raise ParameterError("normal model requires mu and sigma")
            object.__setattr__(self, "mu", _frozen_array(self.mu, "mu"))
            object.__setattr__(self, "sigma", _frozen_array(self.sigma, "sigma"))
            if len(self.mu) != len(self.sigma):
                raise DimensionError("mu and sigma must have equal length")
            if np.any(self.sigma <= 0):
                raise ParameterError("all sigma_t must be positive")
        else:
            if self.lam is None:
                raise ParameterError("poisson model requires lambda")
            object.__setattr__(self, "lam", _frozen_array(self.lam, "lambda"))
            if np.any(self.lam <= 0):
                raise ParameterError("all lambda_t must be positive")

    @property
    def T(self) -> int:
        return len(self.mu) if self.kind == NORMAL else len(self.lam)

    @property
    def Lambda(self) -> np.ndarray:
        """Cumulative Poisson rate Lambda_t = sum_{k<=t} lambda_k."""
        if self.kind != POISSON:
            raise ParameterError("Lambda is defined for Poisson models only")
        return np.cumsum(self.lam)

    @property
    def params(self) -> np.ndarray:
        """Flat parameter vector: (mu_1..mu_T, sigma_1..sigma_T) or (lambda_1..lambda_T)."""
        if self.kind == NORMAL:
            return np.concatenate([self.mu, self.sigma])
        return np.asarray(self.lam)

    @classmethod
    def from_params(cls, kind: str, theta) -> "DemandModel":
        theta = np.asarray(theta, dtype=float)
        if kind == NORMAL:
            if len(theta) % 2:
                raise DimensionError("normal parameter vector must have even length")
            T = len(theta) // 2
            return cls(kind=NORMAL, mu=theta[:T], sigma=theta[T:])
        return cls(kind=POISSON, lam=theta)

    def to_dict(self) -> dict:
        if self.kind == NORMAL:
            return {"kind": NORMAL, "mu": [float(v) for v in self.mu],
                    "sigma": [float(v) for v in self.sigma]}
        return {"kind": POISSON, "lambda": [float(v) for v in self.lam]}

    @classmethod
    def from_dict(cls, doc: dict) -> "DemandModel":
        kind = doc["kind"]
        if kind == NORMAL:
            return cls(kind=NORMAL, mu=doc["mu"], sigma=doc["sigma"])
        if kind == POISSON:
            return cls(kind=POISSON, lam=doc["lambda"])
        raise ParameterError(f"unknown demand family {kind!r}")


@dataclass(frozen=True)
class OrderPlan:
    """Non-negative order quantities q with cumulative levels Q_t = sum_{k<=t} q_k."""

    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _frozen_array(self.q, "q"))
        if np.any(self.q < 0):
            raise ParameterError("order quantities must be non-negative")

    @property
    def T(self) -> int:
        return len(self.q)

    @property
    def Q(self) -> np.ndarray:
        return np.cumsum(self.q)

    def spend(self, instance: Instance) -> float:
        return instance.spend(self.q)

    def is_integer(self) -> bool:
        return bool(np.all(self.q == np.floor(self.q)))


@dataclass(frozen=True)
class SampleSet:
    """N x T matrix of demand realisations with the seed that produced it."""

    draws: np.ndarray
    seed: int | None = None
    source_model: DemandModel | None = field(default=None, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.draws, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ParameterError(f"draws must be an N x T matrix with N >= 1, got {arr.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "draws", arr)
        if self.source_model is not None and self.source_model.kind == POISSON:
            if np.any(arr < 0) or np.any(arr != np.floor(arr)):
                raise ParameterError("Poisson draws must be non-negative integers")

    @property
    def N(self) -> int:
        return self.draws.shape[0]

    @property
    def T(self) -> int:
        return self.draws.shape[1]


def save_problem(path, instance: Instance, model: DemandModel | None = None) -> None:
    """Write the instance (optionally with its demand model) as a JSON document."""
    doc = instance.to_dict()
    if model is not None:
        doc["model"] = model.to_dict()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_problem(path) -> tuple[Instance, DemandModel | None]:
    """Read a JSON instance document; returns (instance, model-or-None)."""
    with open(path) as fh:
        doc = json.load(fh)
    model = DemandModel.from_dict(doc["model"]) if "model" in doc else None
    return Instance.from_dict(doc), model
