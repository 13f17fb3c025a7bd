"""Likelihood-based ambiguity sets: MLE, chi-square filtering, extreme subsets.

The confidence region is { theta : chi2_statistic(theta) <= chi2_{df,1-a} }
with df = 2T (normal: mu and sigma per period) or T (Poisson). Discrete
ambiguity sets lay an M-point grid over each univariate parameter interval,
take the Cartesian product, and keep the grid points inside the region.
"""

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguityConstructionError,
    DegenerateSampleError,
    DimensionError,
    ParameterError,
    ResourceLimitError,
)
from .specialfns import chi2_quantile
from .types import FAMILIES, NORMAL, POISSON, DemandModel, SampleSet

_POSITIVITY_FLOOR = 1e-6
_BOUNDARY_SLACK = 1e-12  # keeps grid points that sit exactly on the chi-square boundary
_MAX_GRID = 50_000_000

PROVENANCES = ("base_grid", "confidence_filtered", "dominated_pruned", "extreme")


@dataclass(frozen=True)
class MleEstimate:
    """Per-period maximum-likelihood estimates from an N-sample."""

    family: str
    params: np.ndarray  # (mu_1..mu_T, sigma_1..sigma_T) or (lambda_1..lambda_T)
    N: int

    @property
    def T(self) -> int:
        return len(self.params) // 2 if self.family == NORMAL else len(self.params)

    @property
    def mu_hat(self) -> np.ndarray:
        return self.params[: self.T]

    @property
    def sigma_hat(self) -> np.ndarray:
        if self.family != NORMAL:
            raise ParameterError("sigma_hat is defined for normal estimates only")
        return self.params[self.T:]

    @property
    def lambda_hat(self) -> np.ndarray:
        if self.family != POISSON:
            raise ParameterError("lambda_hat is defined for Poisson estimates only")
        return self.params

    def model(self) -> DemandModel:
        return DemandModel.from_params(self.family, self.params)


@dataclass(frozen=True)
class AmbiguitySet:
    """Finite parameter set in canonical (lexicographic) member order."""

    family: str
    T: int
    members: np.ndarray  # (n, dim)
    provenance: str
    alpha: float | None = None
    M: int | None = None
    mle_params: np.ndarray | None = field(default=None, compare=False)
    mle_injected: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}")
        if self.provenance not in PROVENANCES:
            raise ParameterError(f"unknown provenance {self.provenance!r}")
        members = np.atleast_2d(np.asarray(self.members, dtype=float))
        if members.shape[0] == 0:
            raise AmbiguityConstructionError("ambiguity set is empty")
        dim = 2 * self.T if self.family == NORMAL else self.T
        if members.shape[1] != dim:
            raise DimensionError(f"members have dim {members.shape[1]}, expected {dim}")
        members = members[np.lexsort(members[:, ::-1].T)]
        members.flags.writeable = False
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return self.members.shape[0]

    def member_model(self, i: int) -> DemandModel:
        return DemandModel.from_params(self.family, self.members[i])

    def index_of(self, theta, tol: float = 0.0) -> int | None:
        """Index of a parameter vector among the members, or None."""
        theta = np.asarray(theta, dtype=float)
        if tol == 0.0:
            hits = np.where((self.members == theta).all(axis=1))[0]
        else:
            hits = np.where(np.all(np.abs(self.members - theta) <= tol, axis=1))[0]
        return int(hits[0]) if len(hits) else None

    def replace(self, **kwargs) -> "AmbiguitySet":
        fields = {"family": self.family, "T": self.T, "members": self.members,
                  "provenance": self.provenance, "alpha": self.alpha, "M": self.M,
                  "mle_params": self.mle_params, "mle_injected": self.mle_injected}
        fields.update(kwargs)
        return AmbiguitySet(**fields)

    def to_jsonl(self, path) -> None:
        """One member per line; the first line is a header with the metadata."""
        with open(path, "w") as fh:
            header = {"header": True, "family": self.family, "T": self.T,
                      "provenance": self.provenance, "alpha": self.alpha, "M": self.M,
                      "mle_injected": self.mle_injected}
            if self.mle_params is not None:
                header["mle_params"] = [float(v) for v in self.mle_params]
            fh.write(json.dumps(header) + "\n")
            for row in self.members:
                if self.family == NORMAL:
                    doc = {"mu": list(map(float, row[: self.T])),
                           "sigma": list(map(float, row[self.T:]))}
                else:
                    doc = {"lambda": list(map(float, row))}
                fh.write(json.dumps(doc) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "AmbiguitySet":
        with open(path) as fh:
            header = json.loads(fh.readline())
            if not header.get("header"):
                raise ParameterError(f"{path}: missing ambiguity header line")
            rows = []
            for line in fh:
                if not line.strip():
                    continue
                doc = json.loads(line)
                if header["family"] == NORMAL:
                    rows.append(list(doc["mu"]) + list(doc["sigma"]))
                else:
                    rows.append(list(doc["lambda"]))
        mle = header.get("mle_params")
        return cls(family=header["family"], T=int(header["T"]), members=np.array(rows),
                   provenance=header["provenance"], alpha=header.get("alpha"),
                   M=header.get("M"), mle_params=None if mle is None else np.array(mle),
                   mle_injected=bool(header.get("mle_injected", False)))


def mle(samples: SampleSet, family: str) -> MleEstimate:
    """Per-period MLEs; the normal sigma uses the 1/N (not 1/(N-1)) estimator."""
    if family not in FAMILIES:
        raise ParameterError(f"unknown family {family!r}")
    draws = samples.draws
    N = samples.N
    means = draws.mean(axis=0)
    if family == POISSON:
        if np.any(means <= 0):
            raise DegenerateSampleError("a sample column is all zero; lambda_hat must be > 0")
        return MleEstimate(family=POISSON, params=means, N=N)
    if N < 2:
        raise DegenerateSampleError("normal MLE needs N >= 2 for a variance estimate")
    sigma = np.sqrt(np.mean((draws - means) ** 2, axis=0))
    if np.any(sigma <= 0):
        raise DegenerateSampleError("a sample column is constant; sigma_hat must be > 0")
    return MleEstimate(family=NORMAL, params=np.concatenate([means, sigma]), N=N)


def chi2_statistic(est: MleEstimate, theta) -> float:
    """Score of a candidate parameter vector against the MLE; zero at the MLE."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != est.params.shape:
        raise DimensionError(f"theta has shape {theta.shape}, expected {est.params.shape}")
    N = est.N
    if est.family == POISSON:
        lam_hat = est.lambda_hat
        return float(np.sum(N / lam_hat * (lam_hat - theta) ** 2))
    T = est.T
    mu_hat, sigma_hat = est.mu_hat, est.sigma_hat
    var = sigma_hat**2
    return float(np.sum(N / var * (mu_hat - theta[:T]) ** 2)
                 + np.sum(2 * N / var * (sigma_hat - theta[T:]) ** 2))


def _dof(est: MleEstimate) -> int:
    return 2 * est.T if est.family == NORMAL else est.T


def parameter_intervals(est: MleEstimate, alpha: float) -> list[tuple[float, float]]:
    """Univariate interval per parameter coordinate, positivity-floored where needed."""
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    crit = chi2_quantile(_dof(est), 1.0 - alpha)
    N = est.N
    out = []
    if est.family == POISSON:
        for lam in est.lambda_hat:
            half = np.sqrt(crit * lam / N)
            out.append((max(lam - half, _POSITIVITY_FLOOR), lam + half))
        return out
    for mu, sig in zip(est.mu_hat, est.sigma_hat):
        half = sig * np.sqrt(crit / N)
        out.append((mu - half, mu + half))
    for sig in est.sigma_hat:
        half = sig * np.sqrt(crit / (2.0 * N))
        out.append((max(sig - half, _POSITIVITY_FLOOR), sig + half))
    return out


def _grid_points(lo: float, hi: float, M: int) -> np.ndarray:
    return lo + np.arange(M) * ((hi - lo) / (M - 1))


def base_grid(est: MleEstimate, alpha: float, M: int) -> AmbiguitySet:
    """M-point-per-interval Cartesian grid over the parameter box."""
    if M < 2:
        raise ParameterError(f"M must be >= 2, got {M}")
    intervals = parameter_intervals(est, alpha)
    if M ** len(intervals) > _MAX_GRID:
        raise ResourceLimitError(
            f"base grid would hold {M ** len(intervals)} members; reduce M or T")
    axes = [_grid_points(lo, hi, M) for lo, hi in intervals]
    members = np.array(list(itertools.product(*axes)))
    return AmbiguitySet(family=est.family, T=est.T, members=members,
                        provenance="base_grid", alpha=alpha, M=M,
                        mle_params=est.params)


def build_confidence_set(est: MleEstimate, alpha: float, M: int) -> AmbiguitySet:
    """Grid points inside the chi-square region; injects the MLE when absent."""
    grid = base_grid(est, alpha, M)
    crit = chi2_quantile(_dof(est), 1.0 - alpha)
    keep = _statistic_rows(est, grid.members) <= crit + _BOUNDARY_SLACK * max(1.0, crit)
    members = grid.members[keep]
    injected = False
    if len(members) == 0 or not np.any((members == est.params).all(axis=1)):
        members = np.vstack([members, est.params]) if len(members) else est.params[None, :]
        injected = True
    return AmbiguitySet(family=est.family, T=est.T, members=members,
                        provenance="confidence_filtered", alpha=alpha, M=M,
                        mle_params=est.params, mle_injected=injected)


def _statistic_rows(est: MleEstimate, members: np.ndarray) -> np.ndarray:
    N = est.N
    if est.family == POISSON:
        lam_hat = est.lambda_hat
        return np.sum(N / lam_hat * (lam_hat - members) ** 2, axis=1)
    T = est.T
    var = est.sigma_hat**2
    return (np.sum(N / var * (est.mu_hat - members[:, :T]) ** 2, axis=1)
            + np.sum(2 * N / var * (est.sigma_hat - members[:, T:]) ** 2, axis=1))


def prune_dominated(amb: AmbiguitySet) -> AmbiguitySet:
    """Drop normal members whose sigma is componentwise dominated at equal mu.

    The cost function increases in every sigma_t, so such members can never
    attain the worst case; the maximum over the set is unchanged.
    """
    if amb.family != NORMAL:
        raise ParameterError("dominance pruning applies to normal sets only")
    T = amb.T
    groups: dict[bytes, list[int]] = {}
    for i, row in enumerate(amb.members):
        groups.setdefault(row[:T].tobytes(), []).append(i)
    keep = np.ones(len(amb), dtype=bool)
    for idx in groups.values():
        sigmas = amb.members[np.array(idx)][:, T:]
        for a, ia in enumerate(idx):
            for b_, ib in enumerate(idx):
                if a == b_ or not keep[ia]:
                    continue
                if np.all(sigmas[b_] >= sigmas[a]) and np.any(sigmas[b_] > sigmas[a]):
                    keep[ia] = False
                    break
    return amb.replace(members=amb.members[keep], provenance="dominated_pruned")


def extreme_set(amb: AmbiguitySet) -> AmbiguitySet:
    """Members that can attain the worst case by the convexity/monotonicity results.

    Poisson: some lambda_t at the set-wide min or max of coordinate t.
    Normal: among members with the largest total sigma for their mu, those
    with some mu_t at the min/max attained for their sigma.
    """
    members = amb.members
    if amb.family == POISSON:
        lo = members.min(axis=0)
        hi = members.max(axis=0)
        keep = np.any((members == lo) | (members == hi), axis=1)
        return amb.replace(members=members[keep], provenance="extreme")

    T = amb.T
    sigma_sum = members[:, T:].sum(axis=1)
    by_mu: dict[bytes, list[int]] = {}
    for i, row in enumerate(members):
        by_mu.setdefault(row[:T].tobytes(), []).append(i)
    stage1 = []
    for idx in by_mu.values():
        best = max(sigma_sum[i] for i in idx)
        stage1.extend(i for i in idx if sigma_sum[i] == best)
    stage1 = np.array(sorted(stage1))
    m1 = members[stage1]

    by_sigma: dict[bytes, list[int]] = {}
    for j, row in enumerate(m1):
        by_sigma.setdefault(row[T:].tobytes(), []).append(j)
    keep_rows = []
    for idx in by_sigma.values():
        mus = m1[np.array(idx)][:, :T]
        lo = mus.min(axis=0)
        hi = mus.max(axis=0)
        for j, row_mu in zip(idx, mus):
            if np.any((row_mu == lo) | (row_mu == hi)):
                keep_rows.append(j)
    return amb.replace(members=m1[np.array(sorted(keep_rows))], provenance="extreme")
