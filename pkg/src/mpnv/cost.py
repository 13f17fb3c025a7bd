"""Closed-form expected cost and derivatives for normal and Poisson demand.

Normal (per-period terms, beta_t = (sum_{k<=t}(mu_k - q_k)) / s_t,
s_t = sqrt(sum_{k<=t} sigma_k^2), a_t = h + b + p*1{t=T}):

    C = sum_t [ (a_t Phi(beta_t) - h) * sum_{k<=t}(mu_k - q_k)
                + a_t phi(beta_t) s_t + w_t q_t - p mu_t ]

Poisson (F_t = CDF of Poisson(Lambda_t), Q_t = sum_{k<=t} q_k):

    C = sum_t [ a_t Q_t F_t(Q_t) - Lambda_t a_t F_t(Q_t - 1)
                + (b + p*1{t=T}) (Lambda_t - Q_t) + w_t q_t - p lambda_t ]

The internal *_raw evaluators accept arbitrary real (normal) or integer
(Poisson) order vectors, including negative entries: the fixed-distribution
solver prices tentative candidates that are later clipped or zeroed.
"""

from dataclasses import dataclass

import numpy as np

from . import specialfns as sf
from .errors import DimensionError, DomainError, ParameterError
from .types import NORMAL, POISSON, DemandModel, Instance, OrderPlan


@dataclass(frozen=True)
class NormalCostTerms:
    """Standardized margins beta_t and cumulative scales s_t of the normal objective."""

    beta: np.ndarray
    s: np.ndarray


@dataclass(frozen=True)
class PoissonCostTerms:
    """Cumulative rates and the two CDF evaluations entering the Poisson objective."""

    Lambda: np.ndarray
    cdf_at_Q: np.ndarray
    cdf_at_Qm1: np.ndarray


def _check(instance: Instance, model: DemandModel, kind: str, q: np.ndarray) -> None:
    if model.kind != kind:
        raise ParameterError(f"expected a {kind} model, got {model.kind}")
    if model.T != instance.T:
        raise DimensionError(f"model horizon {model.T} != instance horizon {instance.T}")
    if q.shape != (instance.T,):
        raise DimensionError(f"plan has shape {q.shape}, expected ({instance.T},)")


def normal_cost_terms(model: DemandModel, q) -> NormalCostTerms:
    q = np.asarray(q, dtype=float)
    s = np.sqrt(np.cumsum(model.sigma**2))
    beta = np.cumsum(model.mu - q) / s
    return NormalCostTerms(beta=beta, s=s)


def normal_cost_raw(instance: Instance, mu, sigma, q) -> float:
    """Normal expected cost at an arbitrary real order vector."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    q = np.asarray(q, dtype=float)
    a = instance.a
    m = np.cumsum(mu - q)
    s = np.sqrt(np.cumsum(sigma**2))
    beta = m / s
    terms = (a * sf.std_normal_cdf(beta) - instance.h) * m + a * sf.std_normal_pdf(beta) * s
    return float(terms.sum() + np.dot(instance.w, q) - instance.p * mu.sum())


def normal_cost_batch(instance: Instance, mu_mat: np.ndarray, sigma_mat: np.ndarray,
                      q: np.ndarray) -> np.ndarray:
    """Normal expected cost of one plan under many parameter rows at once."""
    a = instance.a
    m = np.cumsum(mu_mat - q[None, :], axis=1)
    s = np.sqrt(np.cumsum(sigma_mat**2, axis=1))
    beta = m / s
    terms = (a[None, :] * sf.std_normal_cdf(beta) - instance.h) * m \
        + a[None, :] * sf.std_normal_pdf(beta) * s
    return terms.sum(axis=1) + float(np.dot(instance.w, q)) \
        - instance.p * mu_mat.sum(axis=1)


def normal_cost(instance: Instance, model: DemandModel, plan: OrderPlan) -> float:
    """Expected cost under independent normal demand."""
    q = np.asarray(plan.q, dtype=float)
    _check(instance, model, NORMAL, q)
    return normal_cost_raw(instance, model.mu, model.sigma, q)


def normal_cost_grad_q(instance: Instance, model: DemandModel, plan_or_q) -> np.ndarray:
    """dC/dq_j = sum_{t>=j} [a_t F_t(Q_t) - b] + w_j - p, F_t the CDF of sum_{k<=t} X_k."""
    q = np.asarray(plan_or_q.q if isinstance(plan_or_q, OrderPlan) else plan_or_q, dtype=float)
    _check(instance, model, NORMAL, q)
    terms = normal_cost_terms(model, q)
    inner = instance.a * sf.std_normal_cdf(-terms.beta) - instance.b
    return np.cumsum(inner[::-1])[::-1] + instance.w - instance.p


def normal_cost_grad_params(instance: Instance, model: DemandModel, plan_or_q) -> dict:
    """Parameter gradients dC/dmu_tau and dC/dsigma_tau of the normal cost."""
    q = np.asarray(plan_or_q.q if isinstance(plan_or_q, OrderPlan) else plan_or_q, dtype=float)
    _check(instance, model, NORMAL, q)
    terms = normal_cost_terms(model, q)
    a = instance.a
    cdf = sf.std_normal_cdf(terms.beta)
    pdf = sf.std_normal_pdf(terms.beta)
    dmu = np.cumsum((a * cdf - instance.h)[::-1])[::-1] - instance.p
    dsigma = model.sigma * np.cumsum((a * pdf / terms.s)[::-1])[::-1]
    return {"dmu": dmu, "dsigma": dsigma}


def poisson_cost_terms(model: DemandModel, q) -> PoissonCostTerms:
    q = np.asarray(q, dtype=float)
    Lam = model.Lambda
    Q = np.cumsum(q)
    cdf_q = np.array([sf.poisson_cdf(Qt, L) for Qt, L in zip(Q, Lam)])
    cdf_qm1 = np.array([sf.poisson_cdf(Qt - 1, L) for Qt, L in zip(Q, Lam)])
    return PoissonCostTerms(Lambda=Lam, cdf_at_Q=cdf_q, cdf_at_Qm1=cdf_qm1)


def poisson_cost_raw(instance: Instance, lam, q) -> float:
    """Poisson expected cost at an arbitrary integer order vector."""
    lam = np.asarray(lam, dtype=float)
    q = np.asarray(q, dtype=float)
    a = instance.a
    bp = a - instance.h  # b + p*1{t=T}
    Lam = np.cumsum(lam)
    Q = np.cumsum(q)
    cdf_q = np.array([sf.poisson_cdf(Qt, L) for Qt, L in zip(Q, Lam)])
    cdf_qm1 = np.array([sf.poisson_cdf(Qt - 1, L) for Qt, L in zip(Q, Lam)])
    terms = a * Q * cdf_q - Lam * a * cdf_qm1 + bp * (Lam - Q)
    return float(terms.sum() + np.dot(instance.w, q) - instance.p * lam.sum())


def poisson_cost(instance: Instance, model: DemandModel, plan: OrderPlan) -> float:
    """Expected cost under independent Poisson demand; requires an integer plan."""
    q = np.asarray(plan.q, dtype=float)
    _check(instance, model, POISSON, q)
    if np.any(q != np.floor(q)):
        raise DomainError("Poisson cost requires integer order quantities")
    return poisson_cost_raw(instance, model.lam, q)


def poisson_cost_grad_lambda(instance: Instance, model: DemandModel, plan_or_q) -> np.ndarray:
    """dC/dlambda_k = sum_{t>=k} [-a_t F_t(Q_t - 1) + a_t - h] - p (smooth in lambda)."""
    q = np.asarray(plan_or_q.q if isinstance(plan_or_q, OrderPlan) else plan_or_q, dtype=float)
    _check(instance, model, POISSON, q)
    if np.any(q != np.floor(q)):
        raise DomainError("Poisson cost requires integer order quantities")
    terms = poisson_cost_terms(model, q)
    a = instance.a
    inner = -a * terms.cdf_at_Qm1 + (a - instance.h)
    return np.cumsum(inner[::-1])[::-1] - instance.p


def cost(instance: Instance, model: DemandModel, plan: OrderPlan) -> float:
    """Family dispatch for the closed-form expected cost."""
    if model.kind == NORMAL:
        return normal_cost(instance, model, plan)
    return poisson_cost(instance, model, plan)


def cost_raw(instance: Instance, model: DemandModel, q) -> float:
    """Family dispatch for the raw evaluator (negative entries allowed)."""
    if model.kind == NORMAL:
        return normal_cost_raw(instance, model.mu, model.sigma, q)
    return poisson_cost_raw(instance, model.lam, q)
