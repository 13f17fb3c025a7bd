"""Fixed-distribution heuristic for the budgeted multi-period newsvendor.

The solver walks the KKT stationary family indexed by the budget multiplier
nu: cumulative order levels are inverse-CDF evaluations of fractiles that
shrink as nu grows. A line search raises nu from zero until the plan either
meets the budget or turns negative; negative plans trigger the zero-day
elimination rule (zero the day whose removal has the lowest cost lower
bound) and the search restarts.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from . import specialfns as sf
from .cost import cost_raw
from .errors import InfeasibleInstanceError, MultiplierRangeError, ParameterError
from .reports import SolveReport
from .types import NORMAL, DemandModel, Instance, OrderPlan

_SATURATE = 1e15  # stands in for an infinite inverse-CDF target; forces clipping/zeroing


@dataclass(frozen=True)
class LineSearchConfig:
    """Step-control for the multiplier line search (tau-scaled shrinking steps)."""

    tau: float = 0.5
    delta0: float = 1.0
    delta_min: float = 1e-100
    eps_W: float | None = None  # None: use the instance's budget tolerance
    max_iters: int = 200_000

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise ParameterError(f"tau must lie in (0, 1), got {self.tau}")
        if self.delta_min > self.delta0:
            raise ParameterError("delta_min must not exceed delta0")


@dataclass(frozen=True)
class KktCandidate:
    """Stationary candidate at multiplier nu with the given days forced to zero."""

    nu: float
    zero_days: frozenset
    q: np.ndarray  # raw candidate; entries may be negative (caller decides)
    fractiles: np.ndarray
    clamped: bool = False


def nu_upper_bound(instance: Instance, zero_days=frozenset()) -> float:
    """Largest multiplier keeping every evaluated KKT fractile non-negative.

    min over {b/(w_t - w_{t+1}) - 1 : w_t > w_{t+1}} and {(b+p)/w_T - 1};
    equal consecutive prices contribute +inf. Days already forced to zero
    have no fractile to keep valid, so their bounds drop out.
    """
    bounds = []
    if instance.T - 1 not in zero_days:
        bounds.append((instance.b + instance.p) / instance.w[-1] - 1.0)
    for t in range(instance.T - 1):
        if t in zero_days:
            continue
        gap = instance.w[t] - instance.w[t + 1]
        if gap > 0:
            bounds.append(instance.b / gap - 1.0)
    return float(min(bounds)) if bounds else float("inf")


def kkt_fractiles(instance: Instance, nu: float) -> np.ndarray:
    """CDF levels of Theorem-style cumulative targets at multiplier nu."""
    T = instance.T
    out = np.empty(T)
    for t in range(T - 1):
        out[t] = (instance.b - (1.0 + nu) * (instance.w[t] - instance.w[t + 1])) \
            / (instance.h + instance.b)
    out[T - 1] = (instance.b - (1.0 + nu) * instance.w[T - 1] + instance.p) \
        / (instance.h + instance.b + instance.p)
    return out


def _cumulative_target(model: DemandModel, t: int, fractile: float) -> tuple[float, bool]:
    """Inverse-CDF target for cumulative orders through period t.

    Fractiles at or beyond {0, 1} saturate instead of raising: the resulting
    candidate is clipped or zeroed downstream, never returned as-is.
    """
    if model.kind == NORMAL:
        if fractile <= 0.0:
            return -_SATURATE, True
        if fractile >= 1.0:
            return _SATURATE, True
        m = float(np.sum(model.mu[: t + 1]))
        s = float(np.sqrt(np.sum(model.sigma[: t + 1] ** 2)))
        return m + s * sf.std_normal_inv_cdf(fractile), False
    rate = float(np.sum(model.lam[: t + 1]))
    if fractile <= 0.0:
        return -1.0, True
    if fractile >= 1.0:
        return float(sf.poisson_inv_cdf(1.0 - 1e-12, rate)), True
    return float(sf.poisson_inv_cdf(fractile, rate)), False


def _kkt_eval(instance: Instance, model: DemandModel, nu: float,
              zero_days) -> tuple[np.ndarray, np.ndarray, bool]:
    """Raw adjusted candidate q~*(nu): zero on zero_days, targets elsewhere."""
    fr = kkt_fractiles(instance, nu)
    q = np.zeros(instance.T)
    cum = 0.0
    clamped = False
    for t in range(instance.T):
        if t in zero_days:
            continue
        target, cl = _cumulative_target(model, t, fr[t])
        clamped |= cl
        q[t] = target - cum
        cum = target
    return q, fr, clamped


def kkt_solution(instance: Instance, model: DemandModel, nu: float,
                 zero_days=frozenset()) -> KktCandidate:
    """Stationary KKT candidate; requires 0 <= nu <= nu_upper_bound."""
    if model.T != instance.T:
        raise ParameterError(f"model horizon {model.T} != instance horizon {instance.T}")
    ub = nu_upper_bound(instance)
    if nu < 0.0 or nu > ub:
        raise MultiplierRangeError(f"nu={nu} outside [0, {ub}]; a fractile leaves [0, 1]")
    zero_days = frozenset(int(t) for t in zero_days)
    q, fr, clamped = _kkt_eval(instance, model, nu, zero_days)
    return KktCandidate(nu=nu, zero_days=zero_days, q=q, fractiles=fr, clamped=clamped)


def _raw_spend(instance: Instance, q: np.ndarray) -> float:
    # exact fsum, matching Instance.spend: the line search bisects onto the
    # budget boundary, where summation-order ulps would flip feasibility
    return math.fsum(float(wt) * float(qt) for wt, qt in zip(instance.w, q))


def _line_search(instance, model, zero_days, nu_ub, cfg: LineSearchConfig,
                 eps: float):
    """Raise nu from 0 until the candidate goes negative or becomes feasible.

    Returns (outcome, nu, q, clamped) with outcome in {"negative",
    "feasible", "ub"}; "ub" means nu reached nu_upper_bound with neither
    event, which forces a zero-day choice (safeguard).
    """
    W = instance.W

    def probe(nu):
        q, _, cl = _kkt_eval(instance, model, nu, zero_days)
        event = np.min(q) < 0.0 or _raw_spend(instance, q) <= W + eps
        return q, event, cl

    q, event, clamped = probe(0.0)
    if event:
        return ("negative" if np.min(q) < 0.0 else "feasible"), 0.0, q, clamped

    # march: grow the step (tau-shrunk to respect the bound) until an event
    nu, delta = 0.0, cfg.delta0
    hi = None
    for _ in range(cfg.max_iters):
        while nu + delta > nu_ub:
            shrunk = cfg.tau * delta
            if shrunk <= 0.0 or shrunk == delta or nu_ub - nu <= 1e-18 * max(1.0, abs(nu_ub)):
                return "ub", nu, q, clamped
            delta = shrunk
        q_trial, event, cl = probe(nu + delta)
        clamped |= cl
        if event:
            hi, q_hi = nu + delta, q_trial
            break
        nu, q = nu + delta, q_trial
        if delta > 1e280:
            return "ub", nu, q, clamped  # fractiles insensitive to nu
        delta *= 2.0
    if hi is None:
        return "ub", nu, q, clamped

    # bisect [nu, hi] down to the first-event onset at delta_min resolution
    while hi - nu > cfg.delta_min and hi - nu > 4e-16 * max(1.0, hi):
        mid = 0.5 * (nu + hi)
        if mid <= nu or mid >= hi:
            break
        q_mid, event, cl = probe(mid)
        clamped |= cl
        if event:
            hi, q_hi = mid, q_mid
        else:
            nu, q = mid, q_mid
    if np.min(q_hi) < 0.0:
        return "negative", hi, q_hi, clamped
    return "feasible", hi, q_hi, clamped


def _select_zero_day(instance, model, nu_star, zero_days) -> tuple[int, float]:
    """Day whose zeroing yields the lowest cost lower bound (ties: smallest index)."""
    best_day, best_lb = -1, np.inf
    for t in range(instance.T):
        if t in zero_days:
            continue
        q_cand, _, _ = _kkt_eval(instance, model, nu_star, zero_days | {t})
        lb = cost_raw(instance, model, q_cand)
        if lb < best_lb:
            best_day, best_lb = t, lb
    return best_day, best_lb


def fd_solve(instance: Instance, model: DemandModel,
             config: LineSearchConfig | None = None) -> SolveReport:
    """Fixed-distribution heuristic: KKT line search with zero-day elimination."""
    cfg = config or LineSearchConfig()
    eps = instance.eps_W if cfg.eps_W is None else cfg.eps_W
    if instance.W < 0:
        raise InfeasibleInstanceError("negative budget admits no plan")
    t0 = time.perf_counter()
    zero_days: frozenset = frozenset()
    trace = []
    flags = {"fractile_clamped": False, "forced_zero_day_at_nu_ub": False}

    for _ in range(instance.T + 1):
        q0, _, clamped = _kkt_eval(instance, model, 0.0, zero_days)
        flags["fractile_clamped"] |= clamped
        plan_q = np.maximum(q0, 0.0)
        spend = instance.spend(plan_q)
        if spend <= instance.W + eps:
            nu_star = 0.0
            trace.append({"nu": 0.0, "zero_days": sorted(zero_days),
                          "spend": spend, "event": "feasible_at_zero"})
            break

        # bounds belonging to already-zeroed days no longer constrain nu
        outcome, nu_star, q_at, clamped = _line_search(
            instance, model, zero_days, nu_upper_bound(instance, zero_days), cfg, eps)
        flags["fractile_clamped"] |= clamped
        if outcome == "feasible":
            plan_q = np.maximum(q_at, 0.0)
            trace.append({"nu": nu_star, "zero_days": sorted(zero_days),
                          "spend": instance.spend(plan_q), "event": "feasible"})
            break
        if outcome == "ub":
            flags["forced_zero_day_at_nu_ub"] = True
        day, lb = _select_zero_day(instance, model, nu_star, zero_days)
        zero_days = zero_days | {day}
        trace.append({"nu": nu_star, "zero_days": sorted(zero_days),
                      "spend": float("nan"), "event": f"zeroed_day_{day}",
                      "lower_bound": lb})
    else:
        raise InfeasibleInstanceError("all days zeroed with the budget still violated")

    plan = OrderPlan(q=plan_q)
    objective = cost_raw(instance, model, plan.q)
    return SolveReport(plan=plan, worst_param=model.params, objective=objective,
                       iterations=trace, timing=time.perf_counter() - t0,
                       flags={**flags, "nu": nu_star, "zero_days": sorted(zero_days)},
                       selected_param=model.params)
