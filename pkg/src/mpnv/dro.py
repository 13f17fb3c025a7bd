"""Distributionally robust solvers over finite parametric ambiguity sets.

`cs_solve` is the cutting-surface loop: solve the minimax over a small
working subset, find the worst case of the solution over the extreme
subset, add it, repeat. The working-subset minimax is solved exactly for
Poisson demand (branch-and-bound over cumulative integer order levels) and
by projected subgradient descent for normal demand (the cost is convex in
q). `full_minimax` runs the same machinery over the whole set and serves
as the reference the cutting-surface results are gauged against.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import specialfns as sf
from .ambiguity import AmbiguitySet, extreme_set
from .cost import cost_raw, normal_cost_batch
from .errors import ParameterError, ResourceLimitError
from .reports import GapMetrics, SolveReport
from .types import NORMAL, POISSON, DemandModel, Instance, OrderPlan


@dataclass(frozen=True)
class SubgradientConfig:
    """Projected-subgradient controls for the normal-demand minimax.

    Steps follow a/sqrt(k) (a = W / sum(w)) until `anneal_after`, then decay
    geometrically so that the step multiplier reaches `anneal_floor` at
    `max_steps`; without the decay the 1e-9/200-step stall exit fires while
    the iterate is still bouncing at coarse steps.
    """

    max_steps: int = 20000
    stall_steps: int = 200
    stall_tol: float = 1e-9
    explore_steps: int = 500
    polyak: bool = False


@dataclass(frozen=True)
class CsConfig:
    """Cutting-surface controls; `initial_member` indexes the ambiguity set."""

    eps: float = 1e-6
    k_max: int = 10
    initial_member: int | None = None
    subgrad: SubgradientConfig = field(default_factory=SubgradientConfig)
    timeout_s: float | None = None


def project_budget(q, w, W: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, w.x <= W} (w > 0, W >= 0).

    The projection is x(theta) = max(q - theta*w, 0) with the smallest
    theta >= 0 making the budget hold; theta solves a piecewise-linear
    equation walked over its breakpoints.
    """
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    x0 = np.maximum(q, 0.0)
    if float(np.dot(w, x0)) <= W:
        return x0
    bps = sorted(set(float(v) for v in q / w if v > 0))
    lo = 0.0
    for bp in bps + [math.inf]:
        # classify the segment's active set at its midpoint: at a breakpoint
        # itself the q - lo*w comparison is one ulp from flipping
        mid = lo + 1.0 if math.isinf(bp) else 0.5 * (lo + bp)
        active = q - mid * w > 0
        denom = float(np.dot(w[active], w[active]))
        if denom == 0.0:
            break
        theta = (float(np.dot(w[active], q[active])) - W) / denom
        if lo <= theta <= bp:
            return np.maximum(q - theta * w, 0.0)
        lo = bp
    return np.zeros_like(q)  # W = 0 and all q clipped away


class _NormalBatch:
    """Vectorized normal cost over a fixed member matrix, varying plan."""

    def __init__(self, instance: Instance, members: np.ndarray):
        T = instance.T
        self.instance = instance
        self.mu = members[:, :T]
        self.sigma = members[:, T:]
        self.mu_cum = np.cumsum(self.mu, axis=1)
        self.s = np.sqrt(np.cumsum(self.sigma**2, axis=1))
        self.a = instance.a
        self.p_mu_sum = instance.p * self.mu.sum(axis=1)

    def costs(self, q: np.ndarray) -> np.ndarray:
        inst = self.instance
        m = self.mu_cum - np.cumsum(q)[None, :]
        beta = m / self.s
        terms = (self.a[None, :] * sf.std_normal_cdf(beta) - inst.h) * m \
            + self.a[None, :] * sf.std_normal_pdf(beta) * self.s
        return terms.sum(axis=1) + float(np.dot(inst.w, q)) - self.p_mu_sum

    def grad_member(self, q: np.ndarray, i: int) -> np.ndarray:
        inst = self.instance
        beta = (self.mu_cum[i] - np.cumsum(q)) / self.s[i]
        inner = self.a * sf.std_normal_cdf(-beta) - inst.b
        return np.cumsum(inner[::-1])[::-1] + inst.w - inst.p


def _member_costs(instance: Instance, amb_family: str, members: np.ndarray,
                  q: np.ndarray, batch: _NormalBatch | None = None) -> np.ndarray:
    if amb_family == NORMAL:
        if batch is None:
            batch = _NormalBatch(instance, members)
        return batch.costs(q)
    return np.array([cost_raw(instance, DemandModel(kind=POISSON, lam=row), q)
                     for row in members])


def worst_case(instance: Instance, amb: AmbiguitySet, plan) -> dict:
    """Exhaustive worst case over the members; ties break to canonical order."""
    q = np.asarray(plan.q if isinstance(plan, OrderPlan) else plan, dtype=float)
    costs = _member_costs(instance, amb.family, amb.members, q)
    i = int(np.argmax(costs))
    return {"param": amb.members[i], "cost": float(costs[i]), "index": i}


def _min_norm_combination(G: np.ndarray) -> np.ndarray:
    """Shortest vector in the convex hull of the rows (Frank-Wolfe on the simplex)."""
    v = G.mean(axis=0)
    for _ in range(200):
        i = int(np.argmin(G @ v))
        diff = v - G[i]
        denom = float(diff @ diff)
        if denom <= 1e-30:
            break
        gamma = min(max(float(v @ diff) / denom, 0.0), 1.0)
        if gamma <= 1e-14:
            break
        v = v - gamma * diff
    return v


def _subgradient_minimax(instance: Instance, batch: _NormalBatch,
                         cfg: SubgradientConfig, q0=None,
                         deadline: float | None = None) -> tuple[np.ndarray, float, bool]:
    """Projected subgradient with a steepest-descent polish.

    Phase 1 is the diminishing a/sqrt(k) rule (a = W / sum(w)). Phase 2
    restarts from the incumbent and takes Armijo-controlled steps along the
    min-norm subgradient of the active members, which is the steepest
    descent direction of a max-of-smooth function and does not stall at the
    kinks where single-member subgradients stop making progress.
    """
    w, W = instance.w, instance.W
    scale = W / float(np.sum(w))  # step scale a of the a/sqrt(k) rule
    q = project_budget(np.mean(batch.mu, axis=0) if q0 is None else np.asarray(q0, float),
                       w, W)
    costs = batch.costs(q)
    best_q, best_val = q.copy(), float(costs.max())
    last_improved = 0
    timed_out = False
    evals = 0

    for k in range(1, min(cfg.explore_steps, cfg.max_steps) + 1):
        i = int(np.argmax(costs))
        g = batch.grad_member(q, i)
        norm = float(np.linalg.norm(g))
        if norm == 0.0:
            break
        if cfg.polyak:
            alpha = (float(costs[i]) - best_val + scale / math.sqrt(k)) / norm
        else:
            alpha = scale / math.sqrt(k)
        q = project_budget(q - alpha * g / norm, w, W)
        costs = batch.costs(q)
        evals += 1
        val = float(costs.max())
        if val < best_val:
            if val < best_val - cfg.stall_tol:
                last_improved = k
            best_q, best_val = q.copy(), val
        if k - last_improved >= cfg.stall_steps:
            break
        if deadline is not None and k % 256 == 0 and time.perf_counter() > deadline:
            return best_q, best_val, True

    q = best_q.copy()
    f_cur = best_val
    alpha = scale
    alpha_min = 1e-13 * max(scale, 1.0)
    while evals < cfg.max_steps:
        if deadline is not None and evals % 64 == 0 and time.perf_counter() > deadline:
            timed_out = True
            break
        costs = batch.costs(q)
        f_cur = float(costs.max())
        act_tol = 1e-7 * max(1.0, abs(f_cur))
        active = np.where(costs >= f_cur - act_tol)[0]
        if len(active) > 8:
            active = active[np.argsort(costs[active])[-8:]]
        G = np.stack([batch.grad_member(q, int(i)) for i in active])
        d = _min_norm_combination(G)
        norm = float(np.linalg.norm(d))
        if norm <= 1e-12 * max(1.0, scale):
            break
        improved = False
        while alpha >= alpha_min:
            q_try = project_budget(q - alpha * d / norm, w, W)
            f_try = float(batch.costs(q_try).max())
            evals += 1
            if f_try < f_cur - 1e-14 * max(1.0, abs(f_cur)):
                q, f_cur = q_try, f_try
                alpha = min(alpha * 1.5, 10.0 * scale)
                improved = True
                break
            alpha *= 0.5
        if f_cur < best_val:
            if f_cur < best_val - cfg.stall_tol:
                last_improved = evals
            best_q, best_val = q.copy(), f_cur
        if not improved or evals - last_improved >= cfg.stall_steps:
            break
    return best_q, best_val, timed_out


class _PoissonTables:
    """Per-member, per-period cost tables G[i, t, Q] over cumulative levels.

    G folds every Q-dependent and member-dependent term, so a plan's cost is
    sum_t w_t q_t + G-sum and the branch-and-bound lower bound for a prefix is
    spend_prefix + max_i(partial_i + sum_{k>t} min_Q G[i, k, Q]); the unspent
    wholesale is non-negative and the max is monotone, so the bound is valid.
    """

    def __init__(self, instance: Instance, members: np.ndarray):
        T = instance.T
        self.instance = instance
        self.members = members
        self.qcap = np.array([int(math.floor(instance.W / instance.w[t] + 1e-9))
                              for t in range(T)])
        n = members.shape[0]
        cells = int(n * np.sum(self.qcap + 1))
        if cells > 10_000_000:
            raise ResourceLimitError(
                f"Poisson reference tables need {cells} cells; reduce W or the set")
        a = instance.a
        bp = a - instance.h
        Lam = np.cumsum(members, axis=1)
        self.G = []
        for t in range(T):
            cap = self.qcap[t]
            Q = np.arange(cap + 1, dtype=float)
            g_t = np.empty((n, cap + 1))
            for i in range(n):
                cdf = sf.poisson_cdf_table(cap, Lam[i, t])
                cdf_m1 = np.concatenate([[0.0], cdf[:-1]])
                g_t[i] = a[t] * Q * cdf - Lam[i, t] * a[t] * cdf_m1 \
                    + bp[t] * (Lam[i, t] - Q) - instance.p * members[i, t]
            self.G.append(g_t)
        self.suffix_min = np.zeros((n, T + 1))
        for t in range(T - 1, -1, -1):
            self.suffix_min[:, t] = self.G[t].min(axis=1) + self.suffix_min[:, t + 1]


def _poisson_branch_and_bound(instance: Instance, tables: _PoissonTables,
                              deadline: float | None = None):
    """Exact minimax over integer plans; DFS in ascending cumulative order."""
    T = instance.T
    w, W = instance.w, instance.W
    best = {"val": math.inf, "Q": None, "timed_out": False}
    nodes = [0]

    def rec(t: int, q_prev: int, spent: float, partial: np.ndarray):
        nodes[0] += 1
        if deadline is not None and nodes[0] % 4096 == 0 \
                and time.perf_counter() > deadline:
            best["timed_out"] = True
        if best["timed_out"]:
            return
        max_dq = int(math.floor((W - spent) / w[t] + 1e-9))
        cap = tables.qcap[t]
        for dq in range(0, max_dq + 1):
            Q = q_prev + dq
            if Q > cap:
                break
            new_partial = partial + tables.G[t][:, Q]
            new_spent = spent + w[t] * dq
            bound = new_spent + float((new_partial + tables.suffix_min[:, t + 1]).max())
            if bound >= best["val"] + 1e-8 + 1e-12 * abs(best["val"]):
                continue
            if t == T - 1:
                val = new_spent + float(new_partial.max())
                if val < best["val"]:
                    best["val"] = val
                    best["Q"] = best_path + [Q]
            else:
                best_path.append(Q)
                rec(t + 1, Q, new_spent, new_partial)
                best_path.pop()

    best_path: list[int] = []
    rec(0, 0, 0.0, np.zeros(tables.members.shape[0]))
    if best["Q"] is None:
        raise ParameterError("no feasible integer plan (is W >= 0?)")
    Q = np.array(best["Q"], dtype=float)
    q = np.diff(np.concatenate([[0.0], Q]))
    return q, float(best["val"]), best["timed_out"]


def subset_minimax(instance: Instance, members, family: str,
                   config: SubgradientConfig | None = None,
                   deadline: float | None = None, q0=None) -> OrderPlan:
    """Plan minimizing the worst-case cost over a small member set."""
    plan, _, _ = _subset_minimax_impl(instance, np.atleast_2d(np.asarray(members, float)),
                                      family, config or SubgradientConfig(), deadline,
                                      q0=q0)
    return plan


def _subset_minimax_impl(instance, members, family, sub_cfg, deadline, q0=None):
    if family == NORMAL:
        batch = _NormalBatch(instance, members)
        q, val, timed_out = _subgradient_minimax(instance, batch, sub_cfg,
                                                 q0=q0, deadline=deadline)
        return OrderPlan(q=np.maximum(q, 0.0)), val, timed_out
    q, val, timed_out = _poisson_branch_and_bound(
        instance, _PoissonTables(instance, members), deadline)
    return OrderPlan(q=q), val, timed_out


def cs_solve(instance: Instance, amb: AmbiguitySet,
             config: CsConfig | None = None) -> SolveReport:
    """Cutting-surface loop over the extreme subset of the ambiguity set."""
    cfg = config or CsConfig()
    t0 = time.perf_counter()
    deadline = None if cfg.timeout_s is None else t0 + cfg.timeout_s
    ext = extreme_set(amb)

    if cfg.initial_member is not None:
        start = int(cfg.initial_member)
    elif amb.mle_params is not None and amb.index_of(amb.mle_params) is not None:
        start = amb.index_of(amb.mle_params)
    else:
        start = 0
    working = [start]
    trace = []
    flags = {"timed_out": False, "k_max_exhausted": False,
             "worst_case_from_extreme_only": False}
    selected = None
    plan = None

    k = 1
    while k <= cfg.k_max:
        it_start = time.perf_counter()
        plan, _, timed_out = _subset_minimax_impl(
            instance, amb.members[working], amb.family, cfg.subgrad, deadline,
            q0=None if plan is None else plan.q)
        flags["timed_out"] |= timed_out
        subset_costs = _member_costs(instance, amb.family, amb.members[working], plan.q)
        theta_k = float(subset_costs.max())
        ext_hit = worst_case(instance, ext, plan)
        C_k = ext_hit["cost"]
        trace.append({"k": k, "subset_size": len(working), "theta_k": theta_k,
                      "C_k": C_k, "wall_ms": 1e3 * (time.perf_counter() - it_start)})
        selected = ext_hit["param"]
        new_index = amb.index_of(ext_hit["param"])
        if C_k <= theta_k + cfg.eps / 2.0 or new_index in working:
            break
        if flags["timed_out"]:
            break
        working.append(new_index)
        k += 1
    else:
        flags["k_max_exhausted"] = True

    full_hit = worst_case(instance, amb, plan)
    flags["worst_case_from_extreme_only"] = bool(
        not np.array_equal(full_hit["param"], selected))
    return SolveReport(plan=plan, worst_param=full_hit["param"],
                       objective=full_hit["cost"], iterations=trace,
                       timing=time.perf_counter() - t0, flags=flags,
                       selected_param=selected)


def full_minimax(instance: Instance, amb: AmbiguitySet,
                 config: CsConfig | None = None) -> SolveReport:
    """Reference solve of the minimax over the entire ambiguity set."""
    cfg = config or CsConfig()
    t0 = time.perf_counter()
    deadline = None if cfg.timeout_s is None else t0 + cfg.timeout_s
    if amb.family == NORMAL and len(amb) > 5000:
        raise ResourceLimitError(f"full normal minimax capped at 5000 members, got {len(amb)}")
    plan, val, timed_out = _subset_minimax_impl(
        instance, amb.members, amb.family, cfg.subgrad, deadline)
    hit = worst_case(instance, amb, plan)
    wall = time.perf_counter() - t0
    return SolveReport(plan=plan, worst_param=hit["param"], objective=hit["cost"],
                       iterations=[{"k": 1, "subset_size": len(amb),
                                    "theta_k": val, "C_k": hit["cost"],
                                    "wall_ms": 1e3 * wall}],
                       timing=wall,
                       flags={"timed_out": timed_out,
                              "worst_case_from_extreme_only": False},
                       selected_param=hit["param"])


def _pct(numer: float, denom: float) -> float | None:
    if denom == 0.0:
        return None
    return 100.0 * numer / denom


def gap_metrics(instance: Instance, amb: AmbiguitySet, cs_report: SolveReport,
                ref_report: SolveReport, true_model: DemandModel,
                mle_model: DemandModel) -> GapMetrics:
    """Percentage gaps of an assessed solve against a reference solve.

    omega-gap: shortfall of the assessed report's own worst-case pick
    against the full-set worst case at its plan. q-gap: worst-case cost of
    the reference plan vs the assessed plan (negative = assessed is worse).
    APE: relative error of the believed (MLE) cost of the assessed plan
    against its true cost. optimality gap: true-cost regret of the assessed
    plan against the reference plan.
    """
    q_cs = cs_report.plan.q
    q_ref = ref_report.plan.q
    max_cs = worst_case(instance, amb, q_cs)["cost"]
    max_ref = worst_case(instance, amb, q_ref)["cost"]
    selected = cs_report.selected_param if cs_report.selected_param is not None \
        else cs_report.worst_param
    c_selected = cost_raw(instance, DemandModel.from_params(amb.family, selected), q_cs)
    true_cs = cost_raw(instance, true_model, q_cs)
    true_ref = cost_raw(instance, true_model, q_ref)
    mle_cs = cost_raw(instance, mle_model, q_cs)
    omega = _pct(max_cs - c_selected, max_cs)
    qgap = _pct(max_ref - max_cs, max_ref)
    ape = _pct(abs(true_cs - mle_cs), abs(true_cs))
    opt = _pct(abs(true_ref - true_cs), abs(true_ref))
    return GapMetrics(omega_gap_pct=omega, q_gap_pct=qgap, ape_pct=ape,
                      optimality_gap_pct=opt)
