import itertools
import math

import numpy as np
import pytest

from conftest import random_instance
from mpnv.ambiguity import AmbiguitySet, build_confidence_set, extreme_set, mle
from mpnv.cost import cost_raw, poisson_cost
from mpnv.dro import (
    CsConfig,
    SubgradientConfig,
    cs_solve,
    full_minimax,
    gap_metrics,
    project_budget,
    subset_minimax,
    worst_case,
)
from mpnv.fd import fd_solve, kkt_solution
from mpnv.reports import SolveReport
from mpnv.simulate import mc_cost, sample_demand
from mpnv.types import DemandModel, Instance, OrderPlan


def poisson_set(members, T):
    return AmbiguitySet(family="poisson", T=T, provenance="confidence_filtered",
                        members=np.asarray(members, dtype=float))


def enumerate_minimax(instance, amb):
    """Exhaustive search over feasible integer plans, ascending cumulative order."""
    T = instance.T
    caps = [int(instance.W / instance.w[t] + 1e-9) for t in range(T)]
    best_val, best_q = math.inf, None
    for Q in itertools.product(*[range(c + 1) for c in caps]):
        Q = np.asarray(Q, dtype=float)
        if np.any(np.diff(Q) < 0):
            continue
        q = np.diff(np.concatenate([[0.0], Q]))
        if instance.spend(q) > instance.W + 1e-9:
            continue
        val = worst_case(instance, amb, q)["cost"]
        if val < best_val - 1e-12:
            best_val, best_q = val, q
    return best_q, best_val


def test_projection_example():
    x = project_budget(np.array([5.0, 5.0]), np.array([1.0, 1.0]), 8.0)
    assert np.allclose(x, [4.0, 4.0])
    assert np.dot([1.0, 1.0], x) <= 8.0 + 1e-9


def test_projection_kkt_on_random_points():
    rng = np.random.default_rng(3)
    for _ in range(200):
        T = int(rng.integers(1, 6))
        w = np.sort(rng.uniform(0.5, 3.0, T))[::-1]
        W = float(rng.uniform(0.5, 20.0))
        q = rng.uniform(-5, 15, T)
        x = project_budget(q, w, W)
        assert np.all(x >= 0)
        assert np.dot(w, x) <= W + 1e-9
        if np.dot(w, np.maximum(q, 0)) > W:  # theta > 0: budget active
            assert np.dot(w, x) == pytest.approx(W, abs=1e-8)
        # projection optimality: x = max(q - theta*w, 0) for some theta >= 0
        active = x > 0
        if np.any(active):
            thetas = (q[active] - x[active]) / w[active]
            assert np.ptp(thetas) <= 1e-8
            assert thetas[0] >= -1e-10


def test_worst_case_singleton():
    inst = Instance(T=1, p=1.0, h=1.0, b=1.0, w=[1.0], W=10.0)
    amb = poisson_set([[2.0]], 1)
    hit = worst_case(inst, amb, OrderPlan(q=[0.0]))
    assert hit["param"][0] == 2.0
    assert hit["cost"] == pytest.approx(2.0)


def test_worst_case_two_member_example():
    inst = Instance(T=1, p=1.0, h=1.0, b=1.0, w=[1.0], W=10.0)
    amb = poisson_set([[1.0], [3.0]], 1)
    hit = worst_case(inst, amb, OrderPlan(q=[0.0]))
    assert hit["param"][0] == 3.0
    assert hit["cost"] == pytest.approx(3.0)


def test_worst_case_agrees_with_monte_carlo_ranking():
    rng = np.random.default_rng(101)
    for k in range(3):
        inst = random_instance(rng, T=2)
        amb = poisson_set(rng.uniform(2.0, 15.0, (4, 2)), 2)
        plan = OrderPlan(q=rng.integers(0, 10, 2).astype(float))
        hit = worst_case(inst, amb, plan)
        mc_vals = [mc_cost(inst, plan, DemandModel(kind="poisson", lam=row),
                           200_000, seed=500 + 10 * k + j)["mean"]
                   for j, row in enumerate(amb.members)]
        assert hit["index"] == int(np.argmax(mc_vals))


def test_subset_minimax_single_member_matches_kkt_candidate():
    inst = Instance(T=2, p=1.0, h=1.0, b=2.0, w=[1.5, 1.0], W=1e6)
    model = DemandModel(kind="normal", mu=[10.0, 12.0], sigma=[2.0, 2.5])
    plan = subset_minimax(inst, model.params[None, :], "normal")
    cand = kkt_solution(inst, model, nu=0.0)
    ours = cost_raw(inst, model, plan.q)
    theirs = cost_raw(inst, model, np.maximum(cand.q, 0.0))
    assert ours == pytest.approx(theirs, abs=1e-4)


def test_subset_minimax_restart_agreement():
    inst = Instance(T=2, p=2.0, h=1.0, b=2.0, w=[2.0, 1.0], W=30.0)
    members = np.array([[8.0, 9.0, 2.0, 2.5], [9.0, 8.0, 2.5, 2.0]])
    rng = np.random.default_rng(7)
    vals = []
    for _ in range(5):
        q0 = rng.uniform(0, 10, 2)
        plan = subset_minimax(inst, members, "normal", q0=q0)
        vals.append(worst_case(inst, AmbiguitySet(
            family="normal", T=2, provenance="confidence_filtered", members=members),
            plan)["cost"])
    assert max(vals) - min(vals) <= 1e-6


def test_poisson_subset_minimax_equals_enumeration():
    inst = Instance(T=2, p=2.0, h=2.0, b=2.0, w=[2.0, 1.0], W=6.0)
    amb = poisson_set([[5.0, 5.0], [4.0, 6.0], [6.0, 4.0]], 2)
    plan = subset_minimax(inst, amb.members, "poisson")
    ours = worst_case(inst, amb, plan)["cost"]
    best_q, best_val = enumerate_minimax(inst, amb)
    assert np.array_equal(plan.q, best_q)
    assert ours == best_val


def test_cs_singleton_set_is_fixed_distribution_solve():
    inst = Instance(T=2, p=2.0, h=2.0, b=2.0, w=[2.0, 1.0], W=6.0)
    amb = poisson_set([[5.0, 5.0]], 2)
    report = cs_solve(inst, amb)
    assert len(report.iterations) == 1
    ref = full_minimax(inst, amb)
    assert report.objective == pytest.approx(ref.objective, abs=1e-12)
    assert not report.flags["worst_case_from_extreme_only"]


def test_cs_close_to_full_minimax_on_tiny_poisson_set():
    inst = Instance(T=2, p=2.0, h=1.0, b=2.0, w=[2.0, 1.0], W=14.0)
    lam_grid = list(itertools.product([4.0, 5.0, 6.0], [6.0, 7.0]))
    amb = poisson_set(lam_grid, 2)
    cs = cs_solve(inst, amb)
    ref = full_minimax(inst, amb)
    assert cs.objective <= ref.objective * 1.001 + 1e-9
    assert len(cs.iterations) <= 10


def test_cs_theta_monotone_and_honest():
    inst = Instance(T=2, p=2.0, h=1.0, b=2.0, w=[2.0, 1.0], W=14.0)
    amb = poisson_set(list(itertools.product([4.0, 5.0, 6.0], [6.0, 7.0, 8.0])), 2)
    report = cs_solve(inst, amb)
    thetas = [row["theta_k"] for row in report.iterations]
    assert all(b >= a - 1e-9 for a, b in zip(thetas, thetas[1:]))
    assert report.objective == pytest.approx(
        worst_case(inst, amb, report.plan)["cost"], abs=1e-9)


def test_cs_on_confidence_set_normal():
    inst = Instance(T=2, p=200.0, h=100.0, b=200.0, w=[200.0, 100.0], W=4000.0)
    model = DemandModel(kind="normal", mu=[10.0, 14.0], sigma=[3.0, 4.0])
    est = mle(sample_demand(model, 25, seed=11), "normal")
    amb = build_confidence_set(est, alpha=0.05, M=5)
    cs = cs_solve(inst, amb)
    ref = full_minimax(inst, amb)
    denom = worst_case(inst, amb, ref.plan)["cost"]
    qgap = 100.0 * (denom - worst_case(inst, amb, cs.plan)["cost"]) / denom
    assert abs(qgap) <= 0.1
    assert cs.plan.spend(inst) <= inst.W + 1e-6


def test_cs_m3_cross_set_reports_misses_honestly():
    # M=3 chi-square sets degenerate to one-coordinate "crosses"; the extreme
    # subset can then miss the binding member. The report must say so and
    # still carry the honest full-set worst case.
    inst = Instance(T=2, p=200.0, h=100.0, b=200.0, w=[200.0, 100.0], W=4000.0)
    model = DemandModel(kind="normal", mu=[10.0, 14.0], sigma=[3.0, 4.0])
    est = mle(sample_demand(model, 25, seed=11), "normal")
    amb = build_confidence_set(est, alpha=0.05, M=3)
    cs = cs_solve(inst, amb)
    hit = worst_case(inst, amb, cs.plan)
    assert cs.objective == pytest.approx(hit["cost"], abs=1e-9)
    assert cs.flags["worst_case_from_extreme_only"] == (
        not np.array_equal(hit["param"], cs.selected_param))
    assert cs.plan.spend(inst) <= inst.W + 1e-6


def test_full_minimax_worst_param_reproducible():
    inst = Instance(T=2, p=2.0, h=1.0, b=2.0, w=[2.0, 1.0], W=14.0)
    amb = poisson_set(list(itertools.product([4.0, 5.0], [6.0, 7.0])), 2)
    ref = full_minimax(inst, amb)
    hit = worst_case(inst, amb, ref.plan)
    assert np.array_equal(hit["param"], ref.worst_param)
    assert hit["cost"] == ref.objective


def test_gap_metrics_zero_gaps_when_reports_agree():
    inst = Instance(T=2, p=2.0, h=1.0, b=2.0, w=[2.0, 1.0], W=14.0)
    amb = poisson_set(list(itertools.product([4.0, 5.0], [6.0, 7.0])), 2)
    true_model = DemandModel(kind="poisson", lam=[4.5, 6.5])
    mle_model = DemandModel(kind="poisson", lam=[4.2, 6.8])
    cs = cs_solve(inst, amb)
    ref = full_minimax(inst, amb)
    gaps = gap_metrics(inst, amb, cs, ref, true_model, mle_model)
    if np.array_equal(cs.plan.q, ref.plan.q):
        assert gaps.q_gap_pct == pytest.approx(0.0, abs=1e-9)
    if not cs.flags["worst_case_from_extreme_only"]:
        assert gaps.omega_gap_pct == pytest.approx(0.0, abs=1e-9)
    assert gaps.omega_gap_pct >= -1e-12


def test_gap_metrics_wrong_pick_formula():
    inst = Instance(T=1, p=1.0, h=1.0, b=1.0, w=[1.0], W=10.0)
    amb = poisson_set([[1.0], [3.0]], 1)
    plan = OrderPlan(q=[0.0])
    # report that picked the dominated member on purpose
    fake = SolveReport(plan=plan, worst_param=np.array([3.0]), objective=3.0,
                       selected_param=np.array([1.0]))
    ref = SolveReport(plan=plan, worst_param=np.array([3.0]), objective=3.0,
                      selected_param=np.array([3.0]))
    true_model = DemandModel(kind="poisson", lam=[2.0])
    gaps = gap_metrics(inst, amb, fake, ref, true_model, true_model)
    c_max = 3.0
    c_picked = 1.0
    assert gaps.omega_gap_pct == pytest.approx(100.0 * (c_max - c_picked) / c_max)
    assert gaps.q_gap_pct == pytest.approx(0.0, abs=1e-12)


def test_gap_metrics_undefined_when_reference_zero():
    inst = Instance(T=1, p=1.0, h=1.0, b=1.0, w=[1.0], W=0.0)
    amb = poisson_set([[1.0]], 1)
    plan = OrderPlan(q=[0.0])
    rep = SolveReport(plan=plan, worst_param=np.array([1.0]), objective=1.0,
                      selected_param=np.array([1.0]))
    # true model chosen so the true cost of q=0 is exactly zero: b*lam - ... never 0;
    # force the undefined branch through a zero worst-case denominator instead
    zero_inst = Instance(T=1, p=0.0, h=0.0, b=0.0, w=[1.0], W=0.0)
    gaps = gap_metrics(zero_inst, amb, rep, rep,
                       DemandModel(kind="poisson", lam=[1.0]),
                       DemandModel(kind="poisson", lam=[1.0]))
    assert gaps.omega_gap_pct is None
    assert gaps.q_gap_pct is None
