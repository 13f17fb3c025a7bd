import math

import numpy as np
import pytest
import scipy.stats as sst

from conftest import (
    central_diff,
    poisson_truncated_sum_cost,
    random_instance,
    random_normal_model,
    random_poisson_model,
    second_diff,
)
from mpnv.cost import (
    normal_cost,
    normal_cost_grad_params,
    normal_cost_grad_q,
    normal_cost_raw,
    normal_cost_batch,
    poisson_cost,
    poisson_cost_grad_lambda,
    poisson_cost_raw,
)
from mpnv.errors import DomainError
from mpnv.simulate import mc_cost
from mpnv.specialfns import std_normal_inv_cdf
from mpnv.types import DemandModel, Instance, OrderPlan


def unit_instance(T=1, p=1.0, h=1.0, b=1.0, w=None, W=1e9):
    return Instance(T=T, p=p, h=h, b=b, w=[1.0] * T if w is None else w, W=W)


def test_normal_cost_symmetric_case():
    inst = unit_instance()
    model = DemandModel(kind="normal", mu=[10.0], sigma=[2.0])
    value = normal_cost(inst, model, OrderPlan(q=[10.0]))
    assert value == pytest.approx(6.0 / math.sqrt(2 * math.pi), abs=1e-12)


def test_normal_cost_zero_order_case():
    # beta = 5; value computed from the independent special-function oracle
    inst = unit_instance()
    model = DemandModel(kind="normal", mu=[10.0], sigma=[2.0])
    expected = (3 * sst.norm.cdf(5) - 1) * 10 + 3 * sst.norm.pdf(5) * 2 - 10
    assert normal_cost(inst, model, OrderPlan(q=[0.0])) == pytest.approx(expected, abs=1e-10)


def test_normal_cost_against_monte_carlo():
    rng = np.random.default_rng(21)
    for k in range(5):
        inst = random_instance(rng, T=int(rng.integers(1, 4)))
        model = random_normal_model(rng, inst.T)
        plan = OrderPlan(q=rng.uniform(0, 25, inst.T))
        mc = mc_cost(inst, plan, model, 10**6, seed=100 + k)
        assert abs(normal_cost(inst, model, plan) - mc["mean"]) <= 3 * mc["std_error"]


def test_poisson_cost_zero_order_case():
    inst = unit_instance()
    model = DemandModel(kind="poisson", lam=[2.0])
    assert poisson_cost(inst, model, OrderPlan(q=[0.0])) == pytest.approx(2.0, abs=1e-12)


def test_poisson_cost_single_unit_case():
    inst = unit_instance()
    model = DemandModel(kind="poisson", lam=[1.0])
    assert poisson_cost(inst, model, OrderPlan(q=[1.0])) == pytest.approx(
        3 * math.exp(-1), abs=1e-12)
    assert 3 * math.exp(-1) == pytest.approx(1.1036383, abs=1e-7)


def test_poisson_cost_rejects_fractional_orders():
    inst = unit_instance()
    model = DemandModel(kind="poisson", lam=[2.0])
    with pytest.raises(DomainError):
        poisson_cost(inst, model, OrderPlan(q=[0.5]))


def test_poisson_cost_matches_truncated_sum():
    rng = np.random.default_rng(33)
    for _ in range(40):
        inst = random_instance(rng, T=int(rng.integers(1, 5)))
        model = random_poisson_model(rng, inst.T)
        q = rng.integers(0, 30, inst.T).astype(float)
        ours = poisson_cost(inst, model, OrderPlan(q=q))
        oracle = poisson_truncated_sum_cost(inst, model.lam, q)
        assert ours == pytest.approx(oracle, abs=1e-10)


def test_normal_batch_matches_scalar():
    rng = np.random.default_rng(4)
    inst = random_instance(rng, T=3)
    q = rng.uniform(0, 20, 3)
    mus = rng.uniform(3, 20, (50, 3))
    sigmas = rng.uniform(0.5, 5.0, (50, 3))
    batch = normal_cost_batch(inst, mus, sigmas, q)
    for i in range(50):
        assert batch[i] == pytest.approx(
            normal_cost_raw(inst, mus[i], sigmas[i], q), rel=1e-12)


def grad_check_normal_q(rng):
    inst = random_instance(rng, T=int(rng.integers(1, 5)))
    model = random_normal_model(rng, inst.T)
    q = rng.uniform(0.5, 25, inst.T)
    grad = normal_cost_grad_q(inst, model, q)
    f = lambda v: normal_cost_raw(inst, model.mu, model.sigma, v)
    for j in range(inst.T):
        step = 1e-5 * (1 + abs(q[j]))
        fd = central_diff(f, q, j, step)
        assert grad[j] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_normal_grad_q_finite_differences():
    rng = np.random.default_rng(55)
    for _ in range(100):
        grad_check_normal_q(rng)


def test_normal_grad_q_critical_fractile_stationarity():
    inst = unit_instance()
    model = DemandModel(kind="normal", mu=[10.0], sigma=[2.0])
    qstar = 10.0 + 2.0 * std_normal_inv_cdf((1 + 1 - 1) / 3.0)
    grad = normal_cost_grad_q(inst, model, np.array([qstar]))
    assert grad[0] == pytest.approx(0.0, abs=1e-12)


def test_normal_cost_convex_in_q():
    rng = np.random.default_rng(56)
    for _ in range(100):
        inst = random_instance(rng, T=int(rng.integers(1, 4)))
        model = random_normal_model(rng, inst.T)
        q = rng.uniform(0.5, 25, inst.T)
        j = int(rng.integers(0, inst.T))
        f = lambda v: normal_cost_raw(inst, model.mu, model.sigma, v)
        assert second_diff(f, q, j, 0.5) >= -1e-8


def test_normal_grad_params_finite_differences():
    rng = np.random.default_rng(57)
    for _ in range(100):
        inst = random_instance(rng, T=int(rng.integers(1, 5)))
        model = random_normal_model(rng, inst.T)
        q = rng.uniform(0.5, 25, inst.T)
        grads = normal_cost_grad_params(inst, model, q)
        tau = int(rng.integers(0, inst.T))

        fmu = lambda m: normal_cost_raw(inst, m, model.sigma, q)
        step = 1e-5 * (1 + abs(model.mu[tau]))
        assert grads["dmu"][tau] == pytest.approx(
            central_diff(fmu, model.mu, tau, step), rel=1e-6, abs=1e-8)

        fsi = lambda s: normal_cost_raw(inst, model.mu, s, q)
        step = 1e-6 * (1 + abs(model.sigma[tau]))
        assert grads["dsigma"][tau] == pytest.approx(
            central_diff(fsi, model.sigma, tau, step), rel=1e-6, abs=1e-8)
        assert grads["dsigma"][tau] >= 0.0


def test_normal_cost_convex_in_mu_increasing_in_sigma():
    rng = np.random.default_rng(58)
    for _ in range(100):
        inst = random_instance(rng, T=int(rng.integers(1, 4)))
        model = random_normal_model(rng, inst.T)
        q = rng.uniform(0.5, 25, inst.T)
        tau = int(rng.integers(0, inst.T))
        fmu = lambda m: normal_cost_raw(inst, m, model.sigma, q)
        assert second_diff(fmu, model.mu, tau, 0.5) >= -1e-8
        fsi = lambda s: normal_cost_raw(inst, model.mu, s, q)
        assert central_diff(fsi, model.sigma, tau, 1e-2) >= -1e-8


def test_poisson_grad_lambda_finite_differences():
    rng = np.random.default_rng(59)
    for _ in range(100):
        inst = random_instance(rng, T=int(rng.integers(1, 5)))
        model = random_poisson_model(rng, inst.T)
        q = rng.integers(0, 30, inst.T).astype(float)
        grad = poisson_cost_grad_lambda(inst, model, q)
        k = int(rng.integers(0, inst.T))
        f = lambda lam: poisson_cost_raw(inst, lam, q)
        step = 1e-6 * model.lam[k]
        assert grad[k] == pytest.approx(
            central_diff(f, model.lam, k, step), rel=1e-6, abs=1e-8)


def test_poisson_grad_lambda_zero_order_value():
    # q = 0: F_t(-1) = 0, so dC/dlambda_k = sum_{t>=k} (b + p*1{t=T}) - p
    rng = np.random.default_rng(60)
    for _ in range(20):
        inst = random_instance(rng, T=int(rng.integers(1, 5)))
        model = random_poisson_model(rng, inst.T)
        grad = poisson_cost_grad_lambda(inst, model, np.zeros(inst.T))
        for k in range(inst.T):
            expected = sum(inst.b + (inst.p if t == inst.T - 1 else 0.0)
                           for t in range(k, inst.T)) - inst.p
            assert grad[k] == pytest.approx(expected, abs=1e-10)


def test_poisson_cost_convex_in_lambda():
    rng = np.random.default_rng(61)
    for _ in range(100):
        inst = random_instance(rng, T=int(rng.integers(1, 4)))
        model = random_poisson_model(rng, inst.T)
        q = rng.integers(0, 30, inst.T).astype(float)
        k = int(rng.integers(0, inst.T))
        f = lambda lam: poisson_cost_raw(inst, lam, q)
        assert second_diff(f, model.lam, k, 0.5) >= -1e-8
