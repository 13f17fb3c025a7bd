"""Inventory recursion, demand sampling and the Monte-Carlo cost oracle."""

import math

import numpy as np

from .errors import DimensionError, ParameterError
from .types import NORMAL, DemandModel, Instance, OrderPlan, SampleSet


def _path_costs(instance: Instance, q: np.ndarray, paths: np.ndarray) -> np.ndarray:
    """Realized cost of each demand path (rows) under order vector q."""
    inv = np.cumsum(q[None, :] - paths, axis=1)
    held = np.maximum(inv, 0.0)
    short = np.maximum(-inv, 0.0)
    per_period = instance.h * held + instance.b * short + (instance.w * q)[None, :] \
        - instance.p * paths
    return instance.p * short[:, -1] + per_period.sum(axis=1)


def simulate_inventory(instance: Instance, plan: OrderPlan, demand_path) -> float:
    """Realized cost p*I_T^- + sum_t (h*I_t^+ + b*I_t^- + w_t q_t - p x_t), I_0 = 0."""
    x = np.asarray(demand_path, dtype=float)
    if x.shape != (instance.T,):
        raise DimensionError(f"demand path has shape {x.shape}, expected ({instance.T},)")
    return float(_path_costs(instance, np.asarray(plan.q, dtype=float), x[None, :])[0])


def _spawn_generators(seed, T: int) -> list[np.random.Generator]:
    # one PCG64 substream per period: extending T leaves earlier periods' draws unchanged
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(T)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def sample_demand(model: DemandModel, N: int, seed=None) -> SampleSet:
    """Draw an N x T demand matrix, reproducible given the seed."""
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    T = model.T
    gens = _spawn_generators(seed, T)
    draws = np.empty((N, T))
    for t, gen in enumerate(gens):
        if model.kind == NORMAL:
            draws[:, t] = gen.normal(model.mu[t], model.sigma[t], size=N)
        else:
            draws[:, t] = gen.poisson(model.lam[t], size=N)
    return SampleSet(draws=draws, seed=seed, source_model=model)


def mc_cost(instance: Instance, plan: OrderPlan, model: DemandModel,
            n_samples: int, seed=None) -> dict:
    """Monte-Carlo estimate of the expected cost.

    Normal draws are deliberately not truncated at zero: the closed-form
    objective integrates over all reals, and this oracle must match it.
    """
    if n_samples < 2:
        raise ParameterError(f"n_samples must be >= 2, got {n_samples}")
    if model.T != instance.T:
        raise DimensionError(f"model horizon {model.T} != instance horizon {instance.T}")
    draws = sample_demand(model, n_samples, seed).draws
    costs = _path_costs(instance, np.asarray(plan.q, dtype=float), draws)
    mean = float(np.mean(costs))
    std_error = float(np.std(costs, ddof=1) / math.sqrt(n_samples))
    return {"mean": mean, "std_error": std_error}
