"""Shared fixtures and independent oracles used across the suite."""

import math

import numpy as np
import scipy.stats as sst

from mpnv.types import DemandModel, Instance


def random_instance(rng, T=None, scale="unit"):
    """Draw a valid instance; `scale` switches between unit-cost and paper-cost grids."""
    if T is None:
        T = int(rng.integers(1, 5))
    if scale == "unit":
        p, h, b = rng.uniform(0.2, 3.0, size=3)
        w = np.sort(rng.uniform(0.5, 2.5, size=T))[::-1]
        W = float(rng.uniform(5.0, 60.0))
    else:
        p, h, b = rng.choice([100.0, 200.0], size=3)
        w = 100.0 * np.arange(T, 0, -1)
        W = 4000.0 if T <= 3 else 8000.0
    return Instance(T=T, p=float(p), h=float(h), b=float(b), w=w, W=W)


def random_normal_model(rng, T):
    mu = rng.uniform(3.0, 20.0, size=T)
    sigma = rng.uniform(0.5, mu / 3.0)
    return DemandModel(kind="normal", mu=mu, sigma=sigma)


def random_poisson_model(rng, T):
    return DemandModel(kind="poisson", lam=rng.uniform(1.0, 20.0, size=T))


def poisson_truncated_sum_cost(instance, lam, q, tail=1e-14):
    """Direct summation of E[I_t^+], E[I_t^-] definitions, tail mass below `tail`.

    Uses scipy's Poisson pmf so the route is independent of the package's
    special functions.
    """
    lam = np.asarray(lam, dtype=float)
    q = np.asarray(q, dtype=float)
    Lam = np.cumsum(lam)
    Q = np.cumsum(q)
    total = 0.0
    for t in range(instance.T):
        L = Lam[t]
        kmax = int(L + 20 * math.sqrt(L) + 80)
        while sst.poisson.sf(kmax, L) > tail:
            kmax *= 2
        ks = np.arange(0, kmax + 1)
        pmf = sst.poisson.pmf(ks, L)
        e_plus = float(np.sum(np.maximum(Q[t] - ks, 0.0) * pmf))
        # E[I_t^-] = E[X - Q]^+ = (L - Q) + E[Q - X]^+ keeps the truncation exact
        e_minus = (L - Q[t]) + e_plus
        bp = instance.b + (instance.p if t == instance.T - 1 else 0.0)
        total += instance.h * e_plus + bp * e_minus \
            + instance.w[t] * q[t] - instance.p * lam[t]
    return total


def central_diff(f, x, i, step):
    up = np.array(x, dtype=float)
    dn = np.array(x, dtype=float)
    up[i] += step
    dn[i] -= step
    return (f(up) - f(dn)) / (2.0 * step)


def second_diff(f, x, i, step):
    up = np.array(x, dtype=float)
    dn = np.array(x, dtype=float)
    up[i] += step
    dn[i] -= step
    return (f(up) + f(dn) - 2.0 * f(np.asarray(x, dtype=float))) / step**2
