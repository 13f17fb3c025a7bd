"""Standard-normal, Poisson and chi-square special functions.

Everything here rests on the regularized incomplete gamma functions
P(a, x) and Q(a, x) = 1 - P(a, x), computed by the classic power series
(x < a + 1) / continued fraction (x >= a + 1) switch:

    Phi(x)            = Q(1/2, x^2/2) / 2            for x < 0,
                        1 - Q(1/2, x^2/2) / 2        otherwise,
    PoissonCDF(k; r)  = Q(k + 1, r)                  for integer k >= 0,
    Chi2CDF(x; df)    = P(df/2, x/2).

Quantiles invert the CDFs numerically (bisection plus Newton polish), so
they are consistent with the forward functions by construction.
"""

import math

import numpy as np

from .errors import DomainError

_EPS = 3e-16
_FPMIN = 1e-300
_ITMAX = 400
_LGAMMA_HALF = math.lgamma(0.5)  # ln sqrt(pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _gser(a: float, x: float) -> float:
    """Series expansion of P(a, x); requires 0 <= x < a + 1."""
    if x <= 0.0:
        return 0.0
    ap = a
    total = delta = 1.0 / a
    for _ in range(_ITMAX):
        ap += 1.0
        delta *= x / ap
        total += delta
        if abs(delta) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gcf(a: float, x: float) -> float:
    """Modified-Lentz continued fraction of Q(a, x); requires x >= a + 1."""
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _ITMAX + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def reg_lower_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0.0 or x < 0.0:
        raise DomainError(f"reg_lower_gamma requires a > 0 and x >= 0, got a={a}, x={x}")
    if x < a + 1.0:
        return _gser(a, x)
    return 1.0 - _gcf(a, x)


def reg_upper_gamma(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x)."""
    if a <= 0.0 or x < 0.0:
        raise DomainError(f"reg_upper_gamma requires a > 0 and x >= 0, got a={a}, x={x}")
    if x < a + 1.0:
        return 1.0 - _gser(a, x)
    return _gcf(a, x)


def _q_half_vec(u: np.ndarray) -> np.ndarray:
    """Vectorized Q(1/2, u) for u >= 0 (series/CF switch at u = 1.5)."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)

    small = u < 1.5
    if np.any(small):
        us = u[small]
        total = np.full_like(us, 2.0)  # 1/a with a = 1/2
        delta = np.full_like(us, 2.0)
        ap = 0.5
        for it in range(1, 101):
            ap += 1.0
            delta = delta * us / ap
            total += delta
            if it % 8 == 0 and it >= 32 \
                    and np.all(np.abs(delta) < np.abs(total) * _EPS):
                break
        with np.errstate(divide="ignore"):
            logu = np.where(us > 0.0, np.log(np.where(us > 0.0, us, 1.0)), -np.inf)
        p = total * np.exp(-us + 0.5 * logu - _LGAMMA_HALF)
        p = np.where(us == 0.0, 0.0, p)
        out[small] = 1.0 - p

    big = ~small
    if np.any(big):
        ub = u[big]
        b = ub + 0.5  # x + 1 - a
        c = np.full_like(ub, 1.0 / _FPMIN)
        d = 1.0 / b
        h = d.copy()
        for i in range(1, 200):
            an = -i * (i - 0.5)
            b = b + 2.0
            d = an * d + b
            d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
            c = b + an / c
            c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
            d = 1.0 / d
            delta = d * c
            h *= delta
            if i % 8 == 0 and i >= 40 and np.all(np.abs(delta - 1.0) < _EPS):
                break
        out[big] = np.exp(-ub + 0.5 * np.log(ub) - _LGAMMA_HALF) * h

    return out


def _std_normal_cdf_scalar(x: float) -> float:
    u = 0.5 * x * x
    if u < 1.5:
        q = 1.0 - _gser(0.5, u)
    else:
        q = _gcf(0.5, u)
    return 0.5 * q if x < 0.0 else 1.0 - 0.5 * q


def std_normal_cdf(x):
    """Standard normal CDF, elementwise on arrays, scalar in scalar out."""
    if isinstance(x, (float, int)):
        return _std_normal_cdf_scalar(float(x))
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return _std_normal_cdf_scalar(float(arr))
    if arr.size <= 8:
        # short vectors (per-period terms, gradients): scalar loop beats
        # the fixed-iteration vectorized path by an order of magnitude
        return np.array([_std_normal_cdf_scalar(float(v))
                         for v in arr.ravel()]).reshape(arr.shape)
    q = _q_half_vec(0.5 * arr * arr)
    return np.where(arr < 0.0, 0.5 * q, 1.0 - 0.5 * q)


def std_normal_pdf(x):
    """Standard normal density, elementwise on arrays, scalar in scalar out."""
    arr = np.asarray(x, dtype=float)
    res = _INV_SQRT_2PI * np.exp(-0.5 * arr * arr)
    if np.isscalar(x) or arr.ndim == 0:
        return float(res)
    return res


def std_normal_inv_cdf(p: float) -> float:
    """Standard normal quantile: Newton on the CDF from an asymptotic start.

    Reduced to the lower tail (p <= 1/2) by symmetry; there the CDF carries
    full relative precision, so the inversion is well conditioned. Falls
    back to bisection if Newton ever fails to settle.
    """
    if not (0.0 < p < 1.0):
        raise DomainError(f"std_normal_inv_cdf requires 0 < p < 1, got {p}")
    if p > 0.5:
        return -std_normal_inv_cdf(1.0 - p)  # 1 - p is exact for p in [1/2, 1]
    if p < 0.1:
        # tail expansion Phi(-s) ~ phi(s)/s: fixed-point for s^2
        c = -2.0 * math.log(p) - math.log(2.0 * math.pi)
        v = max(c, 1.0)
        for _ in range(20):
            v = c - math.log(v)
        x = -math.sqrt(v)
    else:
        x = (p - 0.5) * math.sqrt(2.0 * math.pi)  # slope of the CDF at 0
    for _ in range(60):
        dens = _INV_SQRT_2PI * math.exp(-0.5 * x * x)
        if dens < 1e-280:
            break
        step = (_std_normal_cdf_scalar(x) - p) / dens
        x -= step
        if abs(step) < 1e-14 * max(1.0, abs(x)):
            break
    if abs(_std_normal_cdf_scalar(x) - p) <= 1e-12 * p:
        return x
    lo, hi = -45.0, 0.0  # safeguard; not expected to trigger
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _std_normal_cdf_scalar(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def poisson_cdf(k, rate: float) -> float:
    """CDF of Poisson(rate) at k; zero for k < 0, floor applied to non-integers."""
    if rate <= 0.0:
        raise DomainError(f"poisson_cdf requires rate > 0, got {rate}")
    kk = math.floor(k)
    if kk < 0:
        return 0.0
    return reg_upper_gamma(kk + 1.0, rate)


def poisson_pmf(k, rate: float) -> float:
    """PMF of Poisson(rate) at k; zero off the support."""
    if rate <= 0.0:
        raise DomainError(f"poisson_pmf requires rate > 0, got {rate}")
    if k < 0 or k != math.floor(k):
        return 0.0
    return math.exp(k * math.log(rate) - rate - math.lgamma(k + 1.0))


def poisson_inv_cdf(p: float, rate: float) -> int:
    """Smallest integer k with PoissonCDF(k; rate) >= p."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"poisson_inv_cdf requires 0 < p < 1, got {p}")
    if rate <= 0.0:
        raise DomainError(f"poisson_inv_cdf requires rate > 0, got {rate}")
    lo = -1  # cdf(-1) = 0 < p
    hi = int(math.ceil(rate + 20.0 * math.sqrt(rate) + 60.0))
    while poisson_cdf(hi, rate) < p:
        lo = hi
        hi *= 2
        if hi > 2**60:
            raise DomainError("poisson_inv_cdf failed to bracket the quantile")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if poisson_cdf(mid, rate) >= p:
            hi = mid
        else:
            lo = mid
    return hi


def poisson_cdf_table(max_k: int, rate: float) -> np.ndarray:
    """CDF values at 0..max_k via the PMF recursion (gamma fallback if exp(-rate) underflows)."""
    if rate <= 0.0:
        raise DomainError(f"poisson_cdf_table requires rate > 0, got {rate}")
    if max_k < 0:
        return np.empty(0)
    if rate < 700.0:
        k = np.arange(1, max_k + 1, dtype=float)
        pmf = np.empty(max_k + 1)
        pmf[0] = math.exp(-rate)
        if max_k >= 1:
            pmf[1:] = pmf[0] * np.cumprod(rate / k)
        return np.minimum(np.cumsum(pmf), 1.0)
    return np.array([reg_upper_gamma(kk + 1.0, rate) for kk in range(max_k + 1)])


def chi2_quantile(df: int, p: float) -> float:
    """Quantile of the chi-square law with df degrees of freedom."""
    if df < 1:
        raise DomainError(f"chi2_quantile requires df >= 1, got {df}")
    if not (0.0 < p < 1.0):
        raise DomainError(f"chi2_quantile requires 0 < p < 1, got {p}")
    a = 0.5 * df

    def cdf(x: float) -> float:
        return reg_lower_gamma(a, 0.5 * x)

    lo, hi = 0.0, df + 10.0 * math.sqrt(2.0 * df) + 30.0
    while cdf(hi) < p:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
    x = 0.5 * (lo + hi)
    for _ in range(3):
        dens = math.exp((a - 1.0) * math.log(x) - 0.5 * x - math.lgamma(a) - a * math.log(2.0))
        if dens < 1e-280:
            break
        x -= (cdf(x) - p) / dens
    return x
