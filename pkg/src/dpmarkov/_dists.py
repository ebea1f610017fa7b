"""Random-variate helpers shared by the samplers."""
from __future__ import annotations

import numpy as np
from scipy.special import betainc, betaincinv, log_ndtr, ndtr, ndtri

EDGE = 1e-12


def inv_gamma(rng: np.random.Generator, shape, rate, size=None):
    """Draw from IG(shape, rate), density proportional to x^(-shape-1) exp(-rate/x)."""
    return 1.0 / rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)


def truncated_beta_ppf(a: float, b: float, lo: float, hi: float, u: float) -> float:
    """Quantile ``u`` of Beta(a, b) restricted to ``(lo, hi)``.

    Uses the regularized incomplete beta function and its inverse; the upper
    tail is handled through the reflected distribution, and intervals whose
    mass underflows fall back to inverting the CDF of the unnormalized
    density on a fine grid.
    """
    lo = min(max(lo, EDGE), 1.0 - EDGE)
    hi = min(max(hi, EDGE), 1.0 - EDGE)
    if hi <= lo:
        return lo
    mode_side_upper = lo > a / (a + b)
    if not mode_side_upper:
        f_lo, f_hi = betainc(a, b, lo), betainc(a, b, hi)
        mass = f_hi - f_lo
        if mass > 1e-300 and mass > 1e-10 * f_hi:
            x = betaincinv(a, b, f_lo + u * mass)
            return _clip_or_bisect(x, a, b, lo, hi, f_lo + u * mass, upper=False)
    else:
        s_lo, s_hi = betainc(b, a, 1.0 - lo), betainc(b, a, 1.0 - hi)
        mass = s_lo - s_hi
        if mass > 1e-300 and mass > 1e-10 * s_lo:
            target = s_lo - u * mass
            x = 1.0 - betaincinv(b, a, target)
            return _clip_or_bisect(x, a, b, lo, hi, target, upper=True)
    return _grid_ppf(a, b, lo, hi, u)


def _clip_or_bisect(x, a, b, lo, hi, target, upper):
    if np.isfinite(x) and lo <= x <= hi:
        return float(x)
    # betaincinv lost accuracy; bisect on the monotone CDF instead
    left, right = lo, hi
    for _ in range(200):
        mid = 0.5 * (left + right)
        val = betainc(b, a, 1.0 - mid) if upper else betainc(a, b, mid)
        below = val > target if upper else val < target
        if below:
            left = mid
        else:
            right = mid
        if right - left < 1e-15 * max(mid, 1e-300):
            break
    return 0.5 * (left + right)


def _grid_ppf(a, b, lo, hi, u, n=4097):
    x = np.linspace(lo, hi, n)
    logf = (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x)
    f = np.exp(logf - logf.max())
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(x))))
    cdf /= cdf[-1]
    return float(np.interp(u, cdf, x))


def truncated_beta_rvs(rng: np.random.Generator, a, b, lo, hi) -> float:
    return truncated_beta_ppf(a, b, lo, hi, rng.random())


def truncated_normal_mass(mean, var, lo=-1.0, hi=1.0):
    """log P(lo < X < hi) for X ~ N(mean, var)."""
    sd = np.sqrt(var)
    a, b = (lo - mean) / sd, (hi - mean) / sd
    # subtract in the tail farther from the mean for accuracy
    if a > 0:
        return log_ndtr(-a) + np.log1p(-np.exp(log_ndtr(-b) - log_ndtr(-a)))
    return log_ndtr(b) + np.log1p(-np.exp(log_ndtr(a) - log_ndtr(b)))


def truncated_normal_rvs(rng: np.random.Generator, mean, var, lo=-1.0, hi=1.0):
    """Exact draw from N(mean, var) restricted to (lo, hi) by inverse CDF."""
    sd = np.sqrt(var)
    a, b = (lo - mean) / sd, (hi - mean) / sd
    u = rng.random()
    if a > 0:
        # work in the upper tail through symmetry
        pa, pb = ndtr(-a), ndtr(-b)
        q = pa - u * (pa - pb)
        x = -ndtri(q)
    else:
        pa, pb = ndtr(a), ndtr(b)
        x = ndtri(pa + u * (pb - pa))
    return float(np.clip(mean + sd * x, lo, hi))
