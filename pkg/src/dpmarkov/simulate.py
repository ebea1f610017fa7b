"""Reference series generators and ancestral simulation from a fitted transition density."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import MixtureState, norm_logpdf

__all__ = [
    "SkewNormalParams", "skew_normal_params", "skew_normal_rvs", "skew_normal_logpdf",
    "skew_normal_mean", "simulate_brownian", "simulate_skew_normal_series",
    "skew_normal_conditional_mean", "simulate_from_model",
]


def _check_n(n, minimum):
    if int(n) != n or n < minimum:
        raise ValueError(f"n must be an integer >= {minimum}")
    return int(n)


@dataclass(frozen=True)
class SkewNormalParams:
    """Azzalini skew-normal SN(xi, omega, alpha_skew); ``omega`` is a scale, not a variance."""

    xi: float
    omega: float
    alpha_skew: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")


def skew_normal_params(z_prev) -> SkewNormalParams:
    """Conditional law of the skew-normal experiment: SN(0, 1 + 0.7|z|, 0.1 + 4 sin z)."""
    return SkewNormalParams(0.0, 1.0 + 0.7 * abs(z_prev), 0.1 + 4.0 * np.sin(z_prev))


def skew_normal_logpdf(x, xi, omega, alpha_skew):
    """log of 2/omega * phi((x-xi)/omega) * Phi(alpha (x-xi)/omega)."""
    from scipy.special import log_ndtr

    w = (np.asarray(x, float) - xi) / omega
    return np.log(2.0) - np.log(omega) - 0.5 * (np.log(2 * np.pi) + w * w) + log_ndtr(alpha_skew * w)


def skew_normal_mean(xi, omega, alpha_skew):
    return xi + omega * np.sqrt(2.0 / np.pi) * alpha_skew / np.sqrt(1.0 + alpha_skew**2)


def skew_normal_conditional_mean(z_prev):
    """E(Z_t | Z_{t-1} = z_prev) for the skew-normal experiment."""
    z_prev = np.asarray(z_prev, float)
    return skew_normal_mean(0.0, 1.0 + 0.7 * np.abs(z_prev), 0.1 + 4.0 * np.sin(z_prev))


def skew_normal_rvs(rng: np.random.Generator, xi, omega, alpha_skew, size=None):
    """Exact draws: with (U0, U1) standard normal with correlation a/sqrt(1+a^2),
    xi + omega * sign(U0) * U1 is SN(xi, omega, a)."""
    delta = alpha_skew / np.sqrt(1.0 + alpha_skew**2)
    u0 = rng.standard_normal(size)
    v = rng.standard_normal(size)
    u1 = delta * u0 + np.sqrt(1.0 - delta**2) * v
    return xi + omega * np.where(u0 >= 0, u1, -u1)


def simulate_brownian(n: int, seed=None) -> np.ndarray:
    """z_1 = 0 and z_t = z_{t-1} + N(0, 1)."""
    n = _check_n(n, 2)
    rng = np.random.default_rng(seed)
    return np.concatenate(([0.0], np.cumsum(rng.standard_normal(n - 1))))


def simulate_skew_normal_series(n: int, z1: float = 0.0, seed=None) -> np.ndarray:
    """z_t ~ SN(0, 1 + 0.7|z_{t-1}|, 0.1 + 4 sin z_{t-1}) started at ``z1``."""
    n = _check_n(n, 2)
    rng = np.random.default_rng(seed)
    z = np.empty(n)
    z[0] = z1
    for t in range(1, n):
        p = skew_normal_params(z[t - 1])
        z[t] = skew_normal_rvs(rng, p.xi, p.omega, p.alpha_skew)
    return z


def simulate_from_model(state: MixtureState, z1: float, n: int, seed=None) -> np.ndarray:
    """Ancestral sampling: pick component l with probability q_l(z_{t-1}), then draw z_t."""
    n = _check_n(n, 1)
    rng = np.random.default_rng(seed)
    z = np.empty(n)
    z[0] = z1
    for t in range(1, n):
        xp = z[t - 1]
        lk = state.log_weights + norm_logpdf(xp, state.mu_x, state.delta_x)
        q = np.exp(lk - logsumexp(lk))
        l = min(int(np.searchsorted(np.cumsum(q), rng.random() * q.sum(), side="right")),
                state.L - 1)
        mean = state.mu_y[l] - state.beta[l] * (xp - state.mu_x[l])
        z[t] = mean + np.sqrt(state.delta_y[l]) * rng.standard_normal()
    return z
