"""Mixture transition density, stick-breaking weights and related pure functions.

Every Gaussian here is parametrized by its variance.  Mixture sums are done in
log space so the weights stay well defined when the conditioning value sits far
from every weight-kernel location.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np
from scipy.special import logsumexp

LOG_2PI = np.log(2.0 * np.pi)


def norm_logpdf(x, mean, var):
    """Log density of N(mean, var), broadcasting over all arguments."""
    return -0.5 * (LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


@dataclass(frozen=True)
class ComponentParams:
    """One atom (mu_x, mu_y, beta, delta_x, delta_y) of the truncated DP."""

    mu_x: float
    mu_y: float
    beta: float
    delta_x: float
    delta_y: float

    def __post_init__(self):
        vals = [self.mu_x, self.mu_y, self.beta, self.delta_x, self.delta_y]
        if not np.all(np.isfinite(vals)):
            raise ValueError("component parameters must be finite")
        if self.delta_x <= 0 or self.delta_y <= 0:
            raise ValueError("delta_x and delta_y must be positive")


@dataclass(frozen=True)
class Hyperparams:
    """Hyperparameters of the base distribution G0.

    mu_x ~ N(m_x, v_x), mu_y ~ N(m_y, v_y), delta_x ~ IG(nu_x, s_x),
    delta_y ~ IG(nu_y, s_y), beta ~ N(theta, c).
    """

    m_x: float
    v_x: float
    m_y: float
    v_y: float
    s_x: float
    s_y: float
    theta: float
    c: float
    nu_x: float = 2.0
    nu_y: float = 2.0

    def __post_init__(self):
        for name in ("v_x", "v_y", "s_x", "s_y", "c", "nu_x", "nu_y"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "Hyperparams":
        return cls(*[float(a) for a in arr])

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def _as_zeta(zeta) -> np.ndarray:
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if zeta.ndim != 1:
        raise ValueError("zeta must be one-dimensional")
    if np.any(~(zeta > 0) | ~(zeta < 1)):
        raise ValueError("every stick variable must lie strictly inside (0, 1)")
    return zeta


def log_stick_break(zeta) -> np.ndarray:
    """Log weights from the latent beta(alpha, 1) stick variables.

    ``log p_l = log(1 - zeta_l) + sum_{r<l} log zeta_r`` and
    ``log p_L = sum_r log zeta_r``.
    """
    zeta = _as_zeta(zeta)
    log_z = np.log(zeta)
    prefix = np.concatenate(([0.0], np.cumsum(log_z)))
    out = prefix.copy()
    out[:-1] += np.log1p(-zeta)
    return out


def stick_break(zeta) -> np.ndarray:
    """Map stick variables ``zeta`` (length L-1) to weights ``p`` (length L).

    Examples
    --------
    >>> stick_break([0.5, 0.5])
    array([0.5 , 0.25, 0.25])
    """
    return np.exp(log_stick_break(zeta))


@dataclass(frozen=True, eq=False)
class MixtureState:
    """All parameters that define one transition density.

    Component parameters are stored column-wise as length-L arrays.
    """

    mu_x: np.ndarray
    mu_y: np.ndarray
    beta: np.ndarray
    delta_x: np.ndarray
    delta_y: np.ndarray
    zeta: np.ndarray
    alpha: float = 1.0
    psi: Hyperparams | None = None
    log_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        arrs = {}
        for name in ("mu_x", "mu_y", "beta", "delta_x", "delta_y"):
            a = np.array(getattr(self, name), dtype=float).reshape(-1)
            a.flags.writeable = False
            arrs[name] = a
        L = arrs["mu_x"].size
        if any(a.size != L for a in arrs.values()):
            raise ValueError("component arrays must share length L")
        if L < 1:
            raise ValueError("need at least one component")
        if np.any(arrs["delta_x"] <= 0) or np.any(arrs["delta_y"] <= 0):
            raise ValueError("variances must be positive")
        zeta = np.array(self.zeta, dtype=float).reshape(-1)
        if zeta.size != L - 1:
            raise ValueError(f"expected {L - 1} stick variables, got {zeta.size}")
        zeta.flags.writeable = False
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        for name, a in arrs.items():
            object.__setattr__(self, name, a)
        object.__setattr__(self, "zeta", zeta)
        lw = log_stick_break(zeta)
        lw.flags.writeable = False
        object.__setattr__(self, "log_weights", lw)

    @property
    def L(self) -> int:
        return self.mu_x.size

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def components(self) -> list[ComponentParams]:
        return [
            ComponentParams(*map(float, row))
            for row in zip(self.mu_x, self.mu_y, self.beta, self.delta_x, self.delta_y)
        ]

    @classmethod
    def from_components(cls, components, zeta, alpha=1.0, psi=None) -> "MixtureState":
        cols = np.array(
            [[c.mu_x, c.mu_y, c.beta, c.delta_x, c.delta_y] for c in components], dtype=float
        )
        return cls(*cols.T, zeta=zeta, alpha=alpha, psi=psi)

    @classmethod
    def from_weights(cls, mu_x, mu_y, beta, delta_x, delta_y, weights, **kw) -> "MixtureState":
        """Build a state from explicit weights by inverting the stick-breaking map."""
        return cls(mu_x, mu_y, beta, delta_x, delta_y, zeta=weights_to_zeta(weights), **kw)


def weights_to_zeta(weights) -> np.ndarray:
    """Inverse of :func:`stick_break` for strictly positive weights."""
    p = np.asarray(weights, dtype=float)
    if np.any(p <= 0) or not np.isclose(p.sum(), 1.0, atol=1e-10):
        raise ValueError("weights must be positive and sum to one")
    # tail[l] = p_l + ... + p_L = prod_{r<l} zeta_r
    tail = np.cumsum(p[::-1])[::-1]
    return tail[1:] / tail[:-1]


# -- mixture evaluations; arrays broadcast with a trailing component axis --


def _log_weight_kernels(z_prev, mu_x, delta_x, log_w):
    z_prev = np.asarray(z_prev, dtype=float)[..., None]
    return log_w + norm_logpdf(z_prev, mu_x, delta_x)


def log_transition_weights(z_prev, state: MixtureState) -> np.ndarray:
    lk = _log_weight_kernels(z_prev, state.mu_x, state.delta_x, state.log_weights)
    return lk - logsumexp(lk, axis=-1, keepdims=True)


def transition_weights(z_prev, state: MixtureState) -> np.ndarray:
    """State-dependent weights ``q_l(z_prev)``; trailing axis indexes components."""
    q = np.exp(log_transition_weights(z_prev, state))
    assert np.all(np.isfinite(q)), "weights are not finite"
    return q


def component_means(z_prev, state: MixtureState) -> np.ndarray:
    z_prev = np.asarray(z_prev, dtype=float)[..., None]
    return state.mu_y - state.beta * (z_prev - state.mu_x)


def log_transition_density(z, z_prev, state: MixtureState) -> np.ndarray:
    """Log of the mixture transition density f(z | z_prev)."""
    z, z_prev = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(z_prev, dtype=float))
    lq = log_transition_weights(z_prev, state)
    lk = norm_logpdf(z[..., None], component_means(z_prev, state), state.delta_y)
    return logsumexp(lq + lk, axis=-1)


def transition_density(z, z_prev, state: MixtureState) -> np.ndarray:
    """Mixture transition density f(z | z_prev); broadcasts over z and z_prev."""
    return np.exp(log_transition_density(z, z_prev, state))


def joint_covariance(beta: float, delta_x: float, delta_y: float) -> np.ndarray:
    """Rebuild the 2x2 kernel covariance from its square-root-free Cholesky factors."""
    b_inv = np.array([[1.0, 0.0], [-beta, 1.0]])
    return b_inv @ np.diag([delta_x, delta_y]) @ b_inv.T


def transition_density_via_joint(z, z_prev, state: MixtureState) -> np.ndarray:
    """Transition density computed from the bivariate-normal conditioning formulas.

    Independent of :func:`transition_density`; used only to check it.
    """
    z, z_prev = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(z_prev, dtype=float))
    sxx = np.empty(state.L)
    syx = np.empty(state.L)
    syy = np.empty(state.L)
    for l in range(state.L):
        sigma = joint_covariance(state.beta[l], state.delta_x[l], state.delta_y[l])
        np.linalg.cholesky(sigma)  # raises LinAlgError if not positive definite
        sxx[l], syx[l], syy[l] = sigma[0, 0], sigma[1, 0], sigma[1, 1]
    x = z_prev[..., None]
    lk_x = state.log_weights + norm_logpdf(x, state.mu_x, sxx)
    lq = lk_x - logsumexp(lk_x, axis=-1, keepdims=True)
    cond_mean = state.mu_y + syx / sxx * (x - state.mu_x)
    cond_var = syy - syx**2 / sxx
    return np.exp(logsumexp(lq + norm_logpdf(z[..., None], cond_mean, cond_var), axis=-1))


def conditional_expectation(z_prev, state: MixtureState) -> np.ndarray:
    """E(Z_t | Z_{t-1} = z_prev, G): a weighted mixture of linear functions."""
    q = transition_weights(z_prev, state)
    return np.sum(q * component_means(z_prev, state), axis=-1)


# -- truncation level --


def expected_partial_sum(L: int, alpha_prior, mc_draws: int = 100_000, seed: int = 0) -> float:
    """Prior expectation of ``p_1 + ... + p_L`` for the untruncated DP.

    ``alpha_prior`` is either a ``(shape, rate)`` gamma prior for alpha or a
    fixed positive alpha.
    """
    log_ratio = _alpha_log_ratio(alpha_prior, mc_draws, seed)
    return float(np.mean(-np.expm1(L * log_ratio)))


def _alpha_log_ratio(alpha_prior, mc_draws, seed):
    if np.ndim(alpha_prior) == 0:
        alpha = np.array([float(alpha_prior)])
    else:
        shape, rate = alpha_prior
        if mc_draws < 10_000:
            raise ValueError("mc_draws must be at least 1e4")
        alpha = np.random.default_rng(seed).gamma(shape, 1.0 / rate, size=mc_draws)
    return np.log(alpha / (alpha + 1.0))


def choose_truncation(alpha_prior, tolerance: float = 1e-3, mc_draws: int = 100_000,
                      seed: int = 0, max_L: int = 10_000) -> int:
    """Smallest L whose prior expected partial weight sum is at least 1 - tolerance."""
    if not 0 < tolerance < 1:
        raise ValueError("tolerance must lie in (0, 1)")
    log_ratio = _alpha_log_ratio(alpha_prior, mc_draws, seed)
    # the expected tail mass is decreasing in L, so bisect
    def tail(L):
        return np.mean(np.exp(L * log_ratio))

    if tail(max_L) > tolerance:
        raise ValueError(f"tolerance not reached for L <= {max_L}")
    lo, hi = 1, max_L
    while lo < hi:
        mid = (lo + hi) // 2
        if tail(mid) <= tolerance:
            hi = mid
        else:
            lo = mid + 1
    return lo
