"""Mixture model restricted so that its transition density has a known invariant law.

Component ``l`` has weight kernel N(mu_l, sigma2_l) and response kernel
N(mu_l - beta_l (z_prev - mu_l), sigma2_l (1 - beta_l^2)) with |beta_l| < 1,
so ``sum_l p_l N(mu_l, sigma2_l)`` is invariant under the transition.  In the
general parametrization this is mu_x = mu_y = mu, delta_x = sigma2 and
delta_y = sigma2 (1 - beta^2), which lets the sampler reuse the label, stick
and precision updates of the general model unchanged.

Priors: mu_l ~ N(m, v), sigma2_l ~ IG(nu, s), beta_l ~ N(theta, c) truncated
to (-1, 1), with the hyperpriors on (m, v, s) taken from the ``*_x`` entries
of a :class:`~dpmarkov.priors.HyperpriorConfig` and those on (theta, c)
shared with the general model.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .._dists import inv_gamma, truncated_normal_mass, truncated_normal_rvs
from ..draws import PosteriorDraws, read_columns, write_columns, FORMAT_VERSION
from ..model import Hyperparams, MixtureState, log_stick_break, norm_logpdf
from ..priors import HyperpriorConfig
from .. import sampler as _s

__all__ = [
    "StationaryComponent", "StationaryState", "StationaryDraws", "StationaryChainState",
    "stationary_transition_density", "stationary_log_transition_density", "invariant_density",
    "fit_stationary",
]

# keeps sigma2 (1 - beta^2) away from zero
_BETA_MAX = 1.0 - 1e-10


@dataclass(frozen=True)
class StationaryComponent:
    mu: float
    sigma2: float
    beta: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.mu, self.sigma2, self.beta])):
            raise ValueError("component parameters must be finite")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if not abs(self.beta) < 1:
            raise ValueError("beta must lie strictly inside (-1, 1)")


@dataclass(frozen=True, eq=False)
class StationaryState:
    """Restricted mixture: length-L arrays ``mu``, ``sigma2``, ``beta`` and sticks ``zeta``."""

    mu: np.ndarray
    sigma2: np.ndarray
    beta: np.ndarray
    zeta: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("mu", "sigma2", "beta"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.mu.shape == self.sigma2.shape == self.beta.shape):
            raise ValueError("mu, sigma2 and beta must have equal length")
        if np.any(~np.isfinite(self.mu)) or np.any(~(self.sigma2 > 0)):
            raise ValueError("mu must be finite and sigma2 positive")
        if np.any(~(np.abs(self.beta) < 1)):
            raise ValueError("every beta must lie strictly inside (-1, 1)")
        zeta = np.asarray(self.zeta, dtype=float).reshape(-1)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "log_weights", log_stick_break(zeta) if zeta.size else np.zeros(1))
        if self.log_weights.size != self.mu.size:
            raise ValueError("zeta must have L - 1 entries")

    @property
    def L(self) -> int:
        return self.mu.size

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @classmethod
    def from_components(cls, components, zeta, alpha=1.0) -> "StationaryState":
        return cls(np.array([c.mu for c in components]), np.array([c.sigma2 for c in components]),
                   np.array([c.beta for c in components]), zeta, alpha)

    def to_mixture(self) -> MixtureState:
        """Embedding into the general parametrization."""
        return MixtureState(self.mu, self.mu, self.beta, self.sigma2,
                            self.sigma2 * (1.0 - self.beta**2), zeta=self.zeta, alpha=self.alpha)


def stationary_log_transition_density(z, z_prev, state: StationaryState):
    z, z_prev = np.broadcast_arrays(np.asarray(z, float), np.asarray(z_prev, float))
    xp = z_prev[..., None]
    lk = state.log_weights + norm_logpdf(xp, state.mu, state.sigma2)
    lq = lk - logsumexp(lk, axis=-1, keepdims=True)
    mean = state.mu - state.beta * (xp - state.mu)
    lc = norm_logpdf(z[..., None], mean, state.sigma2 * (1.0 - state.beta**2))
    return logsumexp(lq + lc, axis=-1)


def stationary_transition_density(z, z_prev, state: StationaryState):
    """sum_l q_l(z_prev) N(z | mu_l - beta_l (z_prev - mu_l), sigma2_l (1 - beta_l^2))."""
    return np.exp(stationary_log_transition_density(z, z_prev, state))


def invariant_density(y, state: StationaryState):
    """The stationary marginal sum_l p_l N(y | mu_l, sigma2_l)."""
    y = np.asarray(y, float)
    return np.exp(logsumexp(state.log_weights + norm_logpdf(y[..., None], state.mu, state.sigma2),
                            axis=-1))


# -- posterior draws --

_PSI_NAMES = ("m", "v", "s", "theta", "c", "nu")


def _psi_from_general(h: Hyperparams) -> np.ndarray:
    return np.array([h.m_x, h.v_x, h.s_x, h.theta, h.c, h.nu_x])


def _psi_to_general(row) -> np.ndarray:
    m, v, s, theta, c, nu = row
    return np.array([m, v, m, v, s, s, theta, c, nu, nu])


@dataclass(eq=False)
class StationaryDraws:
    """Retained draws of the restricted model; evaluation goes through the embedding."""

    mu: np.ndarray
    sigma2: np.ndarray
    beta: np.ndarray
    zeta: np.ndarray
    alpha: np.ndarray
    psi: np.ndarray
    iterations: np.ndarray
    meta: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict, repr=False)

    model = "stationary"

    def __post_init__(self):
        for name in ("mu", "sigma2", "beta", "zeta", "psi"):
            setattr(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        self.iterations = np.asarray(self.iterations, dtype=np.int64).reshape(-1)
        if len(self) == 0:
            raise ValueError("posterior draws are empty")
        if np.any(~(np.abs(self.beta) < 1)):
            raise ValueError("stationary draws need |beta| < 1")
        self.meta.setdefault("model", self.model)
        self._general = None

    def __len__(self) -> int:
        return self.mu.shape[0]

    @property
    def L(self) -> int:
        return self.mu.shape[1]

    @property
    def general(self) -> PosteriorDraws:
        if self._general is None:
            self._general = PosteriorDraws(
                self.mu, self.mu, self.beta, self.sigma2, self.sigma2 * (1.0 - self.beta**2),
                self.zeta.reshape(len(self), self.L - 1), self.alpha,
                np.array([_psi_to_general(r) for r in self.psi]), self.iterations, self.meta)
        return self._general

    def __getitem__(self, i) -> StationaryState:
        return StationaryState(self.mu[i], self.sigma2[i], self.beta[i], self.zeta[i],
                               float(self.alpha[i]))

    def log_density_matrix(self, z, z_prev):
        return self.general.log_density_matrix(z, z_prev)

    def log_density_rows(self, z, z_prev):
        return self.general.log_density_rows(z, z_prev)

    def expectation_matrix(self, z_prev):
        return self.general.expectation_matrix(z_prev)

    def sample_next(self, z_prev, rng):
        return self.general.sample_next(z_prev, rng)

    @classmethod
    def from_states(cls, states, meta=None) -> "StationaryDraws":
        states = list(states)
        return cls(np.array([s.mu_x for s in states]), np.array([s.delta_x for s in states]),
                   np.array([s.beta for s in states]),
                   np.array([s.zeta for s in states]).reshape(len(states), -1),
                   np.array([s.alpha for s in states]),
                   np.array([_psi_from_general(s.psi) for s in states]),
                   np.arange(len(states)), meta or {})

    @classmethod
    def concatenate(cls, parts) -> "StationaryDraws":
        parts = list(parts)
        cat = {name: np.concatenate([getattr(p, name) for p in parts])
               for name in ("mu", "sigma2", "beta", "zeta", "alpha", "psi", "iterations")}
        return cls(**cat, meta=dict(parts[0].meta))

    def column_names(self) -> list[str]:
        names = ["iteration", "alpha"] + ["psi_" + n for n in _PSI_NAMES]
        for prefix in ("mu", "sigma2", "beta"):
            names += [f"{prefix}_{l + 1}" for l in range(self.L)]
        return names + [f"zeta_{l + 1}" for l in range(self.L - 1)]

    def to_matrix(self) -> np.ndarray:
        return np.column_stack([self.iterations, self.alpha, self.psi, self.mu, self.sigma2,
                                self.beta, self.zeta.reshape(len(self), -1)])

    def _header_meta(self) -> dict:
        meta = {k: v for k, v in self.meta.items() if k != "occupied"}
        meta.update(format_version=FORMAT_VERSION, model=self.model, L=self.L)
        return meta

    def to_text(self) -> str:
        return write_columns(self.column_names(), self.to_matrix(), self._header_meta())

    @classmethod
    def _from_matrix(cls, mat, meta):
        L = int(meta["L"])
        it, alpha, psi, mu, s2, b, zeta = np.split(
            mat, np.cumsum([1, 1, len(_PSI_NAMES), L, L, L]), axis=1)
        return cls(mu, s2, b, zeta, alpha[:, 0], psi, it[:, 0].astype(np.int64), meta)

    @classmethod
    def from_text(cls, text: str) -> "StationaryDraws":
        _, mat, meta = read_columns(text)
        return cls._from_matrix(mat, meta)


# -- sampler --


class StationaryChainState(_s.ChainState):
    """Chain state holding the restricted model in general coordinates.

    Invariants: ``mu_y == mu_x``, ``delta_y == delta_x (1 - beta^2)``,
    ``|beta| < 1``; ``psi`` repeats (m, v, s, nu) in its x and y slots.
    """

    model = "stationary"
    _ARRAYS = _s.ChainState._ARRAYS + ("scale_beta", "prop_beta", "acc_beta")

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.scale_beta = np.full(self.L, 0.5)
        self.prop_beta = np.zeros(self.L, dtype=np.int64)
        self.acc_beta = np.zeros(self.L, dtype=np.int64)

    def check_invariants(self):
        super().check_invariants()
        if np.any(~(np.abs(self.beta) < 1)):
            raise ValueError("stationary state needs |beta| < 1")

    def acceptance_rates(self) -> dict:
        rates = super().acceptance_rates()
        rates = {"mu": rates["mu_x"], "sigma2": rates["delta_x"]}
        with np.errstate(invalid="ignore", divide="ignore"):
            rates["beta"] = self.acc_beta / self.prop_beta
        return rates


    def proposal_counts(self) -> dict:
        return {"mu": self.prop_mu_x.copy(), "sigma2": self.prop_delta_x.copy(),
                "beta": self.prop_beta.copy()}


def _sync(state, l):
    state.mu_y[l] = state.mu_x[l]
    state.delta_y[l] = state.delta_x[l] * (1.0 - state.beta[l] ** 2)


def update_beta_restricted(state: StationaryChainState, z) -> StationaryChainState:
    """Random walk on atanh(beta) for occupied components, exact prior draws for empty ones.

    The weights do not involve beta, so only the response kernel enters.
    """
    x, y = _s._split(z)
    rng, psi, lab = state.rng, state.psi, state.labels
    M = np.bincount(lab, minlength=state.L)

    def log_target(l, b, xs, ys):
        mu, s2 = state.mu_x[l], state.delta_x[l]
        ll = np.sum(norm_logpdf(ys, mu - b * (xs - mu), s2 * (1.0 - b * b)))
        return ll - 0.5 * (b - psi.theta) ** 2 / psi.c + np.log1p(-b * b)

    order = np.argsort(lab, kind="stable")
    bounds = np.concatenate(([0], np.cumsum(M)))
    for l in range(state.L):
        eps, log_u = rng.standard_normal(), np.log(rng.random())
        if M[l] > 0:
            idx = order[bounds[l]:bounds[l + 1]]
            xs, ys = x[idx], y[idx]
            cur = state.beta[l]
            prop = np.tanh(np.arctanh(cur) + state.scale_beta[l] * eps)
            accepted = bool(abs(prop) < _BETA_MAX
                            and log_u < log_target(l, prop, xs, ys) - log_target(l, cur, xs, ys))
            if accepted:
                state.beta[l] = prop
            state.prop_beta[l] += 1
            state.acc_beta[l] += accepted
            _s._robbins_monro(state, state.scale_beta, l, accepted, state.prop_beta[l])
        else:
            b = truncated_normal_rvs(rng, psi.theta, psi.c, -1.0, 1.0)
            state.beta[l] = float(np.clip(b, -_BETA_MAX, _BETA_MAX))
        _sync(state, l)
    return state


def update_mu_restricted(state: StationaryChainState, z, cache) -> StationaryChainState:
    """Metropolis for the shared location; its Gaussian factor combines both kernels."""
    x, y = _s._split(z)
    rng, psi, lab, L = state.rng, state.psi, state.labels, state.L
    M = np.bincount(lab, minlength=L)
    sx = np.bincount(lab, weights=x, minlength=L)
    sy = np.bincount(lab, weights=y, minlength=L)
    log_w = state.log_weights
    for l in range(L):
        eps, log_u = rng.standard_normal(), np.log(rng.random())
        cur, s2 = state.mu_x[l], state.delta_x[l]
        if M[l] > 0:
            b = state.beta[l]
            # y_t = mu (1 + b) - b x_t + noise with variance s2 (1 - b^2)
            prec = 1.0 / psi.v_x + M[l] / s2 + M[l] * (1.0 + b) / (s2 * (1.0 - b))
            lin = psi.m_x / psi.v_x + sx[l] / s2 + (sy[l] + b * sx[l]) / (s2 * (1.0 - b))
            mstar = lin / prec
            prop = cur + state.scale_mu_x[l] * eps
            log_ratio = -0.5 * prec * ((prop - mstar) ** 2 - (cur - mstar) ** 2)
        else:
            prop = psi.m_x + np.sqrt(psi.v_x) * eps
            log_ratio = 0.0
        newcol = log_w[l] + norm_logpdf(x, prop, s2)
        log_ratio -= cache.delta(l, newcol)
        accepted = log_u < log_ratio
        if accepted:
            state.mu_x[l] = prop
            cache.accept(l, newcol)
            _sync(state, l)
        if M[l] > 0:
            state.prop_mu_x[l] += 1
            state.acc_mu_x[l] += accepted
            _s._robbins_monro(state, state.scale_mu_x, l, accepted, state.prop_mu_x[l])
    return state


def update_sigma2_restricted(state: StationaryChainState, z, cache) -> StationaryChainState:
    """Random walk on log(sigma2); the scale appears in both kernels and in the weights."""
    x, y = _s._split(z)
    rng, psi, lab, L = state.rng, state.psi, state.labels, state.L
    M = np.bincount(lab, minlength=L)
    dx = x - state.mu_x[lab]
    ry = y - state.mu_x[lab] + state.beta[lab] * dx
    ssx = np.bincount(lab, weights=dx**2, minlength=L)
    ssy = np.bincount(lab, weights=ry**2 / (1.0 - state.beta[lab] ** 2), minlength=L)
    log_w = state.log_weights
    for l in range(L):
        eps, log_u = rng.standard_normal(), np.log(rng.random())
        cur = state.delta_x[l]
        if M[l] > 0:
            shape = psi.nu_x + M[l]
            rate = psi.s_x + 0.5 * (ssx[l] + ssy[l])
            eta = np.log(cur)
            eta_new = eta + state.scale_log_delta_x[l] * eps
            prop = np.exp(eta_new)
            log_ratio = -shape * (eta_new - eta) - rate * (1.0 / prop - 1.0 / cur)
        else:
            prop = 1.0 / rng.gamma(psi.nu_x, 1.0 / psi.s_x)
            log_ratio = 0.0
        if not (np.isfinite(prop) and prop > 0):
            accepted = False
        else:
            newcol = log_w[l] + norm_logpdf(x, state.mu_x[l], prop)
            log_ratio -= cache.delta(l, newcol)
            accepted = log_u < log_ratio
            if accepted:
                state.delta_x[l] = prop
                cache.accept(l, newcol)
                _sync(state, l)
        if M[l] > 0:
            state.prop_delta_x[l] += 1
            state.acc_delta_x[l] += accepted
            _s._robbins_monro(state, state.scale_log_delta_x, l, accepted,
                              state.prop_delta_x[l])
    return state


def update_hyperparams_restricted(state: StationaryChainState) -> StationaryChainState:
    """Conjugate (m, v, s); independence Metropolis for (theta, c).

    The truncated beta prior contributes Z(theta, c)^{-L}, with Z the normal
    mass on (-1, 1).  Proposing (theta, c) from their untruncated conjugate
    conditionals leaves the ratio of Z^{-L} terms as the acceptance ratio.
    """
    rng, cfg, psi, L = state.rng, state.config, state.psi, state.L
    mu, b = state.mu_x, state.beta
    m = _s._normal_mean_draw(rng, mu, psi.v_x, cfg.a_m_x, cfg.b_m_x)
    v = float(inv_gamma(rng, cfg.a_v_x + 0.5 * L, cfg.b_v_x + 0.5 * np.sum((mu - m) ** 2)))
    s = float(rng.gamma(cfg.a_s_x + L * psi.nu_x, 1.0 / (cfg.b_s_x + np.sum(1.0 / state.delta_x))))
    theta, c = psi.theta, psi.c
    log_z = truncated_normal_mass(theta, c)
    theta_new = _s._normal_mean_draw(rng, b, c, cfg.a_theta, cfg.b_theta)
    log_z_new = truncated_normal_mass(theta_new, c)
    if np.log(rng.random()) < -L * (log_z_new - log_z):
        theta, log_z = theta_new, log_z_new
    c_new = float(inv_gamma(rng, cfg.a_c + 0.5 * L, cfg.b_c + 0.5 * np.sum((b - theta) ** 2)))
    log_z_new = truncated_normal_mass(theta, c_new)
    if np.log(rng.random()) < -L * (log_z_new - log_z):
        c = c_new
    state.psi = Hyperparams(m, v, m, v, s, s, theta, c, psi.nu_x, psi.nu_x)
    return state


def sweep_stationary(state: StationaryChainState, z) -> StationaryChainState:
    x, _ = _s._split(z)
    _s.update_labels(state, z)
    update_beta_restricted(state, z)
    cache = _s._WeightCache(state, x)
    update_mu_restricted(state, z, cache)
    update_sigma2_restricted(state, z, cache)
    _s.update_sticks(state, z)
    _s.update_alpha(state)
    update_hyperparams_restricted(state)
    state.iteration += 1
    return state


def initial_state_stationary(z, config: HyperpriorConfig,
                             settings: _s.SamplerSettings) -> StationaryChainState:
    """The general starting point with mu_y tied to mu_x and beta = 0."""
    base = _s.initial_state(z, config, settings)
    h = base.psi
    psi = Hyperparams(h.m_x, h.v_x, h.m_x, h.v_x, h.s_x, h.s_x, h.theta, h.c, h.nu_x, h.nu_x)
    state = StationaryChainState(base.mu_x, base.mu_x, np.zeros(base.L), base.delta_x,
                                 base.delta_x, base.zeta, base.alpha, psi, base.labels, config,
                                 base.rng, base.scale_mu_x, base.scale_log_delta_x)
    x, y = _s._split(np.asarray(z, float))
    loglik = float(np.sum(stationary_log_transition_density(
        y, x, StationaryState(state.mu_x, state.delta_x, state.beta, state.zeta))))
    if not np.isfinite(loglik):
        raise _s.InitializationError(f"initial log-likelihood is not finite ({loglik})")
    return state


def fit_stationary(z, config: HyperpriorConfig, settings: _s.SamplerSettings, *,
                   resume: StationaryChainState | None = None, previous=None,
                   progress_every: int = 0) -> StationaryDraws:
    """Run the restricted sampler; same contract as :func:`dpmarkov.sampler.run`."""
    z = _s.validate_series(z)
    state = resume if resume is not None else initial_state_stationary(z, config, settings)
    return _s.drive(z, state, settings, sweep_stationary, StationaryDraws, previous=previous,
                    progress_every=progress_every)
