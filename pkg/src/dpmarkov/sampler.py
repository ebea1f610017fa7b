"""Blocked Gibbs / Metropolis sampler for the truncated DP mixture transition model.

One sweep updates, in order: configuration labels, (mu_y, delta_y, beta),
mu_x, delta_x, the stick variables zeta (slice sampler with truncated-beta
draws), the DP precision alpha and the G0 hyperparameters psi.

The update functions mutate the :class:`ChainState` they receive and return
it, so they can be chained or called on their own in tests.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np
from scipy.cluster.vq import kmeans2

from . import _kernels
from ._dists import EDGE, inv_gamma, truncated_beta_ppf
from .draws import PosteriorDraws
from .model import Hyperparams, MixtureState, log_stick_break, log_transition_density, norm_logpdf
from .priors import HyperpriorConfig

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
_TINY_LOG = float(np.log(np.finfo(float).tiny))


class InitializationError(RuntimeError):
    pass


class SliceSamplerError(RuntimeError):
    pass


@dataclass
class SamplerSettings:
    """Run length, thinning and proposal tuning.

    ``rw_scale_mu_x`` defaults to 0.1 * (data range / 4) and
    ``rw_scale_log_delta_x`` to 0.3 when left as ``None``.  With ``adapt``
    the random-walk scales follow a Robbins-Monro recursion toward 0.3
    acceptance during burn-in only.
    """

    n_iterations: int = 120_000
    burn_in: int = 20_000
    thin: int = 20
    rw_scale_mu_x: float | None = None
    rw_scale_log_delta_x: float | None = None
    adapt: bool = True
    seed: int = 0
    strict_slice: bool = True

    def __post_init__(self):
        if self.n_iterations < 1 or self.burn_in < 0 or self.burn_in >= self.n_iterations:
            raise ValueError("need 0 <= burn_in < n_iterations")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        for name in ("rw_scale_mu_x", "rw_scale_log_delta_x"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def n_retained(self) -> int:
        return (self.n_iterations - self.burn_in) // self.thin

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "SamplerSettings":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


class ChainState:
    """Complete sampler state.

    ``labels[t]`` is the 0-based component of observation pair
    ``(z[t], z[t+1])``.  The random generator travels with the state so a
    restored checkpoint continues bit-for-bit.
    """

    model = "general"
    _ARRAYS = ("mu_x", "mu_y", "beta", "delta_x", "delta_y", "zeta", "labels",
               "scale_mu_x", "scale_log_delta_x", "prop_mu_x", "acc_mu_x",
               "prop_delta_x", "acc_delta_x")

    def __init__(self, mu_x, mu_y, beta, delta_x, delta_y, zeta, alpha, psi: Hyperparams,
                 labels, config: HyperpriorConfig, rng: np.random.Generator,
                 scale_mu_x=1.0, scale_log_delta_x=0.3, iteration=0):
        self.mu_x = np.array(mu_x, dtype=float)
        self.mu_y = np.array(mu_y, dtype=float)
        self.beta = np.array(beta, dtype=float)
        self.delta_x = np.array(delta_x, dtype=float)
        self.delta_y = np.array(delta_y, dtype=float)
        self.zeta = np.array(zeta, dtype=float).reshape(-1)
        self.alpha = float(alpha)
        self.psi = psi
        self.labels = np.array(labels, dtype=np.int64)
        self.config = config
        self.rng = rng
        L = self.mu_x.size
        self.scale_mu_x = np.broadcast_to(np.asarray(scale_mu_x, float), (L,)).copy()
        self.scale_log_delta_x = np.broadcast_to(np.asarray(scale_log_delta_x, float), (L,)).copy()
        self.prop_mu_x = np.zeros(L, dtype=np.int64)
        self.acc_mu_x = np.zeros(L, dtype=np.int64)
        self.prop_delta_x = np.zeros(L, dtype=np.int64)
        self.acc_delta_x = np.zeros(L, dtype=np.int64)
        self.iteration = int(iteration)
        self.slice_violations = 0
        self.slice_checks = 0
        self._adapting = False
        self._strict_slice = True
        self.check_invariants()

    @property
    def L(self) -> int:
        return self.mu_x.size

    @property
    def log_weights(self) -> np.ndarray:
        return log_stick_break(self.zeta)

    def occupancy(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.L)

    def n_occupied(self) -> int:
        return int(np.count_nonzero(self.occupancy()))

    def check_invariants(self):
        L = self.L
        if self.zeta.size != L - 1:
            raise ValueError("zeta must have L - 1 entries")
        for name in ("mu_y", "beta", "delta_x", "delta_y"):
            if getattr(self, name).size != L:
                raise ValueError(f"{name} must have L entries")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= L):
            raise ValueError("labels out of range")

    def mixture(self) -> MixtureState:
        return MixtureState(self.mu_x, self.mu_y, self.beta, self.delta_x, self.delta_y,
                            zeta=self.zeta, alpha=self.alpha, psi=self.psi)

    def acceptance_rates(self) -> dict:
        with np.errstate(invalid="ignore", divide="ignore"):
            return {"mu_x": self.acc_mu_x / self.prop_mu_x,
                    "delta_x": self.acc_delta_x / self.prop_delta_x}

    def proposal_counts(self) -> dict:
        """Post-burn-in random-walk proposals per component (occupied sweeps only)."""
        return {"mu_x": self.prop_mu_x.copy(), "delta_x": self.prop_delta_x.copy()}

    def reset_acceptance(self):
        """Zero the proposal and acceptance counters (called when burn-in ends)."""
        for name in self._ARRAYS:
            if name.startswith(("prop_", "acc_")):
                getattr(self, name)[:] = 0

    def copy(self) -> "ChainState":
        return type(self).from_dict(self.to_dict())

    # -- checkpoint serialization --

    def to_dict(self) -> dict:
        d = {name: getattr(self, name).tolist() for name in self._ARRAYS}
        d.update(
            version=CHECKPOINT_VERSION,
            model=self.model,
            alpha=self.alpha,
            psi=self.psi.as_array().tolist(),
            config=self.config.to_dict(),
            rng=self.rng.bit_generator.state,
            iteration=self.iteration,
            slice_violations=self.slice_violations,
            slice_checks=self.slice_checks,
        )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChainState":
        if d.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('version')}")
        rng = np.random.Generator(np.random.PCG64())
        rng.bit_generator.state = d["rng"]
        state = cls(d["mu_x"], d["mu_y"], d["beta"], d["delta_x"], d["delta_y"], d["zeta"],
                    d["alpha"], Hyperparams.from_array(d["psi"]), d["labels"],
                    HyperpriorConfig.from_dict(d["config"]), rng,
                    d["scale_mu_x"], d["scale_log_delta_x"], d["iteration"])
        for name in cls._ARRAYS:
            setattr(state, name, np.array(d[name], dtype=getattr(state, name).dtype))
        state.slice_violations = int(d["slice_violations"])
        state.slice_checks = int(d["slice_checks"])
        return state


def _split(z):
    z = np.asarray(z, dtype=float)
    return z[:-1], z[1:]


# -- Gibbs updates with conjugate full conditionals --


def update_labels(state: ChainState, z) -> ChainState:
    """Draw every label from its discrete full conditional."""
    x, y = _split(z)
    xc = x[:, None]
    logits = (state.log_weights
              + norm_logpdf(y[:, None], state.mu_y - state.beta * (xc - state.mu_x), state.delta_y)
              + norm_logpdf(xc, state.mu_x, state.delta_x))
    prob = np.exp(logits - logits.max(axis=1, keepdims=True))
    cum = np.cumsum(prob, axis=1)
    u = state.rng.random(x.size) * cum[:, -1]
    state.labels = np.minimum((cum < u[:, None]).sum(axis=1), state.L - 1)
    return state


def _occupancy(state):
    return np.bincount(state.labels, minlength=state.L).astype(float)


def update_mu_y(state: ChainState, z) -> ChainState:
    x, y = _split(z)
    lab, L, psi = state.labels, state.L, state.psi
    M = _occupancy(state)
    s = np.bincount(lab, weights=y + state.beta[lab] * (x - state.mu_x[lab]), minlength=L)
    var = 1.0 / (1.0 / psi.v_y + M / state.delta_y)
    mean = var * (psi.m_y / psi.v_y + s / state.delta_y)
    state.mu_y = mean + np.sqrt(var) * state.rng.standard_normal(L)
    return state


def update_delta_y(state: ChainState, z) -> ChainState:
    x, y = _split(z)
    lab, L, psi = state.labels, state.L, state.psi
    M = _occupancy(state)
    resid = y - state.mu_y[lab] + state.beta[lab] * (x - state.mu_x[lab])
    ss = np.bincount(lab, weights=resid**2, minlength=L)
    state.delta_y = inv_gamma(state.rng, psi.nu_y + 0.5 * M, psi.s_y + 0.5 * ss)
    return state


def update_beta(state: ChainState, z) -> ChainState:
    x, y = _split(z)
    lab, L, psi = state.labels, state.L, state.psi
    dxm = x - state.mu_x[lab]
    a = np.bincount(lab, weights=dxm**2, minlength=L)
    b = np.bincount(lab, weights=dxm * (state.mu_y[lab] - y), minlength=L)
    cstar = 1.0 / (1.0 / psi.c + a / state.delta_y)
    mean = cstar * (psi.theta / psi.c + b / state.delta_y)
    state.beta = mean + np.sqrt(cstar) * state.rng.standard_normal(L)
    return state


# -- Metropolis updates for the weight-kernel parameters --


class _WeightCache:
    """log p_m + log N(x_t | mu_x_m, delta_x_m) with running row sums (log D_t)."""

    def __init__(self, state, x):
        self.logk = state.log_weights + norm_logpdf(x[:, None], state.mu_x, state.delta_x)
        N, L = self.logk.shape
        self.K = np.empty((N, L))
        self.r = np.empty(N)
        self.logD = np.empty(N)
        self.Ks = np.empty(N)
        _kernels.refresh(self.logk, self.K, self.r, self.logD, self.Ks)
        self.new_logD = np.empty(N)

    def delta(self, l, newcol):
        return _kernels.swap_column(self.logk, self.K, self.r, self.logD, self.Ks, l, newcol,
                                    self.new_logD)

    def accept(self, l, newcol):
        _kernels.accept_column(self.logk, self.K, self.r, self.logD, self.Ks, l, newcol,
                               self.new_logD)


def _robbins_monro(state, scales, l, accepted, count):
    # gain decays with the component's own proposal count, so late-occupied components still adapt
    if state._adapting:
        scales[l] *= np.exp(max(count, 1) ** -0.6 * (float(accepted) - 0.3))


def mu_x_conditional(state: ChainState, z, l: int):
    """(m*, v*) of the Gaussian factor in the mu_x full conditional of component ``l``.

    The full conditional is N(mu_x | m*, v*) times the reciprocal of the
    product of weight normalizers.
    """
    x, y = _split(z)
    psi = state.psi
    mask = state.labels == l
    M = mask.sum()
    b, dx, dy = state.beta[l], state.delta_x[l], state.delta_y[l]
    vstar = 1.0 / (1.0 / psi.v_x + M / dx + M * b**2 / dy)
    mstar = vstar * (psi.m_x / psi.v_x + x[mask].sum() / dx
                     + b * np.sum(b * x[mask] + y[mask] - state.mu_y[l]) / dy)
    return mstar, vstar


def update_mu_x(state: ChainState, z, cache: _WeightCache | None = None) -> ChainState:
    """Random-walk Metropolis for occupied components, G0 independence proposals for empty ones."""
    x, y = _split(z)
    rng, psi, lab, L = state.rng, state.psi, state.labels, state.L
    cache = cache or _WeightCache(state, x)
    M = np.bincount(lab, minlength=L)
    sx = np.bincount(lab, weights=x, minlength=L)
    sr = np.bincount(lab, weights=state.beta[lab] * x + y - state.mu_y[lab], minlength=L)
    log_w = state.log_weights
    for l in range(L):
        eps, log_u = rng.standard_normal(), np.log(rng.random())
        cur = state.mu_x[l]
        dx = state.delta_x[l]
        if M[l] > 0:
            b, dy = state.beta[l], state.delta_y[l]
            vstar = 1.0 / (1.0 / psi.v_x + M[l] / dx + M[l] * b**2 / dy)
            mstar = vstar * (psi.m_x / psi.v_x + sx[l] / dx + b * sr[l] / dy)
            prop = cur + state.scale_mu_x[l] * eps
            log_ratio = -0.5 * ((prop - mstar) ** 2 - (cur - mstar) ** 2) / vstar
        else:
            prop = psi.m_x + np.sqrt(psi.v_x) * eps
            log_ratio = 0.0
        newcol = log_w[l] + norm_logpdf(x, prop, dx)
        log_ratio -= cache.delta(l, newcol)
        accepted = log_u < log_ratio
        if accepted:
            state.mu_x[l] = prop
            cache.accept(l, newcol)
        if M[l] > 0:
            state.prop_mu_x[l] += 1
            state.acc_mu_x[l] += accepted
            _robbins_monro(state, state.scale_mu_x, l, accepted, state.prop_mu_x[l])
    return state


def update_delta_x(state: ChainState, z, cache: _WeightCache | None = None) -> ChainState:
    """Random walk on log(delta_x) for occupied components, IG(nu_x, s_x) proposals for empty ones."""
    x, _ = _split(z)
    rng, psi, lab, L = state.rng, state.psi, state.labels, state.L
    cache = cache or _WeightCache(state, x)
    M = np.bincount(lab, minlength=L)
    ss = np.bincount(lab, weights=(x - state.mu_x[lab]) ** 2, minlength=L)
    log_w = state.log_weights
    for l in range(L):
        eps, log_u = rng.standard_normal(), np.log(rng.random())
        cur = state.delta_x[l]
        if M[l] > 0:
            shape = psi.nu_x + 0.5 * M[l]
            rate = psi.s_x + 0.5 * ss[l]
            eta = np.log(cur)
            eta_new = eta + state.scale_log_delta_x[l] * eps
            prop = np.exp(eta_new)
            # IG log density in delta plus the log-scale Jacobian: -shape*eta - rate*exp(-eta)
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
        if M[l] > 0:
            state.prop_delta_x[l] += 1
            state.acc_delta_x[l] += accepted
            _robbins_monro(state, state.scale_log_delta_x, l, accepted,
                           state.prop_delta_x[l])
    return state


# -- stick variables --


def update_sticks(state: ChainState, z, kernel_logpdf=None) -> ChainState:
    """Slice-sample each zeta_l from its full conditional, one at a time.

    ``kernel_logpdf`` overrides the weight-kernel ordinates
    ``log N(z_{t-1} | mu_x_l, delta_x_l)`` (shape ``(n-1, L)``); the
    stationary variant passes its own.
    """
    L = state.L
    if L == 1:
        return state
    x, _ = _split(z)
    rng = state.rng
    logc = kernel_logpdf if kernel_logpdf is not None else norm_logpdf(
        x[:, None], state.mu_x, state.delta_x)
    c = np.exp(logc - logc.max(axis=1, keepdims=True))
    M = np.bincount(state.labels, minlength=L)
    tail = np.concatenate((np.cumsum(M[::-1])[::-1][1:], [0]))  # sum_{r>l} M_r
    N = x.size
    w0, w1, dcur = np.empty(N), np.empty(N), np.empty(N)
    logp = _log_stick_break_fast(state.zeta)
    for l in range(L - 1):
        v = 1.0 - rng.random(N)
        lo, hi, bad = _kernels.stick_interval(c, logp, state.zeta, l, v, w0, w1, dcur)
        a, b = state.alpha + tail[l], M[l] + 1.0
        lo_c, hi_c = max(lo, EDGE), min(hi, 1.0 - EDGE)
        znew = truncated_beta_ppf(a, b, lo_c, hi_c, rng.random())
        znew = min(max(znew, lo_c), hi_c)
        viol = bad + _kernels.slice_violations(w0, w1, dcur, v, znew)
        state.slice_checks += 1
        if viol:
            state.slice_violations += int(viol)
            if getattr(state, "_strict_slice", True):
                raise SliceSamplerError(
                    f"slice constraint violated for zeta_{l + 1} at iteration {state.iteration}")
        state.zeta[l] = znew
        logp = _log_stick_break_fast(state.zeta)
    return state


def _log_stick_break_fast(zeta):
    out = np.empty(zeta.size + 1)
    out[0] = 0.0
    np.cumsum(np.log(zeta), out=out[1:])
    out[:-1] += np.log1p(-zeta)
    return out


def update_alpha(state: ChainState) -> ChainState:
    """Gamma(a_alpha + L - 1, b_alpha - log p_L) conjugate draw."""
    cfg = state.config
    log_pL = max(float(np.sum(np.log(state.zeta))), _TINY_LOG)
    state.alpha = state.rng.gamma(cfg.a_alpha + state.L - 1, 1.0 / (cfg.b_alpha - log_pL))
    return state


def _normal_mean_draw(rng, values, var, prior_mean, prior_var):
    prec = 1.0 / prior_var + values.size / var
    mean = (prior_mean / prior_var + values.sum() / var) / prec
    return mean + rng.standard_normal() / np.sqrt(prec)


def update_hyperparams(state: ChainState) -> ChainState:
    """Conjugate draws of psi given all L components (occupied or not)."""
    rng, cfg, psi, L = state.rng, state.config, state.psi, state.L
    m_x = _normal_mean_draw(rng, state.mu_x, psi.v_x, cfg.a_m_x, cfg.b_m_x)
    v_x = inv_gamma(rng, cfg.a_v_x + 0.5 * L, cfg.b_v_x + 0.5 * np.sum((state.mu_x - m_x) ** 2))
    m_y = _normal_mean_draw(rng, state.mu_y, psi.v_y, cfg.a_m_y, cfg.b_m_y)
    v_y = inv_gamma(rng, cfg.a_v_y + 0.5 * L, cfg.b_v_y + 0.5 * np.sum((state.mu_y - m_y) ** 2))
    s_x = rng.gamma(cfg.a_s_x + L * psi.nu_x, 1.0 / (cfg.b_s_x + np.sum(1.0 / state.delta_x)))
    s_y = rng.gamma(cfg.a_s_y + L * psi.nu_y, 1.0 / (cfg.b_s_y + np.sum(1.0 / state.delta_y)))
    theta = _normal_mean_draw(rng, state.beta, psi.c, cfg.a_theta, cfg.b_theta)
    c = inv_gamma(rng, cfg.a_c + 0.5 * L, cfg.b_c + 0.5 * np.sum((state.beta - theta) ** 2))
    state.psi = Hyperparams(m_x, float(v_x), m_y, float(v_y), float(s_x), float(s_y), theta,
                            float(c), psi.nu_x, psi.nu_y)
    return state


def sweep(state: ChainState, z) -> ChainState:
    x, _ = _split(z)
    update_labels(state, z)
    update_mu_y(state, z)
    update_delta_y(state, z)
    update_beta(state, z)
    cache = _WeightCache(state, x)
    update_mu_x(state, z, cache)
    update_delta_x(state, z, cache)
    update_sticks(state, z)
    update_alpha(state)
    update_hyperparams(state)
    state.iteration += 1
    return state


# -- initialization and driver --


def validate_series(z, min_length=3) -> np.ndarray:
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size < min_length:
        raise ValueError(f"series needs at least {min_length} observations, got {z.size}")
    if not np.all(np.isfinite(z)):
        bad = np.flatnonzero(~np.isfinite(z))
        raise ValueError(f"series has non-finite values at positions {bad[:10].tolist()}")
    return z


def _kmeans_groups(x, y, k, rng):
    pts = np.column_stack([x, y])
    sd = pts.std(axis=0)
    sd[sd == 0] = 1.0
    _, lab = kmeans2(pts / sd, k, minit="++", seed=rng)
    groups = [g for g in np.unique(lab)]
    # deterministic ordering by group size, largest first
    groups.sort(key=lambda g: (-np.sum(lab == g), np.mean(x[lab == g])))
    return [np.flatnonzero(lab == g) for g in groups]


def initial_state(z, config: HyperpriorConfig, settings: SamplerSettings) -> ChainState:
    """Start from a k-means split of the (z_{t-1}, z_t) pairs into min(5, L) groups."""
    z = validate_series(z)
    x, y = _split(z)
    rng = np.random.default_rng(settings.seed)
    L = config.L
    psi = config.prior_mean_hyperparams()
    floor = 1e-6 * max(np.var(z), 1e-300)
    groups = _kmeans_groups(x, y, min(5, L, x.size), rng)
    mu_x = psi.m_x + np.sqrt(psi.v_x) * rng.standard_normal(L)
    mu_y = psi.m_y + np.sqrt(psi.v_y) * rng.standard_normal(L)
    delta_x = inv_gamma(rng, psi.nu_x, psi.s_x, size=L)
    delta_y = inv_gamma(rng, psi.nu_y, psi.s_y, size=L)
    beta = np.zeros(L)
    labels = np.zeros(x.size, dtype=np.int64)
    for g, idx in enumerate(groups):
        mu_x[g], mu_y[g] = x[idx].mean(), y[idx].mean()
        delta_x[g] = max(x[idx].var(), floor)
        delta_y[g] = max(y[idx].var(), floor)
        labels[idx] = g
    alpha = config.a_alpha / config.b_alpha
    zeta = np.full(L - 1, alpha / (alpha + 1.0))
    span = float(np.ptp(z)) or 1.0
    scale_mu = settings.rw_scale_mu_x or 0.1 * span / 4.0
    scale_ld = settings.rw_scale_log_delta_x or 0.3
    state = ChainState(mu_x, mu_y, beta, delta_x, delta_y, zeta, alpha, psi, labels, config, rng,
                       scale_mu, scale_ld)
    loglik = float(np.sum(log_transition_density(y, x, state.mixture())))
    if not np.isfinite(loglik):
        raise InitializationError(
            f"initial log-likelihood is not finite ({loglik}); check the data scale and priors")
    return state


def run(z, config: HyperpriorConfig, settings: SamplerSettings, *, resume: ChainState | None = None,
        previous: PosteriorDraws | None = None, progress_every: int = 0) -> PosteriorDraws:
    """Run the chain and return the thinned post-burn-in draws.

    With ``resume`` the chain continues from a checkpointed state up to
    ``settings.n_iterations``; ``previous`` holds the draws retained before
    the checkpoint and is prepended to the result.  The final state is
    available as ``draws.extras["state"]`` and the per-iteration occupied
    component counts as ``draws.extras["occupied"]``.
    """
    z = validate_series(z)
    state = resume if resume is not None else initial_state(z, config, settings)
    return drive(z, state, settings, sweep, PosteriorDraws, previous=previous,
                 progress_every=progress_every)


def drive(z, state, settings: SamplerSettings, sweep_fn, draws_cls, *, previous=None,
          progress_every: int = 0):
    """Shared chain loop: sweep to ``settings.n_iterations`` and collect the retained draws."""
    keep, occupied = advance(z, state, settings, sweep_fn, settings.n_iterations, progress_every)
    prev_occ = previous.extras.get("occupied") if previous is not None else None
    draws = assemble(z, state, settings, draws_cls, keep, occupied, previous, prev_occ)
    if draws is None:
        raise ValueError("no draws retained; check burn_in, thin and n_iterations")
    return draws


def advance(z, state, settings: SamplerSettings, sweep_fn, stop: int, progress_every: int = 0):
    """Sweep until ``state.iteration == stop``.

    Returns the retained ``(iteration, snapshot)`` pairs and the occupied
    component count after every sweep.
    """
    state._strict_slice = settings.strict_slice
    n_left = stop - state.iteration
    if n_left < 0:
        raise ValueError("checkpoint is already past n_iterations")
    keep = []
    occupied = np.empty(n_left, dtype=np.int32)
    for k in range(n_left):
        if state.iteration == settings.burn_in and settings.burn_in > 0:
            state.reset_acceptance()
        state._adapting = settings.adapt and state.iteration < settings.burn_in
        sweep_fn(state, z)
        occupied[k] = state.n_occupied()
        it = state.iteration
        if it > settings.burn_in and (it - settings.burn_in) % settings.thin == 0:
            keep.append((it, state.mixture()))
        if progress_every and it % progress_every == 0:
            logger.info("iteration %d: %d occupied components", it, occupied[k])
    if hasattr(state, "labels") and occupied.size and occupied.max() >= state.L:
        logger.warning("occupied components reached the truncation level L=%d", state.L)
    return keep, occupied


def assemble(z, state, settings: SamplerSettings, draws_cls, keep, occupied, previous=None,
             occupied_before=None):
    """Combine earlier draws with newly retained snapshots; ``None`` when there are none."""
    meta = {
        "model": draws_cls.model, "n": int(z.size), "L": int(state.L), "seed": settings.seed,
        "settings": settings.to_dict(), "series": series_summary(z),
    }
    parts = []
    if previous is not None:
        parts.append(previous)
    if keep:
        d = draws_cls.from_states([s for _, s in keep], meta)
        d.iterations = np.array([i for i, _ in keep], dtype=np.int64)
        parts.append(d)
    if not parts:
        return None
    draws = parts[0] if len(parts) == 1 else draws_cls.concatenate(parts)
    draws.meta = meta
    occ = occupied if occupied_before is None else np.concatenate([occupied_before, occupied])
    draws.extras = {
        "state": state,
        "occupied": occ,
        "acceptance": state.acceptance_rates(),
        "proposals": state.proposal_counts(),
        "slice_violations": state.slice_violations,
        "slice_checks": state.slice_checks,
    }
    return draws


def series_summary(z) -> dict:
    import hashlib

    z = np.asarray(z, dtype=float)
    return {
        "n": int(z.size), "first": float(z[0]), "last": float(z[-1]),
        "min": float(z.min()), "max": float(z.max()),
        "sha256": hashlib.sha256(np.ascontiguousarray(z).tobytes()).hexdigest(),
    }


# -- checkpoints --


class Checkpoint(NamedTuple):
    state: object
    draws: object
    settings: SamplerSettings | None
    series: str | None
    occupied: np.ndarray


def save_checkpoint(path, state, draws=None, settings: SamplerSettings | None = None,
                    series: str | None = None, occupied=None):
    """Write the chain state and draws-so-far as one JSON document (exact float round trip).

    ``series`` is a fingerprint of the data, checked on resume; ``occupied``
    is the occupied-component trace so far (taken from ``draws`` if omitted).
    """
    if occupied is None and draws is not None:
        occupied = draws.extras.get("occupied", [])
    doc = {"model": state.model, "state": state.to_dict(),
           "settings": settings.to_dict() if settings is not None else None,
           "series": series, "occupied": np.asarray(occupied if occupied is not None else [],
                                                    dtype=int).tolist()}
    if draws is not None:
        doc["draws"] = {"columns": draws.to_matrix().tolist(), "meta": draws._header_meta()}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def _checkpoint_classes(model):
    if model == "general":
        return ChainState, PosteriorDraws
    if model == "stationary":
        from .variants.stationary import StationaryChainState, StationaryDraws
        return StationaryChainState, StationaryDraws
    if model == "tar":
        from .variants.tar import TarChainState, TarDraws
        return TarChainState, TarDraws
    raise ValueError(f"unknown model tag {model!r} in checkpoint")


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint; the model tag selects the state and draws classes."""
    with open(path) as fh:
        doc = json.load(fh)
    state_cls, draws_cls = _checkpoint_classes(doc.get("model", "general"))
    state = state_cls.from_dict(doc["state"])
    occupied = np.array(doc.get("occupied", []), dtype=np.int32)
    draws = None
    if "draws" in doc:
        d = doc["draws"]
        draws = draws_cls._from_matrix(np.array(d["columns"], dtype=float), d["meta"])
        draws.extras = {"occupied": occupied}
    settings = SamplerSettings.from_dict(doc["settings"]) if doc.get("settings") else None
    return Checkpoint(state, draws, settings, doc.get("series"), occupied)
