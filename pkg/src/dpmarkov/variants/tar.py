"""Two-regime Gaussian threshold autoregression with a data-based prior.

z_t | z_{t-1} ~ N(phi0_k + phi1_k z_{t-1}, tau_k), with regime k = 1 when
z_{t-1} <= r and k = 2 otherwise.  (phi0_k, phi1_k) and tau_k have
conjugate normal and inverse-gamma full conditionals; the threshold is
updated by random-walk Metropolis under a uniform prior.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .._dists import inv_gamma
from ..draws import FORMAT_VERSION, read_columns, write_columns
from ..model import norm_logpdf
from .. import sampler as _s

logger = logging.getLogger(__name__)

__all__ = ["TarParams", "TarPriors", "TarDraws", "TarChainState", "fit_tar", "tar_log_density"]

_MIN_REGIME = 2


@dataclass(frozen=True)
class TarParams:
    phi0_1: float
    phi1_1: float
    tau_1: float
    phi0_2: float
    phi1_2: float
    tau_2: float
    r: float

    def __post_init__(self):
        if not np.all(np.isfinite([getattr(self, f.name) for f in fields(self)])):
            raise ValueError("TAR parameters must be finite")
        if self.tau_1 <= 0 or self.tau_2 <= 0:
            raise ValueError("regime variances must be positive")

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.names()])


def tar_log_density(z, z_prev, params: TarParams):
    z_prev = np.asarray(z_prev, float)
    upper = z_prev > params.r
    mean = np.where(upper, params.phi0_2 + params.phi1_2 * z_prev,
                    params.phi0_1 + params.phi1_1 * z_prev)
    var = np.where(upper, params.tau_2, params.tau_1)
    return norm_logpdf(np.asarray(z, float), mean, var)


@dataclass(frozen=True)
class TarPriors:
    """phi0_k ~ N(intercept_mean, intercept_var), phi1_k ~ N(slope_mean, slope_var),
    tau_k ~ IG(tau_shape, tau_rate), r ~ U(r_lo, r_hi)."""

    intercept_mean: float
    intercept_var: float
    tau_rate: float
    r_lo: float
    r_hi: float
    slope_mean: float = 0.0
    slope_var: float = 2.0
    tau_shape: float = 2.0

    def __post_init__(self):
        for name in ("intercept_var", "slope_var", "tau_shape", "tau_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.r_lo < self.r_hi:
            raise ValueError("threshold prior needs r_lo < r_hi")

    @classmethod
    def from_series(cls, z, tau_shape: float = 2.0, slope_var: float = 2.0,
                    quantiles=(0.1, 0.9)) -> "TarPriors":
        """Data-based defaults.

        Intercepts centered at the series midrange with the series variance,
        slopes N(0, 2), and IG(tau_shape, rate) variances whose mean equals
        the residual mean square of a least-squares AR(1) fit.  The threshold
        is uniform between the given quantiles of the conditioning values.
        """
        z = np.asarray(z, float)
        x, y = z[:-1], z[1:]
        X = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        mse = float(np.sum((y - X @ coef) ** 2) / max(x.size - 2, 1))
        lo, hi = np.quantile(x, quantiles)
        return cls(intercept_mean=0.5 * (z.min() + z.max()), intercept_var=float(np.var(z)),
                   tau_rate=mse * (tau_shape - 1.0), r_lo=float(lo), r_hi=float(hi),
                   slope_var=slope_var, tau_shape=tau_shape)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "TarPriors":
        return cls(**d)


class TarChainState:
    model = "tar"

    def __init__(self, phi, tau, r, priors: TarPriors, rng: np.random.Generator,
                 scale_r: float = 1.0, iteration: int = 0):
        self.phi = np.array(phi, dtype=float).reshape(2, 2)  # rows: regimes; cols: phi0, phi1
        self.tau = np.array(tau, dtype=float).reshape(2)
        self.r = float(r)
        self.priors = priors
        self.rng = rng
        self.scale_r = float(scale_r)
        self.iteration = int(iteration)
        self.prop_r = 0
        self.acc_r = 0
        self.L = 2
        self._adapting = False
        self._strict_slice = True
        self.slice_violations = 0
        self.slice_checks = 0

    def params(self) -> TarParams:
        return TarParams(self.phi[0, 0], self.phi[0, 1], self.tau[0], self.phi[1, 0],
                         self.phi[1, 1], self.tau[1], self.r)

    # the shared driver calls these
    mixture = params

    def n_occupied(self) -> int:
        return 2

    def acceptance_rates(self) -> dict:
        return {"r": self.acc_r / self.prop_r if self.prop_r else float("nan")}

    def proposal_counts(self) -> dict:
        return {"r": self.prop_r}

    def reset_acceptance(self):
        self.prop_r = self.acc_r = 0

    def to_dict(self) -> dict:
        return {"version": _s.CHECKPOINT_VERSION, "model": self.model, "phi": self.phi.tolist(),
                "tau": self.tau.tolist(), "r": self.r, "priors": self.priors.to_dict(),
                "rng": self.rng.bit_generator.state, "scale_r": self.scale_r,
                "iteration": self.iteration, "prop_r": self.prop_r, "acc_r": self.acc_r}

    @classmethod
    def from_dict(cls, d) -> "TarChainState":
        rng = np.random.Generator(np.random.PCG64())
        rng.bit_generator.state = d["rng"]
        state = cls(d["phi"], d["tau"], d["r"], TarPriors.from_dict(d["priors"]), rng,
                    d["scale_r"], d["iteration"])
        state.prop_r, state.acc_r = int(d["prop_r"]), int(d["acc_r"])
        return state


def _regression_draw(rng, x, y, tau, pr: TarPriors):
    """Conjugate draw of (phi0, phi1) given regime data and variance ``tau``."""
    prior_prec = np.diag([1.0 / pr.intercept_var, 1.0 / pr.slope_var])
    prior_mean = np.array([pr.intercept_mean, pr.slope_mean])
    X = np.column_stack([np.ones_like(x), x])
    prec = prior_prec + X.T @ X / tau
    chol = np.linalg.cholesky(prec)
    rhs = prior_prec @ prior_mean + X.T @ y / tau
    mean = np.linalg.solve(prec, rhs)
    # mean + chol^{-T} eps has covariance prec^{-1}
    return mean + np.linalg.solve(chol.T, rng.standard_normal(2))


def _loglik(x, y, phi, tau, r):
    upper = x > r
    k = upper.astype(int)
    return float(np.sum(norm_logpdf(y, phi[k, 0] + phi[k, 1] * x, tau[k])))


def sweep_tar(state: TarChainState, z) -> TarChainState:
    x, y = _s._split(z)
    rng, pr = state.rng, state.priors
    upper = x > state.r
    for k, mask in enumerate((~upper, upper)):
        xs, ys = x[mask], y[mask]
        state.phi[k] = _regression_draw(rng, xs, ys, state.tau[k], pr)
        resid = ys - state.phi[k, 0] - state.phi[k, 1] * xs
        state.tau[k] = inv_gamma(rng, pr.tau_shape + 0.5 * xs.size,
                                 pr.tau_rate + 0.5 * float(resid @ resid))
    eps, log_u = rng.standard_normal(), np.log(rng.random())
    prop = state.r + state.scale_r * eps
    n_up = int(np.sum(x > prop))
    accepted = False
    if pr.r_lo <= prop <= pr.r_hi and min(n_up, x.size - n_up) >= _MIN_REGIME:
        log_ratio = _loglik(x, y, state.phi, state.tau, prop) - _loglik(x, y, state.phi,
                                                                         state.tau, state.r)
        accepted = bool(log_u < log_ratio)
        if accepted:
            state.r = float(prop)
    state.prop_r += 1
    state.acc_r += accepted
    if state._adapting:
        state.scale_r *= np.exp(state.prop_r ** -0.6 * (float(accepted) - 0.3))
    state.iteration += 1
    return state


def initial_state_tar(z, priors: TarPriors, settings: _s.SamplerSettings) -> TarChainState:
    z = np.asarray(z, float)
    x, y = _s._split(z)
    rng = np.random.default_rng(settings.seed)
    r = float(np.clip(np.median(x), priors.r_lo, priors.r_hi))
    phi = np.zeros((2, 2))
    tau = np.ones(2)
    upper = x > r
    for k, mask in enumerate((~upper, upper)):
        X = np.column_stack([np.ones(mask.sum()), x[mask]])
        if mask.sum() >= _MIN_REGIME:
            phi[k], *_ = np.linalg.lstsq(X, y[mask], rcond=None)
            tau[k] = max(float(np.var(y[mask] - X @ phi[k])), 1e-6 * np.var(z))
        else:
            phi[k] = [priors.intercept_mean, priors.slope_mean]
            tau[k] = priors.tau_rate / (priors.tau_shape - 1.0) if priors.tau_shape > 1 else 1.0
    return TarChainState(phi, tau, r, priors, rng, 0.1 * (priors.r_hi - priors.r_lo))


def fit_tar(z, priors: TarPriors | None, settings: _s.SamplerSettings, *,
            resume: TarChainState | None = None, previous=None,
            progress_every: int = 0) -> "TarDraws":
    """Gibbs sampling for the regression blocks, Metropolis for the threshold."""
    z = _s.validate_series(z, min_length=2 * _MIN_REGIME + 1)
    priors = priors or TarPriors.from_series(z)
    state = resume if resume is not None else initial_state_tar(z, priors, settings)
    return _s.drive(z, state, settings, sweep_tar, TarDraws, previous=previous,
                    progress_every=progress_every)


@dataclass(eq=False)
class TarDraws:
    """Retained TAR draws; ``params`` has the columns of :class:`TarParams`."""

    params: np.ndarray
    iterations: np.ndarray
    meta: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict, repr=False)

    model = "tar"
    L = 2

    def __post_init__(self):
        self.params = np.atleast_2d(np.asarray(self.params, dtype=float))
        self.iterations = np.asarray(self.iterations, dtype=np.int64).reshape(-1)
        if self.params.shape[0] == 0:
            raise ValueError("posterior draws are empty")
        if self.params.shape[1] != 7:
            raise ValueError("TAR draws need 7 parameter columns")
        self.meta.setdefault("model", self.model)

    def __len__(self) -> int:
        return self.params.shape[0]

    def __getitem__(self, i) -> TarParams:
        return TarParams(*self.params[i])

    def column(self, name: str) -> np.ndarray:
        return self.params[:, TarParams.names().index(name)]

    @property
    def slopes(self) -> np.ndarray:
        return self.params[:, [1, 4]]

    @property
    def threshold(self) -> np.ndarray:
        return self.params[:, 6]

    def _regime_terms(self, z_prev):
        """Per-draw mean and variance at ``z_prev`` of shape (S, ...)."""
        p = self.params.reshape(self.params.shape + (1,) * np.ndim(z_prev))
        xp = np.asarray(z_prev, float)[None]
        upper = xp > p[:, 6]
        mean = np.where(upper, p[:, 3] + p[:, 4] * xp, p[:, 0] + p[:, 1] * xp)
        var = np.where(upper, p[:, 5], p[:, 2])
        return mean, var

    def log_density_matrix(self, z, z_prev):
        z, z_prev = np.broadcast_arrays(np.asarray(z, float), np.asarray(z_prev, float))
        mean, var = self._regime_terms(z_prev)
        return norm_logpdf(z[None], mean, var)

    def log_density_rows(self, z, z_prev):
        z = np.asarray(z, float).reshape(-1)
        z_prev = np.asarray(z_prev, float)
        p = self.params[:, None, :]
        upper = z_prev > p[..., 6]
        mean = np.where(upper, p[..., 3] + p[..., 4] * z_prev, p[..., 0] + p[..., 1] * z_prev)
        var = np.where(upper, p[..., 5], p[..., 2])
        return norm_logpdf(z[None, None, :], mean[..., None], var[..., None])

    def expectation_matrix(self, z_prev):
        return self._regime_terms(z_prev)[0]

    def sample_next(self, z_prev, rng):
        z_prev = np.asarray(z_prev, float)
        p = self.params[:, None, :]
        upper = z_prev > p[..., 6]
        mean = np.where(upper, p[..., 3] + p[..., 4] * z_prev, p[..., 0] + p[..., 1] * z_prev)
        var = np.where(upper, p[..., 5], p[..., 2])
        return mean + np.sqrt(var) * rng.standard_normal(z_prev.shape)

    @classmethod
    def from_states(cls, states, meta=None) -> "TarDraws":
        states = list(states)
        return cls(np.array([s.as_array() for s in states]), np.arange(len(states)), meta or {})

    @classmethod
    def concatenate(cls, parts) -> "TarDraws":
        parts = list(parts)
        return cls(np.concatenate([p.params for p in parts]),
                   np.concatenate([p.iterations for p in parts]), dict(parts[0].meta))

    def column_names(self) -> list[str]:
        return ["iteration"] + TarParams.names()

    def to_matrix(self) -> np.ndarray:
        return np.column_stack([self.iterations, self.params])

    def _header_meta(self) -> dict:
        meta = {k: v for k, v in self.meta.items() if k != "occupied"}
        meta.update(format_version=FORMAT_VERSION, model=self.model)
        return meta

    def to_text(self) -> str:
        return write_columns(self.column_names(), self.to_matrix(), self._header_meta())

    @classmethod
    def _from_matrix(cls, mat, meta):
        return cls(mat[:, 1:], mat[:, 0].astype(np.int64), meta)

    @classmethod
    def from_text(cls, text: str) -> "TarDraws":
        _, mat, meta = read_columns(text)
        return cls._from_matrix(mat, meta)
