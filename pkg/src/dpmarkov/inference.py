"""Posterior summaries computed from retained draws.

All functions accept any draws object exposing ``log_density_matrix``,
``expectation_matrix``, ``sample_next`` and ``log_density_rows`` (the
general mixture, its stationary restriction and the TAR baseline all do).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import logsumexp

from .draws import PosteriorDraws, write_columns

__all__ = [
    "PosteriorDraws", "DensityGrid", "ExpectationCurve", "MultiStepForecast", "PPOResult",
    "default_grid", "transition_grid", "forecast_density", "expectation_curve",
    "multi_step_forecast", "ppo", "ppo_from_loglik",
]


def _check_draws(draws):
    if draws is None or len(draws) == 0:
        raise ValueError("posterior draws are empty")


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("grid is empty")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted")
    return grid


def _band(values, level):
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    tail = 0.5 * (1.0 - level)
    lower, upper = np.quantile(values, [tail, 1.0 - tail], axis=0)
    mean = values.mean(axis=0)
    # a band from a handful of draws can miss the mean; keep lower <= mean <= upper
    return mean, np.minimum(lower, mean), np.maximum(upper, mean)


@dataclass(frozen=True)
class _GridSummary:
    z_values: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float = 0.95
    info: dict = field(default_factory=dict)

    _x_name = "z"

    def to_text(self) -> str:
        names = [self._x_name, "mean", "lower", "upper"]
        return write_columns(names, np.column_stack([self.z_values, self.mean, self.lower,
                                                     self.upper]), {"level": self.level, **self.info})


@dataclass(frozen=True)
class DensityGrid(_GridSummary):
    """Pointwise posterior mean and equal-tailed credible band of a density."""

    def integral(self) -> float:
        return float(trapezoid(self.mean, self.z_values))

    def modes(self, min_prominence: float = 0.0) -> np.ndarray:
        """Grid locations of local maxima of the mean curve."""
        m = self.mean
        idx = np.flatnonzero((m[1:-1] > m[:-2]) & (m[1:-1] >= m[2:])) + 1
        if min_prominence > 0:
            idx = np.array([i for i in idx if m[i] - min(m[:i].min(), m[i + 1:].min())
                            >= min_prominence * m.max()], dtype=int)
        return self.z_values[idx]

    def primary_mode(self) -> float:
        return float(self.z_values[np.argmax(self.mean)])


@dataclass(frozen=True)
class ExpectationCurve(_GridSummary):
    """Posterior mean and band of E(Z_t | Z_{t-1} = z_prev) over a z_prev grid."""

    _x_name = "z_prev"


def default_grid(draws=None, n: int = 512, bounds=None, extend: float = 0.25) -> np.ndarray:
    """``n`` points over the data range widened by ``extend`` of the range on each side."""
    if bounds is None:
        series = getattr(draws, "meta", {}).get("series")
        if series is None:
            raise ValueError("no series summary in draws; pass bounds explicitly")
        bounds = (series["min"], series["max"])
    lo, hi = map(float, bounds)
    span = hi - lo if hi > lo else 1.0
    return np.linspace(lo - extend * span, hi + extend * span, n)


def transition_grid(draws, z_prev: float, grid=None, level: float = 0.95) -> DensityGrid:
    """Posterior summary of f(z | z_prev) on ``grid``."""
    _check_draws(draws)
    grid = _check_grid(default_grid(draws) if grid is None else grid)
    dens = np.exp(draws.log_density_matrix(grid, float(z_prev)))
    mean, lo, hi = _band(dens, level)
    return DensityGrid(grid, mean, lo, hi, level, {"z_prev": float(z_prev), "kind": "transition"})


def forecast_density(draws, z_n: float | None = None, grid=None, level: float = 0.95) -> DensityGrid:
    """One-step-ahead forecast; the mean curve is the posterior predictive density."""
    if z_n is None:
        z_n = draws.meta["series"]["last"]
    out = transition_grid(draws, z_n, grid, level)
    return DensityGrid(out.z_values, out.mean, out.lower, out.upper, level,
                       {"z_prev": float(z_n), "kind": "forecast"})


def expectation_curve(draws, grid=None, level: float = 0.95) -> ExpectationCurve:
    _check_draws(draws)
    grid = _check_grid(default_grid(draws) if grid is None else grid)
    vals = draws.expectation_matrix(grid)
    mean, lo, hi = _band(vals, level)
    return ExpectationCurve(grid, mean, lo, hi, level, {"kind": "expectation"})


@dataclass(frozen=True)
class MultiStepForecast:
    """Simulated paths and per-horizon predictive densities.

    ``paths`` has shape ``(S, P, h)``; ``densities[k]`` summarizes the
    density of z_{n+k+1}, where each draw's curve averages that draw's
    transition density over its simulated values of z_{n+k}.
    """

    paths: np.ndarray
    densities: list

    @property
    def horizon(self) -> int:
        return self.paths.shape[-1]

    def samples(self, k: int) -> np.ndarray:
        """Pooled draws of z_{n+k}, k = 1..h."""
        return self.paths[:, :, k - 1].reshape(-1)

    def samples_to_text(self) -> str:
        S, P, h = self.paths.shape
        names = ["draw", "path"] + [f"h{k + 1}" for k in range(h)]
        ids = np.array([(s, p) for s in range(S) for p in range(P)], dtype=float)
        return write_columns(names, np.column_stack([ids, self.paths.reshape(S * P, h)]), {})


def multi_step_forecast(draws, z_n: float | None = None, horizon: int = 1,
                        paths_per_draw: int = 10, grid=None, level: float = 0.95,
                        seed: int = 0) -> MultiStepForecast:
    _check_draws(draws)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if paths_per_draw < 1:
        raise ValueError("paths_per_draw must be at least 1")
    if z_n is None:
        z_n = draws.meta["series"]["last"]
    grid = _check_grid(default_grid(draws) if grid is None else grid)
    rng = np.random.default_rng(seed)
    S = len(draws)
    prev = np.full((S, paths_per_draw), float(z_n))
    paths = np.empty((S, paths_per_draw, horizon))
    densities = []
    for k in range(horizon):
        per_draw = np.exp(draws.log_density_rows(grid, prev)).mean(axis=1)
        mean, lo, hi = _band(per_draw, level)
        densities.append(DensityGrid(grid, mean, lo, hi, level,
                                     {"kind": "multistep", "horizon": k + 1, "z_n": float(z_n)}))
        prev = draws.sample_next(prev, rng)
        paths[:, :, k] = prev
    return MultiStepForecast(paths, densities)


@dataclass(frozen=True)
class PPOResult:
    """One-step-ahead posterior predictive log ordinates.

    ``t`` holds 1-based time indices; ``ess`` is the effective sample size of
    the inverse-likelihood weights behind each ordinate.
    """

    t: np.ndarray
    log_ordinates: np.ndarray
    ess: np.ndarray
    n_draws: int
    model: str = ""

    @property
    def log_sum(self) -> float:
        return float(np.sum(self.log_ordinates))

    @property
    def flagged(self) -> np.ndarray:
        return self.t[~np.isfinite(self.log_ordinates)]

    def to_text(self) -> str:
        return write_columns(["t", "log_ordinate", "ess"],
                             np.column_stack([self.t, self.log_ordinates, self.ess]),
                             {"model": self.model, "log_sum": self.log_sum,
                              "n_draws": self.n_draws})


def ppo_from_loglik(loglik, t_start: int, model: str = "") -> PPOResult:
    """Ordinates from a ``(S, n-1)`` matrix with ``loglik[s, j] = log f_s(z_{j+2} | z_{j+1})``.

    ``p(z_t | z_(t-1))`` is the ratio of posterior averages of
    ``prod_{u>t} f(z_u|z_{u-1})^{-1}`` and ``prod_{u>=t} f(z_u|z_{u-1})^{-1}``;
    for t = n the numerator is 1.  Both averages are taken in log space.
    """
    loglik = np.atleast_2d(np.asarray(loglik, dtype=float))
    S, m = loglik.shape
    n = m + 1
    if not 3 <= t_start <= n:
        raise ValueError(f"t_start must lie in [3, {n}]")
    # tail[:, j] = sum_{u >= j+2} log f(z_u | z_{u-1}); tail[:, n-1] = 0
    tail = np.zeros((S, m + 1))
    tail[:, :m] = np.cumsum(loglik[:, ::-1], axis=1)[:, ::-1]
    log_mean_inv = logsumexp(-tail, axis=0) - np.log(S)
    ts = np.arange(t_start, n + 1)
    j = ts - 2
    with np.errstate(invalid="ignore"):
        log_ord = log_mean_inv[j + 1] - log_mean_inv[j]
        lw = -tail[:, j]
        lw = lw - lw.max(axis=0)
        w = np.exp(lw)
        ess = w.sum(0) ** 2 / np.sum(w**2, axis=0)
    return PPOResult(ts, log_ord, ess, S, model)


def ppo(draws, z, t_start: int) -> PPOResult:
    """Posterior predictive ordinates p(z_t | z_2..z_{t-1}) for t = t_start..n."""
    _check_draws(draws)
    z = np.asarray(z, dtype=float)
    loglik = draws.log_density_matrix(z[1:], z[:-1])
    return ppo_from_loglik(loglik, t_start, getattr(draws, "model", ""))
