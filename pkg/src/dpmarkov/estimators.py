"""Scikit-learn style estimators over a single time series.

``fit(X)`` takes the series itself (a 1-d array or a one-column 2-d array)
and ``predict(X)`` returns the posterior mean of E(Z_t | Z_{t-1} = x) at each
conditioning value in ``X``.  Density products are available through
:meth:`transition_density`, :meth:`forecast` and :meth:`ppo`.

Examples
--------
>>> from dpmarkov import TransitionMixture, simulate_brownian
>>> z = simulate_brownian(200, seed=0)
>>> est = TransitionMixture(n_iterations=400, burn_in=100, thin=3).fit(z)  # doctest: +SKIP
>>> est.predict([0.0, 1.0])  # doctest: +SKIP
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import inference
from .priors import DataProxy, HyperpriorConfig, default_priors
from .sampler import SamplerSettings, run
from .variants.stationary import fit_stationary
from .variants.tar import TarPriors, fit_tar

__all__ = ["TransitionMixture", "StationaryTransitionMixture", "ThresholdAR", "check_series"]


def check_series(X, min_length: int = 3, name: str = "X") -> np.ndarray:
    """Validate a univariate series given as a 1-d array or an (n, 1) array."""
    arr = check_array(X, ensure_2d=False, dtype=np.float64, input_name=name,
                      ensure_all_finite=True)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"{name} must hold a single series; got {arr.shape[1]} columns")
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size < min_length:
        raise ValueError(f"{name} needs at least {min_length} observations, got {arr.size}")
    return arr


class _MarkovEstimator(RegressorMixin, BaseEstimator):
    """Shared prediction surface; subclasses set ``draws_`` in ``fit``."""

    def _settings(self) -> SamplerSettings:
        return SamplerSettings(n_iterations=self.n_iterations, burn_in=self.burn_in,
                               thin=self.thin, seed=self.random_state, adapt=self.adapt)

    def _finish_fit(self, z, draws):
        self.draws_ = draws
        self.series_ = z
        self.n_features_in_ = 1
        return self

    def predict(self, X) -> np.ndarray:
        """Posterior mean of E(Z_t | Z_{t-1} = x) for each x in ``X``."""
        check_is_fitted(self, "draws_")
        x = check_series(X, min_length=1)
        return self.draws_.expectation_matrix(x).mean(axis=0)

    def predict_interval(self, X, level: float = 0.95):
        """Pointwise equal-tailed credible interval of the conditional expectation."""
        check_is_fitted(self, "draws_")
        curve = inference.expectation_curve(self.draws_, check_series(X, min_length=1), level)
        return curve.lower, curve.upper

    def transition_density(self, z_prev: float, grid=None, level: float = 0.95):
        check_is_fitted(self, "draws_")
        return inference.transition_grid(self.draws_, z_prev, grid, level)

    def forecast(self, grid=None, level: float = 0.95):
        """One-step-ahead predictive density from the last observation."""
        check_is_fitted(self, "draws_")
        return inference.forecast_density(self.draws_, self.series_[-1], grid, level)

    def forecast_paths(self, horizon: int, paths_per_draw: int = 10, grid=None, seed: int = 0):
        check_is_fitted(self, "draws_")
        return inference.multi_step_forecast(self.draws_, self.series_[-1], horizon,
                                             paths_per_draw, grid, seed=seed)

    def ppo(self, t_start: int | None = None, last: int | None = None):
        """Posterior predictive ordinates over the fitted series.

        Give either the 1-based ``t_start`` or the number ``last`` of final
        observations to score.
        """
        check_is_fitted(self, "draws_")
        n = self.series_.size
        if (t_start is None) == (last is None):
            raise ValueError("give exactly one of t_start and last")
        if t_start is None:
            t_start = n - last + 1
        return inference.ppo(self.draws_, self.series_, t_start)

    def score(self, X, y=None) -> float:
        """Mean log one-step-ahead posterior predictive ordinate of the series ``X``.

        ``X`` is typically the fitted series; the ordinates are computed for
        t = 3..n with the fitted draws.
        """
        check_is_fitted(self, "draws_")
        z = check_series(X)
        return float(np.mean(inference.ppo(self.draws_, z, 3).log_ordinates))


class TransitionMixture(_MarkovEstimator):
    """General mixture model for the transition density of a Markov series.

    Parameters
    ----------
    L : int
        Truncation level of the Dirichlet process.
    n_iterations, burn_in, thin : int
        Chain length, discarded prefix and thinning interval.
    prior_shape : float
        Common shape (> 1) of the variance-type hyperpriors in the default recipe.
    a_alpha, b_alpha : float
        Gamma(shape, rate) prior on the DP precision.
    center, data_range : float, optional
        Override the data proxy (midrange and range of the series by default).
    priors : HyperpriorConfig, optional
        Full hyperprior configuration; replaces the default recipe.
    random_state : int
        Seed; equal seeds give bit-identical draws.
    adapt : bool
        Tune random-walk scales during burn-in.
    """

    def __init__(self, L=30, n_iterations=120_000, burn_in=20_000, thin=20, prior_shape=2.0,
                 a_alpha=0.5, b_alpha=0.5, center=None, data_range=None, priors=None,
                 random_state=0, adapt=True):
        self.L = L
        self.n_iterations = n_iterations
        self.burn_in = burn_in
        self.thin = thin
        self.prior_shape = prior_shape
        self.a_alpha = a_alpha
        self.b_alpha = b_alpha
        self.center = center
        self.data_range = data_range
        self.priors = priors
        self.random_state = random_state
        self.adapt = adapt

    def _config(self, z) -> HyperpriorConfig:
        if self.priors is not None:
            if not isinstance(self.priors, HyperpriorConfig):
                raise TypeError("priors must be a HyperpriorConfig")
            return self.priors
        proxy = DataProxy.from_series(z)
        proxy = DataProxy(proxy.d if self.center is None else float(self.center),
                          proxy.r if self.data_range is None else float(self.data_range))
        return default_priors(proxy, self.prior_shape, L=self.L, a_alpha=self.a_alpha,
                              b_alpha=self.b_alpha)

    _fit_fn = staticmethod(run)

    def fit(self, X, y=None):
        """Run the sampler on the series ``X``; ``y`` is ignored."""
        z = check_series(X)
        self.config_ = self._config(z)
        return self._finish_fit(z, type(self)._fit_fn(z, self.config_, self._settings()))


class StationaryTransitionMixture(TransitionMixture):
    """Mixture restricted so that sum_l p_l N(mu_l, sigma2_l) is invariant.

    Takes the same parameters as :class:`TransitionMixture`.
    """

    _fit_fn = staticmethod(fit_stationary)


class ThresholdAR(_MarkovEstimator):
    """Two-regime Gaussian threshold AR(1) with data-based priors.

    Parameters
    ----------
    slope_var : float
        Prior variance of the AR coefficients.
    tau_shape : float
        Shape of the inverse-gamma variance priors; their mean is the AR(1)
        residual mean square.
    threshold_quantiles : tuple of float
        The uniform threshold prior spans these quantiles of the data.
    priors : TarPriors, optional
        Replaces the data-based defaults.
    """

    def __init__(self, n_iterations=60_000, burn_in=10_000, thin=10, slope_var=2.0,
                 tau_shape=2.0, threshold_quantiles=(0.1, 0.9), priors=None, random_state=0,
                 adapt=True):
        self.n_iterations = n_iterations
        self.burn_in = burn_in
        self.thin = thin
        self.slope_var = slope_var
        self.tau_shape = tau_shape
        self.threshold_quantiles = threshold_quantiles
        self.priors = priors
        self.random_state = random_state
        self.adapt = adapt

    def fit(self, X, y=None):
        z = check_series(X, min_length=5)
        self.priors_ = self.priors or TarPriors.from_series(
            z, self.tau_shape, self.slope_var, tuple(self.threshold_quantiles))
        draws = fit_tar(z, self.priors_, self._settings())
        self.coef_ = draws.params.mean(axis=0)
        return self._finish_fit(z, draws)
