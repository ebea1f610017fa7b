import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dpmarkov import (StationaryTransitionMixture, ThresholdAR, TransitionMixture,
                      simulate_brownian)
from dpmarkov.estimators import check_series
from dpmarkov.priors import DataProxy, default_priors

FAST = dict(L=6, n_iterations=300, burn_in=100, thin=4, random_state=2)


@pytest.fixture(scope="module")
def walk():
    return simulate_brownian(80, seed=6)


@pytest.fixture(scope="module")
def fitted(walk):
    return TransitionMixture(**FAST).fit(walk)


class TestValidation:
    def test_accepts_column_vector(self):
        np.testing.assert_array_equal(check_series([[1.0], [2.0], [3.0]]), [1.0, 2.0, 3.0])

    @pytest.mark.parametrize("bad", [[1.0, np.nan, 2.0, 3.0], [1.0, np.inf, 0.0]])
    def test_non_finite(self, bad):
        with pytest.raises(ValueError):
            check_series(bad)

    def test_multiple_columns(self):
        with pytest.raises(ValueError, match="single series"):
            check_series(np.ones((5, 2)))

    def test_too_short(self):
        with pytest.raises(ValueError, match="at least 3"):
            TransitionMixture(**FAST).fit([1.0, 2.0])

    def test_priors_type(self, walk):
        with pytest.raises(TypeError):
            TransitionMixture(priors={"L": 3}, **FAST).fit(walk)

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            TransitionMixture().predict([0.0])


class TestSklearnSurface:
    def test_get_params_round_trip(self):
        est = TransitionMixture(L=12, thin=7)
        params = est.get_params()
        assert params["L"] == 12 and params["thin"] == 7
        assert TransitionMixture(**params).get_params() == params

    def test_clone_is_unfitted_with_same_params(self, fitted):
        c = clone(fitted)
        assert c.get_params() == fitted.get_params()
        assert not hasattr(c, "draws_")

    def test_set_params(self):
        est = ThresholdAR().set_params(slope_var=5.0)
        assert est.slope_var == 5.0

    def test_fit_returns_self_with_attributes(self, walk):
        est = TransitionMixture(**FAST)
        assert est.fit(walk) is est
        assert est.n_features_in_ == 1
        assert len(est.draws_) == (300 - 100) // 4
        assert est.config_.L == 6


class TestPrediction:
    def test_predict_shape_and_interval(self, fitted):
        x = np.linspace(-3, 3, 7)
        pred = fitted.predict(x)
        lo, hi = fitted.predict_interval(x)
        assert pred.shape == (7,)
        assert np.all(lo <= pred) and np.all(pred <= hi)

    def test_predict_is_the_mean_expectation(self, fitted):
        x = np.array([-1.0, 0.5])
        np.testing.assert_allclose(fitted.predict(x),
                                   fitted.draws_.expectation_matrix(x).mean(axis=0))

    def test_forecast_uses_last_observation(self, fitted, walk):
        grid = np.linspace(-20, 20, 201)
        np.testing.assert_array_equal(fitted.forecast(grid).mean,
                                      fitted.transition_density(walk[-1], grid).mean)

    def test_ppo_argument_forms(self, fitted, walk):
        a = fitted.ppo(last=10)
        b = fitted.ppo(t_start=walk.size - 9)
        np.testing.assert_array_equal(a.log_ordinates, b.log_ordinates)
        with pytest.raises(ValueError):
            fitted.ppo()

    def test_score_is_finite(self, fitted, walk):
        assert np.isfinite(fitted.score(walk))

    def test_seeded_fits_agree(self, walk, fitted):
        again = TransitionMixture(**FAST).fit(walk)
        np.testing.assert_array_equal(again.predict([0.0, 1.0]), fitted.predict([0.0, 1.0]))

    def test_explicit_priors_are_used(self, walk):
        cfg = default_priors(DataProxy(0.0, 10.0), L=4)
        est = TransitionMixture(priors=cfg, **FAST).fit(walk)
        assert est.config_ is cfg


def test_stationary_estimator(walk):
    est = StationaryTransitionMixture(**FAST).fit(walk)
    assert np.all(np.abs(est.draws_.beta) < 1)
    assert np.all(np.isfinite(est.predict([0.0])))


def test_threshold_estimator(walk):
    est = ThresholdAR(n_iterations=400, burn_in=100, thin=3).fit(walk)
    assert est.coef_.shape == (7,)
    lo, hi = est.priors_.r_lo, est.priors_.r_hi
    assert lo <= est.coef_[6] <= hi
    assert est.predict([walk.mean()]).shape == (1,)
