import numpy as np
import pytest
from scipy import stats

from dpmarkov import inference
from dpmarkov.draws import load_draws
from dpmarkov.sampler import SamplerSettings
from dpmarkov.variants.tar import (TarChainState, TarDraws, TarParams, TarPriors, fit_tar,
                                   sweep_tar, tar_log_density)

TRUE = TarParams(phi0_1=1.0, phi1_1=0.5, tau_1=0.5, phi0_2=-1.0, phi1_2=-0.4, tau_2=1.0, r=0.3)


def simulate_tar(params: TarParams, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = np.zeros(n)
    for t in range(1, n):
        if z[t - 1] <= params.r:
            z[t] = params.phi0_1 + params.phi1_1 * z[t - 1] + np.sqrt(params.tau_1) * rng.normal()
        else:
            z[t] = params.phi0_2 + params.phi1_2 * z[t - 1] + np.sqrt(params.tau_2) * rng.normal()
    return z


@pytest.fixture(scope="module")
def recovered():
    z = simulate_tar(TRUE, 1500, seed=3)
    st = SamplerSettings(n_iterations=6000, burn_in=1000, thin=5, seed=1)
    return z, fit_tar(z, None, st)


def test_density_uses_the_lower_regime_at_the_threshold():
    p = TRUE
    assert tar_log_density(0.0, p.r, p) == pytest.approx(
        stats.norm.logpdf(0.0, p.phi0_1 + p.phi1_1 * p.r, np.sqrt(p.tau_1)))
    assert tar_log_density(0.0, p.r + 1e-9, p) == pytest.approx(
        stats.norm.logpdf(0.0, p.phi0_2 + p.phi1_2 * p.r, np.sqrt(p.tau_2)), rel=1e-6)


def test_priors_from_series():
    z = np.array([1.0, 3.0, 2.0, 5.0, 4.0, 6.0, 2.0])
    pr = TarPriors.from_series(z)
    x, y = z[:-1], z[1:]
    slope, icpt = np.polyfit(x, y, 1)
    mse = np.sum((y - icpt - slope * x) ** 2) / (x.size - 2)
    assert pr.intercept_mean == 3.5
    assert pr.intercept_var == pytest.approx(np.var(z))
    assert pr.tau_rate / (pr.tau_shape - 1) == pytest.approx(mse)
    assert (pr.r_lo, pr.r_hi) == tuple(np.quantile(x, [0.1, 0.9]))
    assert TarPriors.from_dict(pr.to_dict()) == pr


def test_empty_regime_draws_from_the_prior():
    z = simulate_tar(TRUE, 60, seed=0)
    pr = TarPriors(intercept_mean=2.0, intercept_var=0.5, tau_rate=3.0, r_lo=-1.0, r_hi=1.0,
                   slope_mean=0.1, slope_var=0.2, tau_shape=4.0)
    # r above every observation, and a zero step keeps it outside the prior support
    s = TarChainState([[0, 0], [0, 0]], [1, 1], 100.0, pr, np.random.default_rng(1), scale_r=0.0)
    draws = np.empty((20_000, 3))
    for i in range(draws.shape[0]):
        sweep_tar(s, z)
        draws[i] = s.phi[1, 0], s.phi[1, 1], s.tau[1]
    assert s.r == 100.0
    assert stats.kstest(draws[:, 0], stats.norm(2.0, np.sqrt(0.5)).cdf).statistic < 0.015
    assert stats.kstest(draws[:, 1], stats.norm(0.1, np.sqrt(0.2)).cdf).statistic < 0.015
    assert stats.kstest(draws[:, 2], stats.invgamma(4.0, scale=3.0).cdf).statistic < 0.015


def test_recovers_simulated_parameters(recovered):
    _, d = recovered
    mean, sd = d.params.mean(axis=0), d.params.std(axis=0)
    assert np.all(np.abs(mean - TRUE.as_array()) < 3 * sd)


def test_threshold_stays_in_prior_range(recovered):
    z, d = recovered
    pr = TarPriors.from_series(z)
    assert np.all((d.threshold >= pr.r_lo) & (d.threshold <= pr.r_hi))


def test_expectation_is_piecewise_linear(recovered):
    _, d = recovered
    one = TarDraws(d.params[:1], d.iterations[:1], dict(d.meta))
    p = one[0]
    xs = np.array([p.r - 1.0, p.r - 0.5, p.r, p.r + 0.5, p.r + 1.0])
    curve = inference.expectation_curve(one, xs)
    lin1 = p.phi0_1 + p.phi1_1 * xs
    lin2 = p.phi0_2 + p.phi1_2 * xs
    np.testing.assert_allclose(curve.mean, np.where(xs <= p.r, lin1, lin2))


def test_text_round_trip(recovered):
    _, d = recovered
    back = load_draws(d.to_text())
    assert isinstance(back, TarDraws)
    np.testing.assert_array_equal(back.params, d.params)


def test_seeded_runs_are_identical():
    z = simulate_tar(TRUE, 200, seed=5)
    st = SamplerSettings(n_iterations=300, burn_in=50, thin=2, seed=9)
    assert fit_tar(z, None, st).to_text() == fit_tar(z, None, st).to_text()


def test_too_short_series_is_rejected():
    with pytest.raises(ValueError):
        fit_tar([1.0, 2.0, 3.0, 4.0], None, SamplerSettings(n_iterations=10, burn_in=2, thin=1))
