import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpmarkov import load_faithful
from dpmarkov.model import MixtureState, conditional_expectation
from dpmarkov.priors import (DataProxy, HyperpriorConfig, default_priors, prior_moments,
                             sample_prior_hyperparams)


def test_faithful_proxy_gives_expected_delta():
    z = load_faithful()
    assert (z.min(), z.max(), z.size) == (43.0, 96.0, 272)
    cfg = default_priors(DataProxy.from_series(z))
    m = prior_moments(cfg)
    assert m["E_delta_x"] == pytest.approx(175.5625, rel=1e-12)
    assert m["E_delta_y"] == pytest.approx(175.5625, rel=1e-12)
    assert cfg.a_m_x == cfg.a_m_y == 69.5


def test_unit_proxy():
    m = prior_moments(default_priors(DataProxy(0.0, 4.0)))
    assert m["E_delta_y"] == pytest.approx(1.0)
    assert m["Var_mu_y"] == pytest.approx(1.0)
    assert m["E_mu_y"] == 0.0


@pytest.mark.parametrize("shape", [1.5, 2.0, 5.0])
def test_beta_variance_identity(shape):
    cfg = default_priors(DataProxy(3.0, 10.0), shape)
    assert cfg.a_theta == 0.0
    assert cfg.b_theta + cfg.b_c / (cfg.a_c - 1) == pytest.approx(1.0, abs=1e-15)
    assert cfg.b_theta == 0.5


@pytest.mark.parametrize("shape", [1.0, 0.5])
def test_shapes_must_give_finite_means(shape):
    with pytest.raises(ValueError):
        default_priors(DataProxy(0.0, 1.0), shape)


def test_invalid_proxy():
    with pytest.raises(ValueError):
        DataProxy(0.0, 0.0)
    with pytest.raises(ValueError):
        DataProxy(np.nan, 1.0)


def test_json_round_trip():
    cfg = default_priors(DataProxy(1.5, 7.0), L=12, a_alpha=2.0)
    assert HyperpriorConfig.from_json(cfg.to_json()) == cfg


def test_unknown_keys_rejected():
    d = default_priors(DataProxy(0.0, 1.0)).to_dict()
    d["extra"] = 1.0
    with pytest.raises(ValueError, match="extra"):
        HyperpriorConfig.from_dict(d)


def test_config_validation():
    cfg = default_priors(DataProxy(0.0, 1.0))
    with pytest.raises(ValueError):
        cfg.with_overrides(a_c=1.0)
    with pytest.raises(ValueError):
        cfg.with_overrides(L=0)
    with pytest.raises(ValueError):
        cfg.with_overrides(b_m_x=-1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50), st.floats(0.1, 100), st.floats(0.2, 20), st.floats(-10, 10))
def test_scale_equivariance(d, r, a, b):
    base = default_priors(DataProxy(d, r))
    moved = default_priors(DataProxy(a * d + b, a * r))
    assert moved.a_m_x == pytest.approx(a * base.a_m_x + b, abs=1e-9)
    for name in ("b_m_x", "b_v_x", "b_m_y", "b_v_y"):
        assert getattr(moved, name) == pytest.approx(a * a * getattr(base, name))
    # s has a gamma prior with rate b_s, so b_s scales inversely
    assert moved.b_s_x == pytest.approx(base.b_s_x / (a * a))
    assert (moved.b_theta, moved.b_c) == (base.b_theta, base.b_c)


def _prior_components(cfg, rng, n, shared=False):
    """n draws of (mu_x, mu_y, beta, delta_x, delta_y) from G0, with psi drawn from its
    hyperprior once (``shared``, as within one G) or per component (the marginal prior)."""
    out = np.empty((n, 5))
    psi = sample_prior_hyperparams(cfg, rng)
    for i in range(n):
        if not shared and i:
            psi = sample_prior_hyperparams(cfg, rng)
        dx = 1.0 / rng.gamma(psi.nu_x, 1.0 / psi.s_x)
        dy = 1.0 / rng.gamma(psi.nu_y, 1.0 / psi.s_y)
        out[i] = (rng.normal(psi.m_x, np.sqrt(psi.v_x)), rng.normal(psi.m_y, np.sqrt(psi.v_y)),
                  rng.normal(psi.theta, np.sqrt(psi.c)), dx, dy)
    return out


def test_prior_beta_moments():
    cfg = default_priors(DataProxy(0.0, 4.0), shape=4.0)  # shape 4 gives beta a finite 4th moment
    b = _prior_components(cfg, np.random.default_rng(0), 40_000)[:, 2]
    se_var = np.sqrt((np.mean(b**4) - np.var(b) ** 2) / b.size)
    assert abs(b.mean()) < 3 * b.std() / np.sqrt(b.size)
    assert abs(b.var() - 1.0) < 3 * se_var


def test_prior_predictive_expectation_centered_at_proxy():
    cfg = default_priors(DataProxy(10.0, 8.0), L=5)
    rng = np.random.default_rng(1)
    vals = np.empty(10_000)
    for i in range(vals.size):
        comps = _prior_components(cfg, rng, cfg.L, shared=True)
        zeta = rng.beta(rng.gamma(cfg.a_alpha, 1.0 / cfg.b_alpha) + 1e-300, 1.0, cfg.L - 1)
        s = MixtureState(*comps.T, zeta=np.clip(zeta, 1e-12, 1 - 1e-12))
        vals[i] = conditional_expectation(10.0, s)
    assert abs(vals.mean() - 10.0) < 3 * vals.std() / np.sqrt(vals.size)


def test_prior_mean_hyperparams():
    cfg = default_priors(DataProxy(0.0, 4.0), L=3)
    psi = cfg.prior_mean_hyperparams()
    assert psi.c == pytest.approx(0.5) and psi.theta == 0.0
    assert psi.s_x / (psi.nu_x - 1) == pytest.approx(1.0)
