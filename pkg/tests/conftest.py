import sys

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from dpmarkov.model import Hyperparams, MixtureState
from dpmarkov.priors import DataProxy, default_priors
from dpmarkov.sampler import ChainState

# three observations give two (z_{t-1}, z_t) pairs
TINY_Z = np.array([0.3, -0.5, 1.1])


def make_chain_state(z=TINY_Z, *, mu_x=(0.0, 1.0), mu_y=(0.2, -0.4), beta=(0.3, -0.6),
                     delta_x=(1.0, 0.5), delta_y=(0.8, 1.2), zeta=(0.6,), labels=(0, 1),
                     alpha=1.0, psi=None, seed=0, scale_mu_x=0.8, scale_log_delta_x=0.8,
                     cls=ChainState):
    L = len(mu_x)
    cfg = default_priors(DataProxy(0.0, 4.0), L=L)
    if psi is None:
        psi = Hyperparams(m_x=0.1, v_x=2.0, m_y=-0.2, v_y=3.0, s_x=1.5, s_y=0.7, theta=0.1,
                          c=0.5, nu_x=2.0, nu_y=2.5)
    return cls(mu_x, mu_y, beta, delta_x, delta_y, zeta, alpha, psi, labels, cfg,
               np.random.default_rng(seed), scale_mu_x, scale_log_delta_x)


def random_mixture(rng, L, spread=3.0):
    return MixtureState(
        mu_x=rng.normal(0, spread, L), mu_y=rng.normal(0, spread, L), beta=rng.normal(0, 1, L),
        delta_x=rng.uniform(0.3, 3.0, L), delta_y=rng.uniform(0.3, 3.0, L),
        zeta=rng.uniform(0.2, 0.9, L - 1), alpha=1.0)


def grid_ks(samples, grid, log_f):
    """Kolmogorov-Smirnov distance between ``samples`` and the grid-normalized density exp(log_f)."""
    lf = log_f(grid)
    f = np.exp(lf - lf.max())
    cdf = cumulative_trapezoid(f, grid, initial=0.0)
    cdf /= cdf[-1]
    s = np.sort(np.asarray(samples))
    F = np.interp(s, grid, cdf)
    i = np.arange(1, s.size + 1)
    return float(max(np.max(i / s.size - F), np.max(F - (i - 1) / s.size)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
