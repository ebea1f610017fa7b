import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from dpmarkov.model import (ComponentParams, Hyperparams, MixtureState, choose_truncation,
                            conditional_expectation, expected_partial_sum, joint_covariance,
                            log_transition_density, stick_break, transition_density,
                            transition_density_via_joint, transition_weights, weights_to_zeta)

from conftest import random_mixture


def single(mu_x=0.0, mu_y=0.0, beta=0.0, delta_x=1.0, delta_y=1.0):
    return MixtureState([mu_x], [mu_y], [beta], [delta_x], [delta_y], zeta=[])


class TestStickBreak:
    def test_three_components(self):
        np.testing.assert_allclose(stick_break([0.5, 0.5]), [0.5, 0.25, 0.25])

    def test_two_components(self):
        np.testing.assert_allclose(stick_break([0.3]), [0.7, 0.3])

    def test_five_components(self):
        p = stick_break([0.9, 0.8, 0.7, 0.6])
        assert p[-1] == pytest.approx(0.9 * 0.8 * 0.7 * 0.6)
        assert p.sum() == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("bad", [[0.0, 0.5], [1.0], [0.5, np.nan], [-0.1]])
    def test_rejects_values_outside_unit_interval(self, bad):
        with pytest.raises(ValueError):
            stick_break(bad)

    @given(st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=40))
    def test_weights_sum_to_one(self, zeta):
        p = stick_break(zeta)
        assert np.all(p > 0)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)

    @given(st.lists(st.floats(1e-3, 1 - 1e-3), min_size=1, max_size=20))
    def test_inverse_map_round_trips(self, zeta):
        np.testing.assert_allclose(weights_to_zeta(stick_break(zeta)), zeta, rtol=1e-8)


class TestTransitionWeights:
    def test_single_component(self):
        np.testing.assert_allclose(transition_weights([-3.0, 0.0, 40.0], single()), 1.0)

    def test_identical_kernels(self):
        s = MixtureState.from_weights([0, 0], [0, 0], [0, 0], [1, 1], [1, 1], [0.5, 0.5])
        np.testing.assert_allclose(transition_weights(np.linspace(-5, 5, 7), s), 0.5)

    def test_hand_computed_ratio(self):
        s = MixtureState.from_weights([-2, 2], [0, 0], [0, 0], [1, 1], [1, 1], [0.5, 0.5])
        np.testing.assert_allclose(transition_weights(0.0, s), [0.5, 0.5])
        e = np.exp(-8.0)
        np.testing.assert_allclose(transition_weights(2.0, s), [e / (1 + e), 1 / (1 + e)],
                                   rtol=1e-12)

    def test_far_conditioning_value_stays_finite(self):
        s = MixtureState.from_weights([-2, 2], [0, 0], [0, 0], [1, 1], [1, 1], [0.5, 0.5])
        q = transition_weights(1e4, s)
        np.testing.assert_allclose(q, [0.0, 1.0])


class TestTransitionDensity:
    def test_decoupled_kernel_is_standard_normal(self):
        assert transition_density(0.0, 5.0, single()) == pytest.approx(0.3989422804014327)

    def test_negative_unit_beta_gives_random_walk(self):
        s = single(beta=-1.0)
        assert transition_density(3.0, 3.0, s) == pytest.approx(stats.norm.pdf(0.0))
        assert conditional_expectation(3.7, s) == pytest.approx(3.7)

    def test_quadrature_normalization(self):
        s = random_mixture(np.random.default_rng(4), 4)
        grid = np.linspace(-40, 40, 80_001)
        for z_prev in (-2.0, 0.5, 3.0):
            assert integrate.trapezoid(transition_density(grid, z_prev, s), grid) == pytest.approx(
                1.0, abs=1e-6)

    def test_broadcasting(self):
        s = random_mixture(np.random.default_rng(0), 3)
        z = np.linspace(-2, 2, 5)
        out = transition_density(z[:, None], np.array([0.0, 1.0])[None, :], s)
        assert out.shape == (5, 2)
        np.testing.assert_allclose(out[:, 1], transition_density(z, 1.0, s))

    def test_log_density_far_from_everything(self):
        s = random_mixture(np.random.default_rng(1), 3)
        assert np.isfinite(log_transition_density(1e3, -1e3, s))

    def test_reparametrization_matches_joint_conditioning(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            s = random_mixture(rng, int(rng.integers(1, 6)))
            z, zp = rng.normal(0, 4, 5), rng.normal(0, 4, 5)
            np.testing.assert_allclose(transition_density(z, zp, s),
                                       transition_density_via_joint(z, zp, s), rtol=1e-10)


class TestJointCovariance:
    def test_hand_computed(self):
        np.testing.assert_allclose(joint_covariance(0.5, 2.0, 1.0), [[2, -1], [-1, 1.5]])

    def test_zero_beta_is_diagonal(self):
        np.testing.assert_allclose(joint_covariance(0.0, 2.0, 3.0), np.diag([2.0, 3.0]))


class TestConditionalExpectation:
    def test_flat_mixture(self):
        s = MixtureState.from_weights([-1, 2], [4, 4], [0, 0], [1, 2], [1, 1], [0.3, 0.7])
        np.testing.assert_allclose(conditional_expectation(np.linspace(-9, 9, 5), s), 4.0)

    def test_midpoint_is_average_of_lines(self):
        s = MixtureState.from_weights([-1, 3], [0.5, 2.0], [0.8, -0.6], [1, 1], [1, 1], [0.5, 0.5])
        x = 1.0
        lines = [0.5 - 0.8 * (x + 1), 2.0 + 0.6 * (x - 3)]
        assert conditional_expectation(x, s) == pytest.approx(np.mean(lines))

    def test_matches_quadrature(self):
        s = random_mixture(np.random.default_rng(3), 4)
        grid = np.linspace(-60, 60, 100_001)
        m = integrate.trapezoid(grid * transition_density(grid, 0.7, s), grid)
        assert conditional_expectation(0.7, s) == pytest.approx(m, abs=1e-8)


class TestValueTypes:
    def test_component_rejects_nonpositive_variance(self):
        with pytest.raises(ValueError):
            ComponentParams(0, 0, 0, 0.0, 1)

    def test_hyperparams_round_trip(self):
        h = Hyperparams(0, 1, 0, 2, 1, 1, 0, 0.5)
        assert Hyperparams.from_array(h.as_array()) == h

    def test_state_requires_matching_lengths(self):
        with pytest.raises(ValueError):
            MixtureState([0, 1], [0], [0, 0], [1, 1], [1, 1], zeta=[0.5])

    def test_state_arrays_are_read_only(self):
        s = random_mixture(np.random.default_rng(0), 2)
        with pytest.raises(ValueError):
            s.mu_x[0] = 1.0


class TestTruncation:
    def test_fixed_alpha_closed_form(self):
        assert choose_truncation(1.0, 1e-3) == 10
        assert expected_partial_sum(10, 1.0) == pytest.approx(1 - 0.5**10)

    def test_gamma_prior_matches_quadrature(self):
        # E[1 - (alpha / (1 + alpha))^L] under alpha ~ Gamma(0.5, rate 0.5)
        g = stats.gamma(0.5, scale=2.0)
        for L in (30, 50):
            tail = integrate.quad(lambda a: (a / (1 + a)) ** L * g.pdf(a), 0, np.inf,
                                  limit=200)[0]
            assert expected_partial_sum(L, (0.5, 0.5), mc_draws=400_000) == pytest.approx(
                1 - tail, abs=3e-5)

    def test_rejects_bad_tolerance(self):
        with pytest.raises(ValueError):
            choose_truncation(1.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000), st.floats(-8, 8), st.floats(-8, 8))
def test_weights_are_a_probability_vector(L, seed, z_prev, z):
    s = random_mixture(np.random.default_rng(seed), L)
    q = transition_weights(z_prev, s)
    assert q.sum() == pytest.approx(1.0)
    assert transition_density(z, z_prev, s) >= 0
