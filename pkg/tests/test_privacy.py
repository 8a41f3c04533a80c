import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from dppersonal import privacy
from dppersonal.privacy import ApproxDpBudget, SensitivityBound, ZcdpBudget

# Frozen from the bisection oracle in tests/oracles.py.
RHO_EPS1_DELTA001 = 0.04908796336007093
RHO_EPS1_DELTA1E6 = 0.01746890476912338


class TestBudgets:

    def test_zcdp_rejects_negative(self):
        with pytest.raises(ValueError):
            ZcdpBudget(-0.1)

    def test_zcdp_accepts_inf(self):
        assert ZcdpBudget(math.inf).rho == math.inf

    @pytest.mark.parametrize("delta", [0.0, 1.0, -1e-3, 2.0])
    def test_approx_rejects_bad_delta(self, delta):
        with pytest.raises(ValueError):
            ApproxDpBudget(1.0, delta)

    def test_sensitivity_rejects_inf(self):
        with pytest.raises(ValueError):
            SensitivityBound(math.inf)


class TestConversion:

    def test_zero_rho(self):
        assert privacy.zcdp_to_approx_dp(0.0, 0.1).epsilon == 0.0

    def test_hand_value(self):
        assert privacy.zcdp_to_approx_dp(1.0, math.exp(-1)).epsilon == pytest.approx(3.0, abs=1e-15)

    def test_quarter_rho(self):
        eps = privacy.zcdp_to_approx_dp(ZcdpBudget(0.25), 0.01).epsilon
        assert eps == pytest.approx(oracles.zcdp_epsilon(0.25, 0.01), rel=1e-15)
        assert eps == pytest.approx(2.395966, abs=1e-6)

    @pytest.mark.parametrize("delta", [0.0, 1.0])
    def test_rejects_delta(self, delta):
        with pytest.raises(ValueError):
            privacy.zcdp_to_approx_dp(1.0, delta)

    def test_inverse_rejects_nonpositive_eps(self):
        with pytest.raises(ValueError):
            privacy.approx_dp_to_zcdp(0.0, 0.1)

    def test_inverse_example(self):
        rho = privacy.approx_dp_to_zcdp(3.0, math.exp(-1)).rho
        assert privacy.zcdp_to_approx_dp(rho, math.exp(-1)).epsilon <= 3.0
        assert rho == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("eps,delta,expected", [
        (1.0, 0.01, RHO_EPS1_DELTA001), (1.0, 1e-6, RHO_EPS1_DELTA1E6)])
    def test_inverse_matches_oracle(self, eps, delta, expected):
        assert privacy.approx_dp_to_zcdp(eps, delta).rho == pytest.approx(expected, rel=1e-7)

    @pytest.mark.parametrize("eps", [0.1, 0.5, 1.0, 2.0])
    @pytest.mark.parametrize("delta", [1e-3, 1e-6])
    def test_round_trip_grid(self, eps, delta):
        rho = privacy.approx_dp_to_zcdp(eps, delta)
        back = privacy.zcdp_to_approx_dp(rho, delta).epsilon
        assert back <= eps
        assert eps - back <= 1e-9 * max(1.0, eps)

    @given(st.floats(1e-6, 50.0), st.floats(1e-12, 0.5))
    def test_round_trip_never_loosens(self, eps, delta):
        rho = privacy.approx_dp_to_zcdp(eps, delta).rho
        assert privacy.zcdp_to_approx_dp(rho, delta).epsilon <= eps

    @given(st.floats(1e-4, 10.0), st.floats(1e-4, 10.0), st.floats(1e-9, 0.5))
    def test_inverse_monotone(self, e1, e2, delta):
        lo, hi = sorted((e1, e2))
        assert (privacy.approx_dp_to_zcdp(lo, delta).rho
                <= privacy.approx_dp_to_zcdp(hi, delta).rho)

    def test_inverse_tends_to_zero(self):
        rhos = [privacy.approx_dp_to_zcdp(e, 1e-5).rho for e in (1e-1, 1e-2, 1e-3, 1e-4)]
        assert all(a > b > 0 for a, b in zip(rhos, rhos[1:]))
        assert rhos[-1] < 1e-9


class TestGaussianMechanism:

    def test_zero_sensitivity_is_exact(self):
        rng = np.random.default_rng(0)
        state = rng.bit_generator.state
        out = privacy.gaussian_mechanism([0.5], SensitivityBound(0.0), ZcdpBudget(1.0), rng)
        assert out.tolist() == [0.5]
        assert rng.bit_generator.state == state

    def test_rejects_zero_rho(self):
        with pytest.raises(ValueError):
            privacy.gaussian_mechanism([0.0], 1.0, 0.0, np.random.default_rng(0))

    def test_sigma_values(self):
        # (2/10)^2 / (2*2) = 0.01
        assert privacy.gaussian_sigma(0.2, 2.0) ** 2 == pytest.approx(0.01, rel=1e-14)
        assert privacy.gaussian_sigma(1.0, math.inf) == 0.0

    def test_billboard_noise_variance(self):
        d, t, rho = 4, 10, 0.5
        rng = np.random.default_rng(1)
        draws = np.stack([privacy.gaussian_mechanism(np.zeros(d), 2 * math.sqrt(d) / t, rho, rng)
                          for _ in range(25_000)]).ravel()
        target = 2 * d / (rho * t * t)
        assert abs(draws.var() / target - 1) < 0.03

    def test_noise_moments(self):
        sigma2 = 0.01
        rng = np.random.default_rng(2)
        z = privacy.gaussian_mechanism(np.zeros(100_000), 0.2, 2.0, rng)
        assert abs(z.mean()) < 4 * math.sqrt(sigma2 / z.size)
        assert abs(z.var() / sigma2 - 1) < 0.03

    def test_determinism(self):
        a = privacy.gaussian_mechanism([1.0, -1.0], 0.2, 2.0, np.random.default_rng(7))
        b = privacy.gaussian_mechanism([1.0, -1.0], 0.2, 2.0, np.random.default_rng(7))
        assert a.tobytes() == b.tobytes()


class TestRenyi:

    def test_identical(self):
        assert privacy.gaussian_renyi_divergence(0.0, 1.0, 2.0) == 0.0

    def test_unit(self):
        assert privacy.gaussian_renyi_divergence(1.0, 1.0, 2.0) == 1.0

    def test_calibrated_gap_gives_rho_alpha(self):
        sigma = privacy.gaussian_sigma(0.2, 1.0)
        assert privacy.gaussian_renyi_divergence(0.2, sigma, 3.0) == pytest.approx(3.0, rel=1e-12)

    @pytest.mark.parametrize("alpha", [1.0, 0.5])
    def test_rejects_alpha(self, alpha):
        with pytest.raises(ValueError):
            privacy.gaussian_renyi_divergence(1.0, 1.0, alpha)

    @given(st.floats(1e-3, 10.0), st.floats(1e-3, 100.0), st.floats(1.001, 100.0))
    def test_witness(self, delta_two, rho, alpha):
        sigma = privacy.gaussian_sigma(delta_two, rho)
        div = privacy.gaussian_renyi_divergence(delta_two, sigma, alpha)
        assert div == pytest.approx(rho * alpha, rel=1e-12)
