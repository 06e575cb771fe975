"""Noise-schedule tests with scalar oracles computed in-test."""

import numpy as np
import pytest

from etseed.errors import BadParameter
from etseed.schedule import NoiseSchedule, build_schedule, reverse_coefficients


class TestBuildSchedule:
    def test_single_step_linear(self):
        s = build_schedule(1, "linear", 1.0)
        assert s.beta.tolist() == [1e-4]
        assert abs(s.alpha_bar[0] - 0.9999) < 1e-15

    def test_linear_product_oracle(self):
        # Oracle: explicit loop over the ramp, independent of cumprod.
        s = build_schedule(100, "linear", 1.0)
        prod = 1.0
        for b in np.linspace(1e-4, 0.02, 100):
            prod *= 1.0 - b
        assert abs(s.alpha_bar[-1] - prod) < 1e-15

    def test_gamma_must_be_positive(self):
        with pytest.raises(BadParameter):
            build_schedule(10, "linear", 0.0)
        with pytest.raises(BadParameter):
            build_schedule(10, "linear", -1.0)

    def test_k_must_be_positive(self):
        with pytest.raises(BadParameter):
            build_schedule(0, "linear", 1.0)

    def test_unknown_kind(self):
        with pytest.raises(BadParameter):
            build_schedule(10, "quadratic", 1.0)

    @pytest.mark.parametrize("kind", ["linear", "cosine"])
    @pytest.mark.parametrize("K", [1, 2, 10, 100])
    def test_invariants(self, kind, K):
        s = build_schedule(K, kind, 1.0)
        assert np.all(np.diff(s.alpha_bar) < 0.0) or K == 1
        assert np.max(np.abs(s.alpha_bar - np.cumprod(1.0 - s.beta))) < 1e-12
        assert 0.0 < s.alpha_bar[-1] <= s.alpha_bar[0]
        if kind == "linear" and K >= 2:
            assert s.alpha_bar[0] >= 0.99

    def test_defaults_start_near_one(self):
        for kind in ("linear", "cosine"):
            s = build_schedule(100, kind, 1.0)
            assert s.alpha_bar[0] >= 0.99

    def test_serialization_roundtrip(self):
        s = build_schedule(25, "cosine", 0.7)
        back = NoiseSchedule.from_dict(s.to_dict())
        assert back.K == s.K and back.kind == s.kind and back.gamma == s.gamma
        assert np.array_equal(back.beta, s.beta)

    def test_anisotropic_gamma(self):
        gd = np.array([0.5, 0.5, 0.5, 0.2, 0.2, 0.2])
        s = build_schedule(10, "linear", 1.0, gamma_diag=gd)
        scale = s.noise_scale(10)
        expected = gd * np.sqrt(1.0 - s.alpha_bar[-1])
        np.testing.assert_allclose(scale, expected, atol=1e-15)
        back = NoiseSchedule.from_dict(s.to_dict())
        assert np.array_equal(back.gamma_diag, gd)


class TestReverseCoefficients:
    def test_algebraic_identities_every_k(self):
        s = build_schedule(50, "linear", 1.0)
        for k in range(2, 51):
            lam0, lam1 = reverse_coefficients(s, k)
            a_k = s.alpha[k - 1]
            ab_k = s.alpha_bar[k - 1]
            ab_prev = s.alpha_bar[k - 2]
            assert abs(lam0 * np.sqrt(ab_k) + lam1 - np.sqrt(a_k)) < 1e-12
            assert abs(lam0 + lam1 * np.sqrt(ab_k) - np.sqrt(ab_prev)) < 1e-12

    def test_k2_linear_scalar_oracle(self):
        # Oracle: raw closed forms evaluated with plain floats.
        s = build_schedule(2, "linear", 1.0)
        b1, b2 = 1e-4, 0.02
        a1, a2 = 1.0 - b1, 1.0 - b2
        ab1, ab2 = a1, a1 * a2
        lam0 = np.sqrt(ab1) * (1.0 - a2) / (1.0 - ab2)
        lam1 = np.sqrt(a2) * (1.0 - ab1) / (1.0 - ab2)
        got0, got1 = reverse_coefficients(s, 2)
        assert abs(got0 - lam0) < 1e-15
        assert abs(got1 - lam1) < 1e-15

    def test_k_out_of_range(self):
        s = build_schedule(5, "linear", 1.0)
        for bad in (0, 1, 6):
            with pytest.raises(BadParameter):
                reverse_coefficients(s, bad)

    def test_deterministic_scalar_chain_contracts_to_x0(self):
        # With an exact clean-state prediction and zero injected noise the
        # scalar chain x_k = sqrt(abar_k) x0 steps to sqrt(abar_{k-1}) x0,
        # so |x_k - x0| shrinks monotonically as k decreases.
        s = build_schedule(40, "linear", 1.0)
        x0 = 1.7
        x = np.sqrt(s.alpha_bar[-1]) * x0
        prev_gap = abs(x - x0)
        for k in range(s.K, 1, -1):
            lam0, lam1 = reverse_coefficients(s, k)
            x = lam0 * x0 + lam1 * x
            assert abs(x - np.sqrt(s.alpha_bar[k - 2]) * x0) < 1e-12
            gap = abs(x - x0)
            assert gap <= prev_gap + 1e-15
            prev_gap = gap
        assert abs(x - x0) < 1e-3  # sqrt(abar_1) = sqrt(1 - 1e-4)
