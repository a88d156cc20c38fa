import numpy as np
import pytest

from pnp_retrieve.schedules import DENOISER_LEVEL_BANK, build_schedule


class TestBuildSchedule:
    def test_default_endpoints(self):
        s = build_schedule(40.0, 5.0, 200)
        assert s.sigma[0] == 40.0
        assert s.sigma[199] == 5.0
        assert s.eta[0] == 1.0
        assert s.eta[199] == 0.125

    def test_constant_schedule(self):
        s = build_schedule(10.0, 10.0, 8)
        np.testing.assert_array_equal(s.sigma, np.full(8, 10.0))
        np.testing.assert_array_equal(s.eta, np.ones(8))
        np.testing.assert_array_equal(s.mu, np.zeros(8))

    def test_geometric_midpoint(self):
        # Odd length puts the midpoint exactly halfway in log space.
        s = build_schedule(40.0, 5.0, 201)
        assert s.sigma[100] == pytest.approx(np.sqrt(40.0 * 5.0), rel=1e-12)

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            build_schedule(5.0, 40.0, 10)
        with pytest.raises(ValueError):
            build_schedule(40.0, 0.0, 10)
        with pytest.raises(ValueError):
            build_schedule(40.0, 5.0, 1)

    def test_monotonicity_over_random_parameterizations(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            sigma_min = rng.uniform(0.1, 30.0)
            sigma_max = sigma_min * rng.uniform(1.0, 20.0)
            t = int(rng.integers(2, 400))
            s = build_schedule(sigma_max, sigma_min, t)
            assert len(s.sigma) == t
            assert np.all(np.diff(s.sigma) <= 1e-12 * sigma_max)
            assert s.sigma[0] == sigma_max and s.sigma[-1] == sigma_min
            assert np.all((s.eta > 0) & (s.eta <= 1.0))
            assert s.eta[0] == 1.0
            assert np.all(np.diff(s.eta) <= 1e-15)
            mu = s.mu
            assert np.all(mu >= 0)
            assert np.all(np.diff(mu) >= -1e-12)


class TestLevelQuantization:
    def test_bank_layout(self):
        assert DENOISER_LEVEL_BANK == tuple(range(1, 50, 2))
        assert len(DENOISER_LEVEL_BANK) == 25

    def test_quantized_sigmas_come_from_bank(self):
        s = build_schedule(40.0, 5.0, 200, levels=DENOISER_LEVEL_BANK)
        snapped = s.denoise_sigma
        assert set(snapped.tolist()) <= set(float(v) for v in DENOISER_LEVEL_BANK)
        # Snapping to the nearest level keeps the sequence non-increasing.
        assert np.all(np.diff(snapped) <= 0)
        # eta stays derived from the unquantized sigma.
        np.testing.assert_array_equal(s.eta, s.sigma / 40.0)

    def test_nearest_level_selected(self):
        s = build_schedule(8.0, 2.0, 3, levels=(1.0, 5.0, 9.0))
        # sigma = [8, 4, 2] -> nearest of {1, 5, 9} = [9, 5, 1]
        np.testing.assert_array_equal(s.denoise_sigma, [9.0, 5.0, 1.0])

    def test_unsorted_levels_rejected(self):
        with pytest.raises(ValueError):
            build_schedule(8.0, 2.0, 3, levels=(5.0, 1.0))

    def test_without_levels_sigma_passes_through(self):
        s = build_schedule(12.0, 3.0, 5)
        np.testing.assert_array_equal(s.denoise_sigma, s.sigma)
