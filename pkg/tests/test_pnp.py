import numpy as np
import pytest

from conftest import PeerServer
from pnp_retrieve.classic import SpaceConstraints, apply_phase, er_run, hio_run, project_space
from pnp_retrieve.denoisers import DenoiserSpec
from pnp_retrieve.measurement import cdp_operator, forward, fourier_operator, pseudoinverse
from pnp_retrieve.pnp import (
    DenoiserRunError,
    PnPConfig,
    measurement_update,
    image_update,
    pnp_hio_run,
    pnp_pr_run,
    stationarity_residual,
)
from pnp_retrieve.schedules import Schedule, build_schedule

REAL_NONNEG = SpaceConstraints(real_valued=True, non_negative=True)
REAL_ONLY = SpaceConstraints(real_valued=True, non_negative=False)
IDENTITY = DenoiserSpec(kind="identity")


def constant_schedule(sigma, t):
    """Length-t schedule with eta pinned to 1 (mu = 0 throughout)."""
    return Schedule(
        sigma_max=sigma,
        sigma_min=sigma,
        t=t,
        sigma=np.full(t, float(sigma)),
        eta=np.ones(t),
    )


def smooth_positive_image(n, seed, low=30.0, high=220.0):
    from scipy import ndimage

    rng = np.random.default_rng(seed)
    img = ndimage.gaussian_filter(rng.uniform(size=(n, n)), sigma=1.5)
    img -= img.min()
    return low + (high - low) * img / img.max()


class TestMeasurementUpdate:
    def test_eta_one_returns_y_bitwise(self):
        rng = np.random.default_rng(0)
        op = fourier_operator(4)
        y = rng.uniform(0, 5, (8, 8))
        z = rng.normal(size=(4, 4))
        np.testing.assert_array_equal(measurement_update(y, z, 1.0, op), y)

    def test_eta_zero_returns_model_magnitudes(self):
        rng = np.random.default_rng(1)
        op = fourier_operator(4)
        z = rng.normal(size=(4, 4))
        out = measurement_update(np.zeros((8, 8)), z, 0.0, op)
        np.testing.assert_array_equal(out, np.abs(forward(op, z)))

    def test_convex_combination_arithmetic(self):
        # Impulse of height 32 at the origin has flat magnitude 8 on the
        # 4x4 oversampled grid; blended with y = 4 at eta = 0.25 gives 7.
        op = fourier_operator(2)
        z = np.zeros((2, 2))
        z[0, 0] = 32.0
        y = np.full((4, 4), 4.0)
        out = measurement_update(y, z, 0.25, op)
        np.testing.assert_allclose(out, 7.0, atol=1e-12)

    def test_output_non_negative(self):
        rng = np.random.default_rng(2)
        op = fourier_operator(8)
        y = rng.uniform(0, 5, (16, 16))
        z = rng.normal(size=(8, 8))
        assert np.all(measurement_update(y, z, 0.5, op) >= 0)

    def test_eta_out_of_range_rejected(self):
        op = fourier_operator(4)
        with pytest.raises(ValueError):
            measurement_update(np.zeros((8, 8)), np.zeros((4, 4)), 1.5, op)


class TestImageUpdate:
    def test_feasible_fixed_point(self):
        z = smooth_positive_image(8, 3)
        op = fourier_operator(8)
        y_tilde = np.abs(forward(op, z))
        out = image_update(op, y_tilde, z, REAL_NONNEG)
        assert np.max(np.abs(out - z)) < 1e-12

    def test_zero_estimate_uses_unit_phase(self):
        rng = np.random.default_rng(4)
        op = fourier_operator(4)
        y_tilde = rng.uniform(0, 5, (8, 8))
        out = image_update(op, y_tilde, np.zeros((4, 4)), REAL_NONNEG)
        expected = project_space(pseudoinverse(op, y_tilde * (1.0 + 0.0j)), REAL_NONNEG)
        np.testing.assert_array_equal(out, expected)

    @pytest.mark.parametrize("eta", [0.9, 0.5, 0.125])
    def test_composed_updates_match_fixed_point_formula(self, eta):
        # Direct evaluation of the closed-form solution
        # x* = eta * Re{A^+(y * phase(Az))} + (1 - eta) * z.
        op = fourier_operator(8)
        for seed in range(10):
            rng = np.random.default_rng(seed)
            z = rng.normal(size=(8, 8))
            y = rng.uniform(0, 5, (16, 16))
            y_tilde = measurement_update(y, z, eta, op)
            composed = image_update(op, y_tilde, z, REAL_ONLY)
            direct = eta * np.real(apply_phase(op, y, z)) + (1 - eta) * z
            np.testing.assert_allclose(composed, direct, atol=1e-10)


class TestStationarityResidual:
    @pytest.mark.parametrize("eta", [0.9, 0.5, 0.125])
    def test_closed_form_solution_is_stationary(self, eta):
        # Instances built so the phase of Ax* matches the phase of Az:
        # z = c*x with c > 0 keeps both phases equal, and the blended
        # update then lands on a stationary point exactly.
        op = fourier_operator(8)
        for seed in range(10):
            rng = np.random.default_rng(seed)
            x = rng.uniform(1.0, 255.0, (8, 8))
            y = np.abs(forward(op, x))
            c = rng.uniform(0.3, 3.0)
            z = c * x
            y_tilde = measurement_update(y, z, eta, op)
            x_star = image_update(op, y_tilde, z, REAL_ONLY)
            assert stationarity_residual(op, x_star, z, eta, y) < 1e-8

    def test_eta_one_er_fixed_point(self):
        x = smooth_positive_image(8, 5)
        op = fourier_operator(8)
        y = np.abs(forward(op, x))
        assert stationarity_residual(op, x, x, 1.0, y) < 1e-10

    def test_small_eta_limit_keeps_current_estimate(self):
        z = smooth_positive_image(8, 6)
        op = fourier_operator(8)
        y = np.abs(forward(op, z))
        assert stationarity_residual(op, z, z, 1e-3, y) < 1e-8

    def test_invalid_inputs_rejected(self):
        op = fourier_operator(4)
        x = np.ones((4, 4))
        y = np.ones((8, 8))
        with pytest.raises(ValueError):
            stationarity_residual(op, x, x, 0.0, y)
        with pytest.raises(ValueError):
            stationarity_residual(op, x.astype(complex), x, 0.5, y)
        opc = cdp_operator(4, [np.ones((4, 4), dtype=complex)])
        with pytest.raises(ValueError):
            stationarity_residual(opc, x, x, 0.5, np.ones((1, 4, 4)))


def default_cfg(t=20, sigma_max=40.0, sigma_min=5.0, denoiser=IDENTITY, **kw):
    return PnPConfig(
        schedule=build_schedule(sigma_max, sigma_min, t),
        denoiser=denoiser,
        constraints=REAL_NONNEG,
        **kw,
    )


class TestPnPPrRun:
    def test_identity_denoiser_fixed_point(self):
        x = smooth_positive_image(16, 7)
        op = fourier_operator(16)
        y = np.abs(forward(op, x))
        out, record = pnp_pr_run(op, y, x, default_cfg(t=200))
        assert np.max(np.abs(out - x)) < 1e-8
        assert len(record.norm_diff) == 200

    def test_single_iteration_reduces_to_er_step(self):
        rng = np.random.default_rng(8)
        op = fourier_operator(8)
        y = rng.uniform(0, 5, (16, 16))
        z0 = rng.uniform(0, 255, (8, 8))
        cfg = PnPConfig(
            schedule=constant_schedule(40.0, 1),
            denoiser=IDENTITY,
            constraints=REAL_NONNEG,
        )
        out, _ = pnp_pr_run(op, y, z0, cfg)
        np.testing.assert_array_equal(out, er_run(op, y, z0, 1, REAL_NONNEG))

    def test_eta_one_identity_denoiser_equals_er_bitwise(self):
        op = fourier_operator(8)
        for seed in range(10):
            rng = np.random.default_rng(seed)
            y = rng.uniform(0, 5, (16, 16))
            z0 = rng.uniform(0, 255, (8, 8))
            cfg = PnPConfig(
                schedule=build_schedule(40.0, 40.0, 25),
                denoiser=IDENTITY,
                constraints=REAL_NONNEG,
            )
            out, _ = pnp_pr_run(op, y, z0, cfg)
            np.testing.assert_array_equal(out, er_run(op, y, z0, 25, REAL_NONNEG))

    def test_trace_is_finite_and_complete(self):
        rng = np.random.default_rng(9)
        op = fourier_operator(8)
        x = rng.uniform(0, 255, (8, 8))
        y = rng.uniform(0, 5, (16, 16))
        out, record = pnp_pr_run(
            op, y, x, default_cfg(t=30), truth=x, register_psnr=False
        )
        assert len(record.norm_diff) == 30
        assert len(record.residual) == 30
        assert len(record.psnr_db) == 30
        assert np.all(np.isfinite(record.norm_diff))
        assert np.all(np.isfinite(record.residual))
        assert set(record.seconds) == {"update", "denoise", "total"}

    def test_deterministic_across_runs(self):
        rng = np.random.default_rng(10)
        op = fourier_operator(8)
        y = rng.uniform(0, 5, (16, 16))
        z0 = rng.uniform(0, 255, (8, 8))
        cfg = default_cfg(t=15, denoiser=DenoiserSpec(kind="total-variation"))
        a, rec_a = pnp_pr_run(op, y, z0, cfg)
        b, rec_b = pnp_pr_run(op, y, z0, cfg)
        np.testing.assert_array_equal(a, b)
        assert rec_a.norm_diff == rec_b.norm_diff
        assert rec_a.residual == rec_b.residual


class TestPnPHioRun:
    def test_identity_denoiser_fixed_point(self):
        x = smooth_positive_image(16, 11)
        op = fourier_operator(16)
        y = np.abs(forward(op, x))
        out, _ = pnp_hio_run(op, y, x, default_cfg(t=200, inner_iterations=5))
        assert np.max(np.abs(out - x)) < 1e-8

    def test_single_outer_inner_reduces_to_hio_step(self):
        rng = np.random.default_rng(12)
        op = fourier_operator(8)
        y = rng.uniform(0, 5, (16, 16))
        z0 = rng.uniform(0, 255, (8, 8))
        cfg = PnPConfig(
            schedule=constant_schedule(40.0, 1),
            denoiser=IDENTITY,
            constraints=REAL_NONNEG,
            inner_iterations=1,
            beta=0.9,
        )
        out, _ = pnp_hio_run(op, y, z0, cfg)
        np.testing.assert_array_equal(out, hio_run(op, y, z0, 1, 0.9, REAL_NONNEG))

    def test_eta_one_identity_equals_block_restarted_hio(self):
        op = fourier_operator(8)
        t, inner = 8, 5
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            y = rng.uniform(0, 5, (16, 16))
            z0 = rng.uniform(0, 255, (8, 8))
            cfg = PnPConfig(
                schedule=build_schedule(40.0, 40.0, t),
                denoiser=IDENTITY,
                constraints=REAL_NONNEG,
                inner_iterations=inner,
                beta=0.9,
            )
            out, _ = pnp_hio_run(op, y, z0, cfg)
            np.testing.assert_array_equal(
                out, hio_run(op, y, z0, t * inner, 0.9, REAL_NONNEG)
            )

    def test_mu_non_decreasing_over_run(self):
        cfg = default_cfg(t=50)
        mu = cfg.schedule.mu
        assert np.all(np.diff(mu) >= -1e-12)
        assert mu[0] == 0.0

    def test_denoiser_failure_carries_partial_trace(self):
        server = PeerServer("error")
        try:
            rng = np.random.default_rng(13)
            op = fourier_operator(8)
            y = rng.uniform(0, 5, (16, 16))
            z0 = rng.uniform(0, 255, (8, 8))
            cfg = default_cfg(
                t=10, denoiser=DenoiserSpec(kind="external", endpoint=server.endpoint)
            )
            with pytest.raises(DenoiserRunError) as excinfo:
                pnp_hio_run(op, y, z0, cfg)
            record = excinfo.value.record
            assert record.estimate is not None
            assert len(record.norm_diff) == 0  # failed on the first iteration
        finally:
            server.close()

    def test_validation(self):
        with pytest.raises(ValueError):
            default_cfg(t=5, inner_iterations=0)
        with pytest.raises(ValueError):
            default_cfg(t=5, beta=0.0)
