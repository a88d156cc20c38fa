"""Plug-and-play phase retrieval drivers (half-quadratic splitting form).

Each outer iteration k blends the measured magnitudes with the magnitudes
predicted from the current estimate (weight eta_k), imposes the blended
magnitudes on the estimate with either one ER-style projection step
(`pnp_pr_run`) or a few HIO steps (`pnp_hio_run`), and then applies a
Gaussian denoiser at noise level sigma_k. Both eta_k and sigma_k are
non-increasing, so the data term is trusted less and the prior tightens
as the run progresses. The returned estimate is the final post-denoise
iterate.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .classic import SpaceConstraints, apply_phase, hio_run, project_space
from .denoisers import DenoiserSpec, resolve_denoiser
from .measurement import MeasurementOperator, forward
from .metrics import psnr as psnr_metric
from .metrics import residual as residual_metric
from .schedules import Schedule

__all__ = [
    "PnPConfig",
    "RunRecord",
    "DenoiserRunError",
    "measurement_update",
    "image_update",
    "stationarity_residual",
    "pnp_pr_run",
    "pnp_hio_run",
]


@dataclass(frozen=True)
class PnPConfig:
    """Configuration shared by both plug-and-play drivers.

    The outer iteration count T is the schedule length; inner_iterations
    (L) and beta apply to the HIO variant only.
    """

    schedule: Schedule
    denoiser: DenoiserSpec
    constraints: SpaceConstraints
    inner_iterations: int = 5
    beta: float = 0.9

    def __post_init__(self):
        if self.inner_iterations < 1:
            raise ValueError("inner_iterations must be at least 1")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")

    @property
    def t(self) -> int:
        return self.schedule.t


@dataclass
class RunRecord:
    """Per-iteration trace of a run plus the final estimate and timing.

    norm_diff[k] is ||z_{k+1} - z_k|| / ||z_k||, residual[k] the magnitude
    misfit of the post-denoise iterate, psnr_db[k] the (registered) PSNR
    against ground truth when one was supplied. seconds holds wall-clock
    by phase: "update", "denoise", "total".
    """

    norm_diff: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    psnr_db: list | None = None
    estimate: np.ndarray | None = None
    seconds: dict = field(default_factory=dict)


class DenoiserRunError(RuntimeError):
    """Denoiser failure during a run; carries the partial trace."""

    def __init__(self, message: str, record: RunRecord):
        super().__init__(message)
        self.record = record


def measurement_update(
    y: np.ndarray, z_k: np.ndarray, eta_k: float, op: MeasurementOperator
) -> np.ndarray:
    """Convex combination eta*y + (1 - eta)*|A z_k| of measured and
    model-predicted magnitudes. Non-negative elementwise."""
    if not 0.0 <= eta_k <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    return eta_k * y + (1.0 - eta_k) * np.abs(forward(op, z_k))


def image_update(
    op: MeasurementOperator,
    y_tilde: np.ndarray,
    z_k: np.ndarray,
    c: SpaceConstraints,
) -> np.ndarray:
    """ER-style update: impose the blended magnitudes with the current
    phase estimate, then project onto the space-domain constraints."""
    return project_space(apply_phase(op, y_tilde, z_k), c)


def stationarity_residual(
    op: MeasurementOperator,
    x_star: np.ndarray,
    z_k: np.ndarray,
    eta_k: float,
    y: np.ndarray,
) -> float:
    """Norm of the first-order optimality condition of the penalized
    data-fit subproblem, evaluated at x_star.

    With mu = (1 - eta)/eta, returns
    ||-2*Re{A^+(y * Ax/|Ax|) - x} + 2*mu*(x - z_k)||_2 at x = x_star.
    Verification oracle for the real-valued, oversampled-DFT case; not
    used in the solve path.
    """
    if op.kind != "fourier":
        raise ValueError("stationarity check requires the fourier operator")
    if eta_k <= 0.0 or eta_k > 1.0:
        raise ValueError("eta must lie in (0, 1]")
    if np.iscomplexobj(x_star) or np.iscomplexobj(z_k):
        raise ValueError("stationarity check requires real-valued iterates")
    mu = (1.0 - eta_k) / eta_k
    back = apply_phase(op, y, x_star)
    grad = -2.0 * (np.real(back) - x_star) + 2.0 * mu * (x_star - z_k)
    return float(np.linalg.norm(grad))


def _trace_step(record, z_old, z_new, op, y, truth, register_psnr):
    denom = np.linalg.norm(z_old)
    diff = np.linalg.norm(z_new - z_old)
    record.norm_diff.append(float(diff / denom) if denom > 0 else float(diff))
    record.residual.append(residual_metric(op, z_new, y))
    if truth is not None:
        record.psnr_db.append(psnr_metric(np.real(z_new), truth, register=register_psnr))


def _run(
    op, y, z0, cfg, truth, register_psnr, inner_step
) -> tuple[np.ndarray, RunRecord]:
    record = RunRecord(psnr_db=[] if truth is not None else None)
    eta = cfg.schedule.eta
    den_sigma = cfg.schedule.denoise_sigma
    z = np.array(z0)
    t_update = 0.0
    t_denoise = 0.0
    t0 = time.perf_counter()
    with resolve_denoiser(cfg.denoiser) as denoiser:
        for k in range(cfg.t):
            t1 = time.perf_counter()
            y_tilde = measurement_update(y, z, float(eta[k]), op)
            x = inner_step(y_tilde, z)
            t2 = time.perf_counter()
            t_update += t2 - t1
            try:
                z_new = denoiser(x, float(den_sigma[k]))
            except Exception as err:
                record.estimate = z
                record.seconds = {
                    "update": t_update,
                    "denoise": t_denoise,
                    "total": time.perf_counter() - t0,
                }
                raise DenoiserRunError(
                    f"denoiser failed at iteration {k}: {err}", record
                ) from err
            t_denoise += time.perf_counter() - t2
            _trace_step(record, z, z_new, op, y, truth, register_psnr)
            z = z_new
    record.estimate = z
    record.seconds = {
        "update": t_update,
        "denoise": t_denoise,
        "total": time.perf_counter() - t0,
    }
    return z, record


def pnp_pr_run(
    op: MeasurementOperator,
    y: np.ndarray,
    z0: np.ndarray,
    cfg: PnPConfig,
    truth: np.ndarray | None = None,
    register_psnr: bool = True,
) -> tuple[np.ndarray, RunRecord]:
    """Plug-and-play run with a single projection (ER) step per outer
    iteration: measurement update, image update, denoise."""
    return _run(
        op, y, z0, cfg, truth, register_psnr,
        inner_step=lambda y_tilde, z: image_update(op, y_tilde, z, cfg.constraints),
    )


def pnp_hio_run(
    op: MeasurementOperator,
    y: np.ndarray,
    z0: np.ndarray,
    cfg: PnPConfig,
    truth: np.ndarray | None = None,
    register_psnr: bool = True,
) -> tuple[np.ndarray, RunRecord]:
    """Plug-and-play run whose inner solve is a short HIO block: the
    blended magnitudes are imposed with L feedback iterations started
    from the current estimate, then the result is denoised."""
    return _run(
        op, y, z0, cfg, truth, register_psnr,
        inner_step=lambda y_tilde, z: hio_run(
            op, y_tilde, z, cfg.inner_iterations, cfg.beta, cfg.constraints
        ),
    )
