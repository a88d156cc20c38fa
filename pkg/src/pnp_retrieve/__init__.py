"""Phase retrieval from magnitude-only measurements.

Classical alternating-projection solvers (ER, HIO) and their plug-and-play
regularized variants with pluggable Gaussian denoisers, plus measurement
simulation, multi-start initialization, ambiguity-aware metrics, and a
Monte-Carlo benchmark harness.
"""

from .classic import (
    HIOConfig,
    SpaceConstraints,
    apply_phase,
    er_run,
    hio_iterate,
    hio_run,
    project_space,
)
from .denoisers import (
    Denoiser,
    DenoiserSpec,
    ExternalDenoiserClient,
    ExternalDenoiserError,
    denoise,
    external_denoise,
    resolve_denoiser,
    tv_denoise,
)
from .measurement import (
    Measurement,
    MeasurementOperator,
    adjoint,
    cdp_operator,
    forward,
    fourier_operator,
    measurement_snr,
    pseudoinverse,
    random_cdp_masks,
    simulate_measurement,
)
from .metrics import MetricReport, Registration, evaluate, psnr, register_estimate, residual, ssim
from .multistart import InitConfig, multistart_init
from .pnp import (
    DenoiserRunError,
    PnPConfig,
    RunRecord,
    image_update,
    measurement_update,
    pnp_hio_run,
    pnp_pr_run,
    stationarity_residual,
)
from .schedules import DENOISER_LEVEL_BANK, Schedule, build_schedule

__version__ = "0.1.0"
