"""PSNR, SSIM, and magnitude-residual metrics with ambiguity registration.

Fourier magnitudes are blind to circular shifts and point reflection, so
scoring against ground truth can optionally register the estimate over
{identity, point reflection} x all circular shifts (exhaustive via
FFT cross-correlation) before comparing. Peak value is fixed at 255.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .measurement import MeasurementOperator, forward

__all__ = [
    "Registration",
    "MetricReport",
    "register_estimate",
    "psnr",
    "ssim",
    "residual",
    "evaluate",
]

_PEAK = 255.0
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


@dataclass(frozen=True)
class Registration:
    """Transform applied to an estimate before scoring."""

    flipped: bool = False
    shift: tuple[int, int] = (0, 0)

    def apply(self, image: np.ndarray) -> np.ndarray:
        out = np.flip(image, axis=(0, 1)) if self.flipped else image
        return np.roll(out, self.shift, axis=(0, 1))


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float
    ssim: float
    residual: float | None = None
    registration: Registration = Registration()


def _best_shift(truth: np.ndarray, candidate: np.ndarray):
    # <truth, roll(candidate, s)> for every circular shift s, via FFT.
    corr = np.fft.ifft2(np.fft.fft2(truth) * np.conj(np.fft.fft2(candidate)))
    corr = corr.real
    idx = np.unravel_index(np.argmax(corr), corr.shape)
    return (int(idx[0]), int(idx[1])), corr[idx]


def register_estimate(
    estimate: np.ndarray, truth: np.ndarray
) -> tuple[np.ndarray, Registration]:
    """MSE-minimizing registration of estimate onto truth.

    Searches point reflection and every circular shift; ties prefer the
    unflipped candidate. Never increases the MSE relative to the
    untransformed comparison.
    """
    if estimate.shape != truth.shape:
        raise ValueError("estimate and truth must have equal shapes")
    shift_id, corr_id = _best_shift(truth, estimate)
    flipped = np.flip(estimate, axis=(0, 1))
    shift_fl, corr_fl = _best_shift(truth, flipped)
    if corr_fl > corr_id:
        reg = Registration(flipped=True, shift=shift_fl)
    else:
        reg = Registration(flipped=False, shift=shift_id)
    return reg.apply(estimate), reg


def psnr(estimate: np.ndarray, truth: np.ndarray, register: bool = False) -> float:
    """Peak signal-to-noise ratio in dB (peak 255, +inf for equal images)."""
    if estimate.shape != truth.shape:
        raise ValueError("estimate and truth must have equal shapes")
    if register:
        estimate, _ = register_estimate(estimate, truth)
    mse = np.mean((np.asarray(estimate, float) - np.asarray(truth, float)) ** 2)
    if mse == 0.0:
        return np.inf
    return 10.0 * np.log10(_PEAK**2 / mse)


def _ssim_kernel() -> np.ndarray:
    half = (_SSIM_WINDOW - 1) // 2
    g = np.exp(-(np.arange(-half, half + 1) ** 2) / (2.0 * _SSIM_SIGMA**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(estimate: np.ndarray, truth: np.ndarray, register: bool = False) -> float:
    """Mean local structural similarity (11x11 Gaussian window, std 1.5).

    Local statistics are Gaussian-weighted; the map is averaged over the
    interior where the window fits entirely, so boundary padding never
    contributes. Dynamic range 255, stability constants K1=0.01, K2=0.03.
    """
    if estimate.shape != truth.shape:
        raise ValueError("estimate and truth must have equal shapes")
    half = (_SSIM_WINDOW - 1) // 2
    if min(estimate.shape) < _SSIM_WINDOW:
        raise ValueError(f"images must be at least {_SSIM_WINDOW} pixels per side")
    if register:
        estimate, _ = register_estimate(estimate, truth)
    a = np.asarray(estimate, dtype=float)
    b = np.asarray(truth, dtype=float)
    kernel = _ssim_kernel()

    def smooth(img):
        return ndimage.correlate(img, kernel, mode="constant")

    mu_a = smooth(a)
    mu_b = smooth(b)
    var_a = smooth(a * a) - mu_a**2
    var_b = smooth(b * b) - mu_b**2
    cov = smooth(a * b) - mu_a * mu_b
    c1 = (_SSIM_K1 * _PEAK) ** 2
    c2 = (_SSIM_K2 * _PEAK) ** 2
    score = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    return float(np.mean(score[half:-half, half:-half]))


def residual(op: MeasurementOperator, estimate: np.ndarray, y: np.ndarray) -> float:
    """Magnitude-domain data misfit || |A estimate| - y ||_2."""
    return float(np.linalg.norm(np.abs(forward(op, estimate)).ravel() - y.ravel()))


def evaluate(
    estimate: np.ndarray,
    truth: np.ndarray,
    op: MeasurementOperator | None = None,
    y: np.ndarray | None = None,
    register: bool = True,
) -> MetricReport:
    """Score an estimate; one shared registration feeds PSNR and SSIM."""
    if register:
        aligned, reg = register_estimate(estimate, truth)
    else:
        aligned, reg = estimate, Registration()
    res = residual(op, estimate, y) if op is not None and y is not None else None
    return MetricReport(
        psnr_db=psnr(aligned, truth),
        ssim=ssim(aligned, truth),
        residual=res,
        registration=reg,
    )
