"""Measurement operators and the noisy intensity simulator.

Two operator kinds are supported:

* ``fourier``: an oversampled 2D DFT. The N x N image is zero-padded to
  M x M (M = 2N) and transformed with the unitary DFT, so the operator has
  orthonormal columns and its pseudoinverse equals its adjoint
  (inverse transform followed by cropping).
* ``cdp``: coded diffraction patterns. The image is multiplied by P known
  unimodular masks and each product is transformed with the unitary N-point
  2D DFT. (1/P) times the adjoint is an exact left inverse.

Measurements are magnitudes of the forward transform; noise is drawn in the
intensity domain with per-bin standard deviation ``alpha * |Ax|_i`` and the
noisy intensity is clamped at zero before the square root.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MeasurementOperator",
    "Measurement",
    "fourier_operator",
    "cdp_operator",
    "random_cdp_masks",
    "forward",
    "adjoint",
    "pseudoinverse",
    "simulate_measurement",
    "measurement_snr",
]


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """Immutable linear measurement map with forward/adjoint/pseudoinverse.

    Attributes:
        kind: "fourier" (oversampled DFT) or "cdp" (coded diffraction).
        n: input image side length.
        m: output side length (2n for fourier, n for cdp).
        masks: tuple of P unimodular n x n masks, cdp only.
    """

    kind: str
    n: int
    m: int
    masks: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in ("fourier", "cdp"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.n <= 0:
            raise ValueError("image side must be positive")
        if self.kind == "fourier" and self.m != 2 * self.n:
            raise ValueError("fourier operator requires m = 2n")
        if self.kind == "cdp":
            if self.m != self.n:
                raise ValueError("cdp operator output side equals input side")
            if len(self.masks) < 1:
                raise ValueError("cdp operator needs at least one mask")
            for mask in self.masks:
                if mask.shape != (self.n, self.n):
                    raise ValueError("mask shape must match image side")
                if not np.allclose(np.abs(mask), 1.0, atol=1e-12):
                    raise ValueError("cdp masks must be unimodular")

    @property
    def output_shape(self) -> tuple[int, ...]:
        if self.kind == "fourier":
            return (self.m, self.m)
        return (len(self.masks), self.n, self.n)


def fourier_operator(n: int) -> MeasurementOperator:
    """Oversampled-DFT operator for n x n images (output side 2n)."""
    return MeasurementOperator(kind="fourier", n=n, m=2 * n)


def random_cdp_masks(n: int, p: int, seed) -> tuple[np.ndarray, ...]:
    """Draw p random unimodular phase masks exp(2*pi*i*u), u ~ U[0,1)."""
    rng = np.random.default_rng(seed)
    return tuple(
        np.exp(2j * np.pi * rng.uniform(size=(n, n))) for _ in range(p)
    )


def cdp_operator(n: int, masks) -> MeasurementOperator:
    """Coded-diffraction operator from explicit unimodular masks."""
    return MeasurementOperator(kind="cdp", n=n, m=n, masks=tuple(masks))


def _check_image(op: MeasurementOperator, x: np.ndarray) -> None:
    if x.shape != (op.n, op.n):
        raise ValueError(
            f"image shape {x.shape} does not match operator side {op.n}"
        )


def forward(op: MeasurementOperator, x: np.ndarray) -> np.ndarray:
    """Apply the operator: complex field Ax.

    fourier: zero-pad to m x m, unitary 2D DFT. cdp: per-mask elementwise
    multiply then unitary DFT, stacked along axis 0.
    """
    _check_image(op, x)
    if op.kind == "fourier":
        padded = np.zeros((op.m, op.m), dtype=complex)
        padded[: op.n, : op.n] = x
        return np.fft.fft2(padded, norm="ortho")
    return np.stack(
        [np.fft.fft2(mask * x, norm="ortho") for mask in op.masks]
    )


def pseudoinverse(op: MeasurementOperator, b: np.ndarray) -> np.ndarray:
    """Least-squares back-projection A^+ b (complex n x n image).

    Exact left inverse of :func:`forward` for both kinds.
    """
    if b.shape != op.output_shape:
        raise ValueError(
            f"field shape {b.shape} does not match operator output "
            f"{op.output_shape}"
        )
    if op.kind == "fourier":
        return np.fft.ifft2(b, norm="ortho")[: op.n, : op.n]
    acc = np.zeros((op.n, op.n), dtype=complex)
    for mask, plane in zip(op.masks, b):
        acc += np.conj(mask) * np.fft.ifft2(plane, norm="ortho")
    return acc / len(op.masks)


def adjoint(op: MeasurementOperator, b: np.ndarray) -> np.ndarray:
    """Adjoint A^H b. Equals the pseudoinverse for fourier, P times it for cdp."""
    if op.kind == "fourier":
        return pseudoinverse(op, b)
    return len(op.masks) * pseudoinverse(op, b)


@dataclass(frozen=True, eq=False)
class Measurement:
    """Magnitude measurement with its noise metadata.

    Attributes:
        values: non-negative magnitudes, shaped like the operator output.
        alpha: intensity-noise scale used in simulation.
        seed: RNG seed the noise was drawn with.
        snr_db: realized SNR, 10*log10(||Ax||^2 / ||w||) (amplitude-norm
            denominator); +inf when noiseless.
        snr_power_db: conventional power-ratio SNR,
            10*log10(|| |Ax|^2 ||^2 / ||w||^2); +inf when noiseless.
    """

    values: np.ndarray
    alpha: float
    seed: int
    snr_db: float
    snr_power_db: float


def measurement_snr(
    op: MeasurementOperator,
    x: np.ndarray,
    w: np.ndarray,
    power: bool = False,
) -> float:
    """Signal-to-noise ratio in dB for a realized intensity-noise vector w.

    Default is 10*log10(||Ax||_2^2 / ||w||_2) with the noise norm
    unsquared; ``power=True`` uses the conventional power ratio
    10*log10(|| |Ax|^2 ||_2^2 / ||w||_2^2). Returns +inf when w is zero.
    """
    noise_norm = np.linalg.norm(np.asarray(w).ravel())
    if noise_norm == 0.0:
        return np.inf
    if power:
        intensity = np.abs(forward(op, x)) ** 2
        return 10.0 * np.log10(
            np.linalg.norm(intensity.ravel()) ** 2 / noise_norm**2
        )
    field_energy = np.linalg.norm(forward(op, x).ravel()) ** 2
    return 10.0 * np.log10(field_energy / noise_norm)


def simulate_measurement(
    op: MeasurementOperator, x: np.ndarray, alpha: float, seed: int
) -> Measurement:
    """Simulate a noisy magnitude measurement of a real image in [0, 255].

    Intensities |Ax|^2 receive additive Gaussian noise with per-bin standard
    deviation alpha*|Ax|_i (zero-magnitude bins stay exactly zero); negative
    noisy intensities are clamped to zero before the square root. Bit-identical
    for identical (x, alpha, seed).
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if np.iscomplexobj(x):
        raise ValueError("simulation expects a real-valued image")
    mag = np.abs(forward(op, x))
    intensity = mag**2
    if alpha == 0.0:
        return Measurement(
            values=mag, alpha=0.0, seed=seed, snr_db=np.inf,
            snr_power_db=np.inf,
        )
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(intensity.shape) * (alpha * mag)
    values = np.sqrt(np.maximum(intensity + w, 0.0))
    return Measurement(
        values=values,
        alpha=float(alpha),
        seed=seed,
        snr_db=measurement_snr(op, x, w),
        snr_power_db=measurement_snr(op, x, w, power=True),
    )
