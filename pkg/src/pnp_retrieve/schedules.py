"""Non-increasing noise-level and mixing-weight schedules.

The denoising strength sigma_k decays geometrically (log-spaced) from
sigma_max to sigma_min over T outer iterations. The measurement-mixing
weight is its normalized value eta_k = sigma_k / sigma_max, which starts
at 1 and is non-increasing; the implied penalty growth is
mu_k = (1 - eta_k) / eta_k, non-decreasing from 0.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["Schedule", "build_schedule", "DENOISER_LEVEL_BANK"]

# Noise levels of a 25-member denoiser bank: 1, 3, ..., 49.
DENOISER_LEVEL_BANK = tuple(range(1, 50, 2))


@dataclass(frozen=True, eq=False)
class Schedule:
    """Per-iteration sigma/eta sequences plus optional level quantization.

    ``denoise_sigma`` is what gets handed to a denoiser: equal to ``sigma``
    unless a level bank is configured, in which case each sigma_k is snapped
    to the nearest level. ``eta`` is always derived from the unquantized
    sigma so the measurement update stays smooth.
    """

    sigma_max: float
    sigma_min: float
    t: int
    sigma: np.ndarray
    eta: np.ndarray
    levels: tuple[float, ...] | None = None

    @property
    def mu(self) -> np.ndarray:
        """Implied penalty weights (1 - eta) / eta, non-decreasing."""
        return (1.0 - self.eta) / self.eta

    @property
    def denoise_sigma(self) -> np.ndarray:
        if self.levels is None:
            return self.sigma
        bank = np.asarray(self.levels, dtype=float)
        idx = np.argmin(np.abs(self.sigma[:, None] - bank[None, :]), axis=1)
        return bank[idx]


def build_schedule(
    sigma_max: float,
    sigma_min: float,
    t: int,
    levels=None,
) -> Schedule:
    """Geometric (log-spaced) schedule with pinned endpoints.

    sigma[k] = sigma_max * (sigma_min / sigma_max) ** (k / (t - 1)), so
    sigma[0] = sigma_max and sigma[t-1] = sigma_min exactly.
    """
    if not sigma_max >= sigma_min > 0:
        raise ValueError("need sigma_max >= sigma_min > 0")
    if t < 2:
        raise ValueError("schedule needs at least two iterations")
    exponents = np.arange(t) / (t - 1)
    sigma = sigma_max * (sigma_min / sigma_max) ** exponents
    sigma[0] = sigma_max
    sigma[-1] = sigma_min
    eta = sigma / sigma_max
    if levels is not None:
        levels = tuple(float(v) for v in levels)
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly ascending")
    return Schedule(
        sigma_max=float(sigma_max),
        sigma_min=float(sigma_min),
        t=int(t),
        sigma=sigma,
        eta=eta,
        levels=levels,
    )
