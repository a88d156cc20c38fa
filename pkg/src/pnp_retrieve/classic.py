"""Space-domain projections and the classical ER / HIO solvers.

Both solvers alternate between the measurement-magnitude set (apply the
current phase estimate to the target magnitudes, back-project) and the
space-domain constraint set. ER projects hard onto the constraints; HIO
relaxes the projection with a feedback update on constraint-violating
pixels.
"""

from dataclasses import dataclass

import numpy as np

from .measurement import MeasurementOperator, forward, pseudoinverse

__all__ = [
    "SpaceConstraints",
    "HIOConfig",
    "project_space",
    "apply_phase",
    "er_run",
    "hio_iterate",
    "hio_run",
]


@dataclass(frozen=True, eq=False)
class SpaceConstraints:
    """Space-domain prior: realness, non-negativity, optional support mask."""

    real_valued: bool = True
    non_negative: bool = True
    support_mask: np.ndarray | None = None

    def __post_init__(self):
        if self.non_negative and not self.real_valued:
            raise ValueError("non-negativity requires a real-valued image")
        if self.support_mask is not None:
            object.__setattr__(
                self, "support_mask", np.asarray(self.support_mask, dtype=bool)
            )


@dataclass(frozen=True)
class HIOConfig:
    """Feedback parameter and iteration count for an HIO run."""

    beta: float = 0.9
    iterations: int = 1000

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")


def project_space(v: np.ndarray, c: SpaceConstraints) -> np.ndarray:
    """Project onto the space-domain constraint set.

    Applies, in order: zeroing outside the support mask, real-part
    extraction, clamping of negatives. Idempotent.
    """
    out = v
    if c.support_mask is not None:
        if c.support_mask.shape != v.shape:
            raise ValueError("support mask shape must match image")
        out = np.where(c.support_mask, out, 0)
    if c.real_valued:
        out = np.real(out)
    if c.non_negative:
        out = np.maximum(out, 0.0)
    return np.array(out)


def apply_phase(
    op: MeasurementOperator, y_target: np.ndarray, z: np.ndarray
) -> np.ndarray:
    """Back-project target magnitudes carrying the phase of Az.

    Returns A^+ (y_target * Az/|Az|), with the phase factor defined as 1
    on bins where |Az| = 0.
    """
    f = forward(op, z)
    mag = np.abs(f)
    zero = mag == 0.0
    phase = np.where(zero, 1.0 + 0.0j, f / np.where(zero, 1.0, mag))
    return pseudoinverse(op, y_target * phase)


def er_run(
    op: MeasurementOperator,
    y: np.ndarray,
    z0: np.ndarray,
    iters: int,
    c: SpaceConstraints,
) -> np.ndarray:
    """Error reduction: alternate phase application and space projection."""
    if iters < 0:
        raise ValueError("iteration count must be non-negative")
    x = np.array(z0)
    for _ in range(iters):
        x = project_space(apply_phase(op, y, x), c)
    return x


def hio_iterate(
    op: MeasurementOperator,
    y: np.ndarray,
    v_prev: np.ndarray,
    c: SpaceConstraints,
    beta: float,
) -> np.ndarray:
    """One hybrid input-output step.

    The magnitude projection is computed as in ER (with hard real-part
    extraction when the image is constrained real); pixels violating the
    remaining constraints (strictly negative under non-negativity, nonzero
    outside the support) receive the feedback update
    ``v_prev - beta * u`` instead of the projected value ``u``.
    """
    u = apply_phase(op, y, v_prev)
    if c.real_valued:
        u = np.real(u)
    violating = np.zeros(u.shape, dtype=bool)
    if c.support_mask is not None:
        violating |= ~c.support_mask & (u != 0)
    if c.non_negative:
        violating |= u < 0
    return np.where(violating, v_prev - beta * u, u)


def hio_run(
    op: MeasurementOperator,
    y: np.ndarray,
    z0: np.ndarray,
    iters: int,
    beta: float,
    c: SpaceConstraints,
) -> np.ndarray:
    """Run `iters` HIO steps from z0. The final iterate is returned as-is,
    without a terminal feasibility projection."""
    if iters < 1:
        raise ValueError("iteration count must be at least 1")
    v = np.array(z0)
    for _ in range(iters):
        v = hio_iterate(op, y, v, c, beta)
    return v
