"""Deterministic synthetic grayscale test images.

Piecewise-smooth scenes (shaded background plus a handful of painted
ellipses and rectangles, lightly blurred) in the display range [0, 255].
They stand in for natural-image datasets in desk-scale benchmarks.
"""

from pathlib import Path

import numpy as np
from scipy import ndimage

from .imageio import write_pgm

__all__ = ["make_phantom", "make_dataset"]


def make_phantom(size: int, seed, texture: float = 22.0) -> np.ndarray:
    """One synthetic image, fully determined by (size, seed).

    `texture` scales a two-scale band-limited random field added over the
    whole frame; it is what keeps these images from being trivially
    piecewise-constant. Set it to 0 for a flat cartoon scene.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)

    angle = rng.uniform(0, 2 * np.pi)
    ramp = np.cos(angle) * xx + np.sin(angle) * yy
    img = rng.uniform(40, 110) + rng.uniform(-50, 50) * ramp
    cx, cy = rng.uniform(0.2, 0.8, size=2)
    width = rng.uniform(0.2, 0.5)
    img += rng.uniform(-40, 60) * np.exp(
        -((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * width**2)
    )

    for _ in range(rng.integers(4, 8)):
        level = rng.uniform(15, 245)
        cx, cy = rng.uniform(0.1, 0.9, size=2)
        if rng.uniform() < 0.5:
            rx, ry = rng.uniform(0.06, 0.28, size=2)
            theta = rng.uniform(0, np.pi)
            u = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
            v = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
            region = (u / rx) ** 2 + (v / ry) ** 2 <= 1.0
        else:
            hx, hy = rng.uniform(0.05, 0.25, size=2)
            region = (np.abs(xx - cx) <= hx) & (np.abs(yy - cy) <= hy)
        if rng.uniform() < 0.7:
            img[region] = level
        else:
            img[region] += level - img[region].mean()

    if texture > 0:
        fine = ndimage.gaussian_filter(rng.normal(0, 1, (size, size)), sigma=0.8)
        coarse = ndimage.gaussian_filter(rng.normal(0, 1, (size, size)), sigma=2.5)
        field = fine + 0.5 * coarse
        img += texture * field / field.std()
    return np.clip(img, 0.0, 255.0)


def make_dataset(directory, count: int, size: int, seed: int) -> list:
    """Write `count` phantom PGMs into `directory`; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        path = directory / f"phantom_{i:02d}.pgm"
        write_pgm(path, make_phantom(size, [seed, i]))
        paths.append(path)
    return paths
