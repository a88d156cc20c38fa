"""Image and raw-array file formats.

Display-range images use binary PGM (P5, 8-bit, maxval 255). Measurements
and float intermediates use a raw little-endian float32 format with a
16-byte header: magic "PRF1", u32 width, u32 height, u32 channels, followed
by channels * height * width float32 values (plane-major, rows within a
plane). 8-bit grayscale PNG is accepted on read.
"""

import struct
from pathlib import Path

import numpy as np

__all__ = [
    "read_pgm",
    "write_pgm",
    "read_prf",
    "write_prf",
    "read_image",
    "center_crop",
]

PRF_MAGIC = b"PRF1"


class FormatError(ValueError):
    """Malformed or unsupported image file."""


def _pgm_tokens(data: bytes):
    # Header tokens are whitespace-separated; '#' starts a comment line.
    pos = 0
    while True:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        yield data[start:pos], pos


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM into a float64 array in [0, 255]."""
    data = Path(path).read_bytes()
    tokens = _pgm_tokens(data)
    magic, _ = next(tokens)
    if magic != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {magic!r})")
    (width, _), (height, _), (maxval, pos) = (next(tokens) for _ in range(3))
    width, height, maxval = int(width), int(height), int(maxval)
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: non-positive dimensions")
    payload = data[pos + 1 : pos + 1 + width * height]
    if len(payload) != width * height:
        raise FormatError(f"{path}: truncated pixel payload")
    return (
        np.frombuffer(payload, dtype=np.uint8)
        .reshape(height, width)
        .astype(float)
    )


def write_pgm(path, image: np.ndarray) -> None:
    """Write a real image as binary PGM, rounding and clipping to [0, 255]."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM output requires a 2D image")
    quantized = np.clip(np.rint(np.real(image)), 0, 255).astype(np.uint8)
    height, width = quantized.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(quantized.tobytes())


def read_prf(path) -> np.ndarray:
    """Read a PRF1 float32 raw file; returns (h, w) or (channels, h, w)."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != PRF_MAGIC:
        raise FormatError(f"{path}: missing PRF1 header")
    width, height, channels = struct.unpack("<III", data[4:16])
    if width <= 0 or height <= 0 or channels <= 0:
        raise FormatError(f"{path}: non-positive dimensions")
    count = width * height * channels
    payload = data[16 : 16 + 4 * count]
    if len(payload) != 4 * count:
        raise FormatError(f"{path}: truncated payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(channels, height, width)
    return values[0] if channels == 1 else values


def write_prf(path, values: np.ndarray) -> None:
    """Write a float array (h, w) or (channels, h, w) as PRF1 float32."""
    values = np.asarray(values, dtype="<f4")
    if values.ndim == 2:
        values = values[None]
    if values.ndim != 3:
        raise ValueError("PRF output requires a 2D or 3D array")
    channels, height, width = values.shape
    with open(path, "wb") as fh:
        fh.write(PRF_MAGIC + struct.pack("<III", width, height, channels))
        fh.write(np.ascontiguousarray(values).tobytes())


def center_crop(image: np.ndarray, size: int) -> np.ndarray:
    if min(image.shape[:2]) < size:
        raise ValueError(
            f"image {image.shape} smaller than requested crop {size}"
        )
    top = (image.shape[0] - size) // 2
    left = (image.shape[1] - size) // 2
    return image[top : top + size, left : left + size]


def read_image(path, size: int | None = None) -> np.ndarray:
    """Read a grayscale image (PGM, PRF1, or PNG), optionally center-cropped."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        image = read_pgm(path)
    elif suffix == ".prf":
        image = np.asarray(read_prf(path), dtype=float)
        if image.ndim != 2:
            raise FormatError(f"{path}: multi-channel PRF is not an image")
    elif suffix == ".png":
        from PIL import Image

        with Image.open(path) as img:
            image = np.asarray(img.convert("L"), dtype=float)
    else:
        raise FormatError(f"{path}: unsupported image format {suffix!r}")
    if size is not None:
        image = center_crop(image, size)
    return image
