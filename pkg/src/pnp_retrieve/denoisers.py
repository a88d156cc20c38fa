"""Pluggable Gaussian denoisers and the external-denoiser wire client.

Every denoiser is a map (image, sigma) -> image where sigma is the assumed
noise standard deviation in display units [0, 255]. sigma = 0 is the exact
identity for every kind. Complex images are denoised component-wise (real
and imaginary parts independently).

In-process kinds: identity, gaussian-smoothing, median, total-variation.
The "external" kind talks to an out-of-process denoiser over TCP using
length-implied binary frames:

    request:  b"PNPD" | u32 width | u32 height | f32 sigma | w*h f32 pixels
    response: b"PNPR" | u32 width | u32 height | w*h f32 pixels
    error:    b"PNPE" | u32 byte-length | UTF-8 message

All integers and floats are little-endian; pixels are row-major float32.
One request is in flight per connection at a time.
"""

import os
import socket
import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

__all__ = [
    "DenoiserSpec",
    "Denoiser",
    "ExternalDenoiserError",
    "ExternalDenoiserClient",
    "denoise",
    "tv_denoise",
    "external_denoise",
    "resolve_denoiser",
    "encode_request",
    "REQUEST_MAGIC",
    "RESPONSE_MAGIC",
    "ERROR_MAGIC",
    "ADDR_ENV_VAR",
]

REQUEST_MAGIC = b"PNPD"
RESPONSE_MAGIC = b"PNPR"
ERROR_MAGIC = b"PNPE"
ADDR_ENV_VAR = "PNP_DENOISER_ADDR"

KINDS = ("identity", "gaussian-smoothing", "median", "total-variation", "external")


@dataclass(frozen=True)
class DenoiserSpec:
    """Denoiser kind plus its sigma-to-parameter maps.

    tv_weight: total-variation weight is tv_weight * sigma.
    blur_scale: gaussian blur std in pixels is blur_scale * sigma.
    median_step: median window half-width grows by 1 per median_step of sigma.
    endpoint: "host:port" for the external kind (falls back to the
        PNP_DENOISER_ADDR environment variable).

    The tv_weight and blur_scale defaults were tuned once on held-out
    synthetic images at noise scale 3 and are left fixed everywhere.
    """

    kind: str = "total-variation"
    tv_weight: float = 1.5
    blur_scale: float = 0.15
    median_step: float = 15.0
    endpoint: str | None = None
    timeout: float = 30.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown denoiser kind {self.kind!r}")
        if self.tv_weight <= 0 or self.blur_scale <= 0 or self.median_step <= 0:
            raise ValueError("sigma-to-parameter coefficients must be positive")


def tv_denoise(
    x: np.ndarray,
    sigma: float,
    weight: float,
    tol: float = 1e-4,
    max_iter: int = 300,
) -> np.ndarray:
    """Isotropic total-variation denoising (dual projection scheme).

    Returns the minimizer of 0.5*||z - x||^2 + lam*TV(z) with
    lam = weight * sigma, where TV uses forward differences with
    replicated edges. Iterates the dual variable until the relative l2
    change of the primal estimate drops below `tol`.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if weight <= 0:
        raise ValueError("weight must be positive")
    x = np.asarray(x, dtype=float)
    if sigma == 0:
        return x.copy()
    lam = weight * sigma
    tau = 0.25
    px = np.zeros_like(x)
    py = np.zeros_like(x)
    z = x.copy()
    x_scale = max(np.linalg.norm(x), 1e-12)
    for _ in range(max_iter):
        d = _divergence(px, py) - x / lam
        gx, gy = _gradient(d)
        norm = np.sqrt(gx**2 + gy**2)
        px = (px + tau * gx) / (1.0 + tau * norm)
        py = (py + tau * gy) / (1.0 + tau * norm)
        z_new = x - lam * _divergence(px, py)
        change = np.linalg.norm(z_new - z)
        z = z_new
        if change <= tol * x_scale:
            break
    return z


def _gradient(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = np.zeros_like(z)
    gy = np.zeros_like(z)
    gx[:, :-1] = z[:, 1:] - z[:, :-1]
    gy[:-1, :] = z[1:, :] - z[:-1, :]
    return gx, gy


def _divergence(px: np.ndarray, py: np.ndarray) -> np.ndarray:
    div = np.zeros_like(px)
    div[:, 0] += px[:, 0]
    div[:, 1:-1] += px[:, 1:-1] - px[:, :-2]
    div[:, -1] += -px[:, -2]
    div[0, :] += py[0, :]
    div[1:-1, :] += py[1:-1, :] - py[:-2, :]
    div[-1, :] += -py[-2, :]
    return div


class ExternalDenoiserError(RuntimeError):
    """Raised on connection, timeout, or protocol failures of the external kind."""


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        try:
            chunk = sock.recv(remaining)
        except socket.timeout as err:
            raise ExternalDenoiserError(
                f"timed out waiting for {remaining} of {n} bytes"
            ) from err
        if not chunk:
            raise ExternalDenoiserError(
                f"peer closed connection with {remaining} of {n} bytes pending"
            )
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def encode_request(x: np.ndarray, sigma: float) -> bytes:
    """Serialize one denoising request frame."""
    h, w = x.shape
    header = REQUEST_MAGIC + struct.pack("<IIf", w, h, sigma)
    return header + np.ascontiguousarray(x, dtype="<f4").tobytes()


class ExternalDenoiserClient:
    """Connection-owning client for a remote denoiser.

    One request is in flight per connection; open independent clients for
    parallel use. Usable as a context manager.
    """

    def __init__(self, address: str | None = None, timeout: float = 30.0):
        address = address or os.environ.get(ADDR_ENV_VAR)
        if not address:
            raise ExternalDenoiserError(
                "no denoiser endpoint configured "
                f"(pass host:port or set {ADDR_ENV_VAR})"
            )
        host, sep, port = address.rpartition(":")
        if not sep or not host:
            raise ExternalDenoiserError(f"malformed endpoint {address!r}")
        self.address = address
        try:
            self._sock = socket.create_connection(
                (host, int(port)), timeout=timeout
            )
        except OSError as err:
            raise ExternalDenoiserError(
                f"cannot connect to denoiser at {address}: {err}"
            ) from err

    def denoise(self, x: np.ndarray, sigma: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise ValueError("external denoiser takes a 2D image")
        try:
            self._sock.sendall(encode_request(x, float(sigma)))
        except OSError as err:
            raise ExternalDenoiserError(
                f"send failed to {self.address}: {err}"
            ) from err
        magic = _recv_exact(self._sock, 4)
        if magic == ERROR_MAGIC:
            (length,) = struct.unpack("<I", _recv_exact(self._sock, 4))
            message = _recv_exact(self._sock, length).decode("utf-8", "replace")
            raise ExternalDenoiserError(f"denoiser error: {message}")
        if magic != RESPONSE_MAGIC:
            raise ExternalDenoiserError(
                f"malformed response magic {magic!r} from {self.address}"
            )
        w, h = struct.unpack("<II", _recv_exact(self._sock, 8))
        if (h, w) != x.shape:
            raise ExternalDenoiserError(
                f"response shape {h}x{w} does not match request "
                f"{x.shape[0]}x{x.shape[1]}"
            )
        payload = _recv_exact(self._sock, 4 * w * h)
        out = np.frombuffer(payload, dtype="<f4").reshape(h, w).astype(float)
        if not np.all(np.isfinite(out)):
            raise ExternalDenoiserError("response contains non-finite pixels")
        return out

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_denoise(endpoint: str, x: np.ndarray, sigma: float) -> np.ndarray:
    """One-shot denoising round trip over a fresh connection."""
    with ExternalDenoiserClient(endpoint) as client:
        return client.denoise(x, sigma)


class Denoiser:
    """Resolved denoiser: callable (x, sigma) -> x with uniform edge handling.

    Handles the sigma = 0 identity and component-wise complex dispatch for
    every backend; validates output shape and finiteness.
    """

    def __init__(self, fn, closer=None):
        self._fn = fn
        self._closer = closer

    def __call__(self, x: np.ndarray, sigma: float) -> np.ndarray:
        if sigma < 0:
            raise ValueError("sigma must be non-negative")
        x = np.asarray(x)
        if np.iscomplexobj(x):
            return self(x.real, sigma) + 1j * self(x.imag, sigma)
        if sigma == 0:
            return x.copy()
        out = self._fn(np.asarray(x, dtype=float), float(sigma))
        if out.shape != x.shape:
            raise ValueError(
                f"denoiser changed image shape {x.shape} -> {out.shape}"
            )
        return out

    def close(self) -> None:
        if self._closer is not None:
            self._closer()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def resolve_denoiser(spec: DenoiserSpec) -> Denoiser:
    """Instantiate the backend for a spec.

    The external kind opens its connection here; callers own the returned
    object and should close it (or use it as a context manager).
    """
    if spec.kind == "identity":
        return Denoiser(lambda x, s: x.copy())
    if spec.kind == "gaussian-smoothing":
        return Denoiser(
            lambda x, s: ndimage.gaussian_filter(
                x, sigma=spec.blur_scale * s, mode="wrap"
            )
        )
    if spec.kind == "median":
        def _median(x, s):
            size = 2 * int(np.ceil(s / spec.median_step)) + 1
            if size <= 1:
                return x.copy()
            return ndimage.median_filter(x, size=size, mode="wrap")
        return Denoiser(_median)
    if spec.kind == "total-variation":
        return Denoiser(lambda x, s: tv_denoise(x, s, spec.tv_weight))
    client = ExternalDenoiserClient(spec.endpoint, timeout=spec.timeout)
    return Denoiser(client.denoise, closer=client.close)


def denoise(spec: DenoiserSpec, x: np.ndarray, sigma: float) -> np.ndarray:
    """One-shot dispatch by kind (external kind connects per call)."""
    with resolve_denoiser(spec) as backend:
        return backend(x, sigma)
