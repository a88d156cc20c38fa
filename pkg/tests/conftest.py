import socket
import struct
import threading
import time

import pytest

from pnp_retrieve.denoisers import ERROR_MAGIC, REQUEST_MAGIC, RESPONSE_MAGIC


@pytest.fixture(scope="session")
def benchmark(tmp_path_factory):
    """Desk-scale benchmark at noise scale 3 through the full harness:
    5 synthetic 64x64 images x 5 Monte-Carlo repetitions, shared
    initialization, hio baseline plus both plug-and-play methods with the
    total-variation denoiser."""
    from pnp_retrieve.harness import config_from_dict, run_experiment, write_results
    from pnp_retrieve.phantoms import make_dataset

    base = tmp_path_factory.mktemp("benchmark")
    dataset = base / "images"
    make_dataset(dataset, count=5, size=64, seed=0)
    cfg = config_from_dict(
        {
            "dataset": str(dataset),
            "image_size": 64,
            "alphas": [3.0],
            "mc_runs": 5,
            "master_seed": 42,
            "output_dir": str(base / "results"),
            "methods": [
                {"name": "hio"},
                {"name": "pnp-pr", "denoiser": {"kind": "total-variation"}},
                {"name": "pnp-hio", "denoiser": {"kind": "total-variation"}},
            ],
        }
    )
    t0 = time.perf_counter()
    rows, traces, failures = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    write_results(rows, traces, cfg.output_dir)
    assert failures == 0
    return {"rows": rows, "traces": traces, "elapsed": elapsed, "dataset": dataset}


def read_exact(conn, n):
    buf = b""
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed")
        buf += chunk
    return buf


class PeerServer(threading.Thread):
    """Minimal in-test denoiser peer; `mode` selects its behavior:
    echo, error, garbage, wrong-shape, or silent (never answers)."""

    def __init__(self, mode="echo"):
        super().__init__(daemon=True)
        self.mode = mode
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(2)
        self.port = self.sock.getsockname()[1]
        self.start()

    @property
    def endpoint(self):
        return f"127.0.0.1:{self.port}"

    def run(self):
        try:
            while True:
                conn, _ = self.sock.accept()
                try:
                    while True:
                        magic = read_exact(conn, 4)
                        if magic != REQUEST_MAGIC:
                            break
                        w, h, _sigma = struct.unpack("<IIf", read_exact(conn, 12))
                        payload = read_exact(conn, 4 * w * h)
                        if self.mode == "echo":
                            conn.sendall(
                                RESPONSE_MAGIC + struct.pack("<II", w, h) + payload
                            )
                        elif self.mode == "error":
                            msg = "backend exploded".encode()
                            conn.sendall(
                                ERROR_MAGIC + struct.pack("<I", len(msg)) + msg
                            )
                        elif self.mode == "garbage":
                            conn.sendall(b"XXXX" + struct.pack("<II", w, h) + payload)
                        elif self.mode == "wrong-shape":
                            conn.sendall(
                                RESPONSE_MAGIC
                                + struct.pack("<II", w + 1, h)
                                + payload
                                + b"\x00" * (4 * h)
                            )
                        elif self.mode == "silent":
                            pass
                except (ConnectionError, OSError):
                    pass
                finally:
                    conn.close()
        except OSError:
            pass

    def close(self):
        self.sock.close()
