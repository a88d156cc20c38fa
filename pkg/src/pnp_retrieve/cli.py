"""Command-line interface.

Subcommands:
    run          execute an experiment config (JSON) and write CSV results
    simulate     simulate a noisy magnitude measurement from an image
    reconstruct  recover an image from a measurement file
    make-dataset write a small synthetic phantom dataset

Exit codes: 0 success, 2 configuration error, 3 completed with failures.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .classic import SpaceConstraints
from .denoisers import ADDR_ENV_VAR, DenoiserSpec
from .harness import ConfigError, MethodSpec, run_method
from .imageio import read_image, read_prf, write_pgm, write_prf
from .measurement import fourier_operator, simulate_measurement
from .multistart import InitConfig, multistart_init
from .phantoms import make_dataset
from .schedules import build_schedule


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnp-retrieve",
        description="Phase retrieval solvers and benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--alpha", type=float, action="append",
                       help="override noise levels (repeatable)")
    p_run.add_argument("--method", action="append",
                       help="restrict to these method names (repeatable)")
    p_run.add_argument("--seed", type=int, help="override the master seed")
    p_run.add_argument("--out", type=Path, help="override the output directory")
    p_run.add_argument("--denoiser-addr",
                       help="endpoint for external denoisers (host:port)")

    p_sim = sub.add_parser("simulate", help="simulate a noisy measurement")
    p_sim.add_argument("--image", type=Path, required=True)
    p_sim.add_argument("--alpha", type=float, default=3.0)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--size", type=int, help="center-crop the image first")
    p_sim.add_argument("--out", type=Path, required=True)

    p_rec = sub.add_parser("reconstruct", help="reconstruct from a measurement")
    p_rec.add_argument("--input", type=Path, required=True,
                       help="PRF1 magnitude file (M x M, fourier operator)")
    p_rec.add_argument("--method", required=True, choices=harness.METHOD_NAMES)
    p_rec.add_argument("--out", type=Path, required=True)
    p_rec.add_argument("--trace", type=Path, help="write the iteration trace CSV")
    p_rec.add_argument("--seed", type=int, default=0)
    p_rec.add_argument("--starts", type=int, default=50)
    p_rec.add_argument("--warm-iters", type=int, default=50)
    p_rec.add_argument("--refine-iters", type=int, default=1000)
    p_rec.add_argument("--iterations", type=int, default=1000,
                       help="er iteration count")
    p_rec.add_argument("--outer-iterations", "-T", type=int, default=200)
    p_rec.add_argument("--inner-iterations", "-L", type=int, default=5)
    p_rec.add_argument("--beta", type=float, default=0.9)
    p_rec.add_argument("--sigma-max", type=float, default=40.0)
    p_rec.add_argument("--sigma-min", type=float, default=5.0)
    p_rec.add_argument("--denoiser", default="total-variation",
                       choices=("identity", "gaussian-smoothing", "median",
                                "total-variation", "external"))
    p_rec.add_argument("--tv-weight", type=float, default=0.08)
    p_rec.add_argument("--denoiser-addr",
                       help=f"external denoiser endpoint (or ${ADDR_ENV_VAR})")

    p_ds = sub.add_parser("make-dataset", help="write synthetic phantom images")
    p_ds.add_argument("--out", type=Path, required=True)
    p_ds.add_argument("--count", type=int, default=5)
    p_ds.add_argument("--size", type=int, default=64)
    p_ds.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_run(args) -> int:
    doc = json.loads(args.config.read_text())
    if args.alpha:
        doc["alphas"] = args.alpha
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.out is not None:
        doc["output_dir"] = str(args.out)
    if args.method:
        configured = {m.get("name"): m for m in doc.get("methods", [])}
        doc["methods"] = [
            configured.get(name, {"name": name}) for name in args.method
        ]
    if args.denoiser_addr:
        for m in doc.get("methods", []):
            if m.get("denoiser", {}).get("kind") == "external":
                m["denoiser"]["endpoint"] = args.denoiser_addr
    cfg = harness.config_from_dict(doc, base_dir=args.config.parent)
    rows, traces, failures = harness.run_experiment(cfg)
    paths = harness.write_results(rows, traces, cfg.output_dir)
    print(f"wrote {paths['rows']} ({len(rows)} rows, {failures} failures)")
    print(paths["summary"].read_text(), end="")
    return 3 if failures else 0


def _cmd_simulate(args) -> int:
    image = read_image(args.image, size=args.size)
    if image.shape[0] != image.shape[1]:
        raise ConfigError("image must be square (pass --size to crop)")
    op = fourier_operator(image.shape[0])
    meas = simulate_measurement(op, image, args.alpha, args.seed)
    write_prf(args.out, meas.values)
    print(
        f"wrote {args.out}: {op.m}x{op.m} magnitudes, alpha={args.alpha:g}, "
        f"seed={args.seed}, snr={meas.snr_db:.4g} dB "
        f"(power convention {meas.snr_power_db:.4g} dB)"
    )
    return 0


def _cmd_reconstruct(args) -> int:
    y = np.asarray(read_prf(args.input), dtype=float)
    if y.ndim != 2 or y.shape[0] != y.shape[1] or y.shape[0] % 2:
        raise ConfigError("expected a square single-channel M x M measurement")
    op = fourier_operator(y.shape[0] // 2)
    constraints = SpaceConstraints(real_valued=True, non_negative=True)
    init_cfg = InitConfig(
        n_starts=args.starts,
        warm_iters=args.warm_iters,
        refine_iters=args.refine_iters,
        beta=args.beta,
        seed=args.seed,
    )
    z0, _ = multistart_init(op, y, init_cfg, constraints)
    method = MethodSpec(
        name=args.method,
        iterations=args.iterations,
        inner_iterations=args.inner_iterations,
        beta=args.beta,
        schedule=build_schedule(args.sigma_max, args.sigma_min,
                                args.outer_iterations),
        denoiser=DenoiserSpec(
            kind=args.denoiser,
            tv_weight=args.tv_weight,
            endpoint=args.denoiser_addr,
        ),
    )
    estimate, record, seconds = run_method(
        method, op, y, z0, constraints, truth=None
    )
    estimate = np.real(estimate)
    if args.out.suffix.lower() == ".prf":
        write_prf(args.out, estimate)
    else:
        write_pgm(args.out, estimate)
    if args.trace and record is not None:
        lines = [harness.TRACE_HEADER]
        for k in range(len(record.norm_diff)):
            lines.append(
                f"{k},{record.norm_diff[k]:.6g},{record.residual[k]:.6g},"
            )
        args.trace.write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out} ({args.method}, {seconds:.2f} s solve)")
    return 0


def _cmd_make_dataset(args) -> int:
    paths = make_dataset(args.out, args.count, args.size, args.seed)
    print(f"wrote {len(paths)} images under {args.out}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "simulate": _cmd_simulate,
        "reconstruct": _cmd_reconstruct,
        "make-dataset": _cmd_make_dataset,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, OSError, json.JSONDecodeError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
