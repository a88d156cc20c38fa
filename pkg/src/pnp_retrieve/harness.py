"""Experiment configuration, Monte-Carlo runner, and results persistence.

An experiment sweeps (image, alpha, mc-repetition) cells. Each cell
simulates one noisy measurement, computes one shared multi-start HIO
initialization, runs every configured method from that same starting
point, and appends one result row per method. Outputs are rows.csv,
per-run trace CSVs, and a summary table (mean +/- sample std per
method and alpha). Everything is deterministic given (config, master
seed) except the runtime columns.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classic import SpaceConstraints, er_run
from .denoisers import DenoiserSpec
from .imageio import read_image
from .measurement import (
    MeasurementOperator,
    cdp_operator,
    fourier_operator,
    random_cdp_masks,
    simulate_measurement,
)
from .metrics import evaluate
from .multistart import InitConfig, multistart_init
from .pnp import PnPConfig, RunRecord, pnp_hio_run, pnp_pr_run
from .schedules import Schedule, build_schedule

__all__ = [
    "ConfigError",
    "MethodSpec",
    "ExperimentConfig",
    "ResultRow",
    "load_config",
    "config_from_dict",
    "run_experiment",
    "write_results",
    "aggregate",
    "summarize",
]

log = logging.getLogger("pnp_retrieve")

METHOD_NAMES = ("hio", "er", "pnp-pr", "pnp-hio")

ROWS_HEADER = "image,method,alpha,mc,psnr_db,ssim,residual,runtime_s,seed"
TRACE_HEADER = "iter,norm_diff,residual,psnr_db"
SUMMARY_HEADER = (
    "method,alpha,rows,psnr_db_mean,psnr_db_std,ssim_mean,ssim_std,"
    "residual_mean,runtime_s_mean"
)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class MethodSpec:
    """One reconstruction method plus its solver parameters."""

    name: str
    iterations: int = 1000  # er only
    inner_iterations: int = 5  # pnp-hio only
    beta: float = 0.9
    schedule: Schedule = field(default_factory=lambda: build_schedule(40.0, 5.0, 200))
    denoiser: DenoiserSpec = field(default_factory=DenoiserSpec)

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ConfigError(f"unknown method {self.name!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Path
    image_size: int
    alphas: tuple
    methods: tuple
    mc_runs: int
    init: InitConfig
    master_seed: int
    output_dir: Path
    constraints: SpaceConstraints = field(default_factory=SpaceConstraints)
    operator_kind: str = "fourier"
    cdp_masks: int = 2
    register_metrics: bool = True

    def __post_init__(self):
        if not self.alphas:
            raise ConfigError("alphas must be non-empty")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        if self.mc_runs < 1:
            raise ConfigError("mc_runs must be at least 1")
        if any(a < 0 for a in self.alphas):
            raise ConfigError("alpha values must be non-negative")


@dataclass
class ResultRow:
    image: str
    method: str
    alpha: float
    mc: int
    psnr_db: float
    ssim: float
    residual: float
    runtime_s: float
    seed: int


def _schedule_from_dict(d: dict) -> Schedule:
    try:
        return build_schedule(
            float(d.get("sigma_max", 40.0)),
            float(d.get("sigma_min", 5.0)),
            int(d.get("t", d.get("T", 200))),
            levels=d.get("levels"),
        )
    except ValueError as err:
        raise ConfigError(f"bad schedule: {err}") from err


def _denoiser_from_dict(d: dict) -> DenoiserSpec:
    try:
        return DenoiserSpec(**d)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad denoiser spec: {err}") from err


def _method_from_dict(d: dict) -> MethodSpec:
    d = dict(d)
    if "schedule" in d:
        d["schedule"] = _schedule_from_dict(d["schedule"])
    if "denoiser" in d:
        d["denoiser"] = _denoiser_from_dict(d["denoiser"])
    try:
        return MethodSpec(**d)
    except TypeError as err:
        raise ConfigError(f"bad method spec: {err}") from err


def config_from_dict(d: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed JSON document."""
    try:
        dataset = base_dir / d["dataset"]
        methods = tuple(_method_from_dict(m) for m in d["methods"])
        constraints_d = d.get("constraints", {})
        constraints = SpaceConstraints(
            real_valued=bool(constraints_d.get("real_valued", True)),
            non_negative=bool(constraints_d.get("non_negative", True)),
        )
        init_d = d.get("init", {})
        init = InitConfig(
            n_starts=int(init_d.get("n_starts", 50)),
            warm_iters=int(init_d.get("warm_iters", 50)),
            refine_iters=int(init_d.get("refine_iters", 1000)),
            beta=float(init_d.get("beta", 0.9)),
        )
        operator_d = d.get("operator", {})
        return ExperimentConfig(
            dataset=dataset,
            image_size=int(d.get("image_size", 64)),
            alphas=tuple(float(a) for a in d["alphas"]),
            methods=methods,
            mc_runs=int(d.get("mc_runs", 5)),
            init=init,
            master_seed=int(d.get("master_seed", 0)),
            output_dir=base_dir / d.get("output_dir", "results"),
            constraints=constraints,
            operator_kind=operator_d.get("kind", "fourier"),
            cdp_masks=int(operator_d.get("masks", 2)),
            register_metrics=bool(
                d.get("register_metrics", operator_d.get("kind", "fourier") == "fourier")
            ),
        )
    except KeyError as err:
        raise ConfigError(f"missing config key: {err}") from err
    except (TypeError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(str(err)) from err


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return config_from_dict(doc, base_dir=path.parent)


def _make_operator(cfg: ExperimentConfig) -> MeasurementOperator:
    if cfg.operator_kind == "fourier":
        return fourier_operator(cfg.image_size)
    if cfg.operator_kind == "cdp":
        masks = random_cdp_masks(cfg.image_size, cfg.cdp_masks, [cfg.master_seed, 977])
        return cdp_operator(cfg.image_size, masks)
    raise ConfigError(f"unknown operator kind {cfg.operator_kind!r}")


def run_method(
    method: MethodSpec,
    op: MeasurementOperator,
    y: np.ndarray,
    z0: np.ndarray,
    constraints: SpaceConstraints,
    truth: np.ndarray | None = None,
    register: bool = True,
):
    """Run one method from the shared initialization.

    Returns (estimate, RunRecord or None, solve seconds). The hio method
    returns the initialization itself (its solve already happened there).
    """
    t0 = time.perf_counter()
    record = None
    if method.name == "hio":
        estimate = z0
    elif method.name == "er":
        estimate = er_run(op, y, z0, method.iterations, constraints)
    else:
        pnp_cfg = PnPConfig(
            schedule=method.schedule,
            denoiser=method.denoiser,
            constraints=constraints,
            inner_iterations=method.inner_iterations,
            beta=method.beta,
        )
        runner = pnp_pr_run if method.name == "pnp-pr" else pnp_hio_run
        estimate, record = runner(
            op, y, z0, pnp_cfg, truth=truth, register_psnr=register
        )
    return estimate, record, time.perf_counter() - t0


def _list_images(cfg: ExperimentConfig) -> list[Path]:
    if not cfg.dataset.is_dir():
        raise ConfigError(f"dataset directory {cfg.dataset} not found")
    paths = sorted(
        p
        for p in cfg.dataset.iterdir()
        if p.suffix.lower() in (".pgm", ".png", ".prf")
    )
    if not paths:
        raise ConfigError(f"no images found under {cfg.dataset}")
    return paths


def run_experiment(cfg: ExperimentConfig):
    """Run the full sweep; returns (rows, traces, failure count).

    traces maps run-id -> RunRecord for methods that produce one. Rows for
    failed methods carry nan metrics and are skipped in the summary.
    """
    op = _make_operator(cfg)
    rows: list[ResultRow] = []
    traces: dict[str, RunRecord] = {}
    failures = 0
    for img_idx, path in enumerate(_list_images(cfg)):
        try:
            truth = read_image(path, size=cfg.image_size)
        except (OSError, ValueError) as err:
            log.warning("skipping unreadable image %s: %s", path, err)
            continue
        for a_idx, alpha in enumerate(cfg.alphas):
            for mc in range(cfg.mc_runs):
                seeds = np.random.SeedSequence(
                    [cfg.master_seed, img_idx, a_idx, mc]
                ).generate_state(2, np.uint64)
                sim_seed, init_seed = int(seeds[0]), int(seeds[1])
                meas = simulate_measurement(op, truth, alpha, sim_seed)
                t0 = time.perf_counter()
                init_cfg = InitConfig(
                    n_starts=cfg.init.n_starts,
                    warm_iters=cfg.init.warm_iters,
                    refine_iters=cfg.init.refine_iters,
                    beta=cfg.init.beta,
                    seed=init_seed,
                )
                z0, _ = multistart_init(op, meas.values, init_cfg, cfg.constraints)
                init_seconds = time.perf_counter() - t0
                for method in cfg.methods:
                    run_id = f"{path.stem}_{method.name}_a{alpha:g}_mc{mc}"
                    try:
                        estimate, record, solve_seconds = run_method(
                            method,
                            op,
                            meas.values,
                            z0,
                            cfg.constraints,
                            truth=truth,
                            register=cfg.register_metrics,
                        )
                    except Exception as err:
                        failures += 1
                        log.warning("method %s failed on %s: %s", method.name, run_id, err)
                        record = getattr(err, "record", None)
                        if record is not None:
                            traces[run_id] = record
                        rows.append(
                            ResultRow(
                                image=path.stem,
                                method=method.name,
                                alpha=alpha,
                                mc=mc,
                                psnr_db=np.nan,
                                ssim=np.nan,
                                residual=np.nan,
                                runtime_s=np.nan,
                                seed=sim_seed,
                            )
                        )
                        continue
                    report = evaluate(
                        np.real(estimate),
                        truth,
                        op=op,
                        y=meas.values,
                        register=cfg.register_metrics,
                    )
                    if record is not None:
                        traces[run_id] = record
                    rows.append(
                        ResultRow(
                            image=path.stem,
                            method=method.name,
                            alpha=alpha,
                            mc=mc,
                            psnr_db=report.psnr_db,
                            ssim=report.ssim,
                            residual=report.residual,
                            runtime_s=init_seconds + solve_seconds,
                            seed=sim_seed,
                        )
                    )
    return rows, traces, failures


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6g}"


def aggregate(rows: list[ResultRow]) -> list[dict]:
    """Per-(method, alpha) aggregates over non-failed rows.

    Means are over all rows of the group; the spread is the sample
    standard deviation of the per-repetition means (mean +/- spread over
    Monte-Carlo repetitions). Single-repetition groups report nan spread.
    """
    groups: dict[tuple, list[ResultRow]] = {}
    order: list[tuple] = []
    for row in rows:
        key = (row.method, row.alpha)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    out = []
    for method, alpha in order:
        ok = [r for r in groups[(method, alpha)] if np.isfinite(r.psnr_db)]
        entry = {"method": method, "alpha": alpha, "rows": len(ok)}
        if not ok:
            entry.update(
                psnr_db_mean=np.nan, psnr_db_std=np.nan, ssim_mean=np.nan,
                ssim_std=np.nan, residual_mean=np.nan, runtime_s_mean=np.nan,
            )
            out.append(entry)
            continue
        mcs = sorted({r.mc for r in ok})
        mc_psnr = [np.mean([r.psnr_db for r in ok if r.mc == m]) for m in mcs]
        mc_ssim = [np.mean([r.ssim for r in ok if r.mc == m]) for m in mcs]
        entry.update(
            psnr_db_mean=np.mean([r.psnr_db for r in ok]),
            psnr_db_std=np.std(mc_psnr, ddof=1) if len(mcs) > 1 else np.nan,
            ssim_mean=np.mean([r.ssim for r in ok]),
            ssim_std=np.std(mc_ssim, ddof=1) if len(mcs) > 1 else np.nan,
            residual_mean=np.mean([r.residual for r in ok]),
            runtime_s_mean=np.mean([r.runtime_s for r in ok]),
        )
        out.append(entry)
    return out


def summarize(rows: list[ResultRow]) -> list[str]:
    """Format the aggregates as summary CSV lines (without header)."""
    lines = []
    for entry in aggregate(rows):
        lines.append(
            ",".join(
                [
                    entry["method"],
                    _fmt(entry["alpha"]),
                    str(entry["rows"]),
                    _fmt(entry["psnr_db_mean"]),
                    _fmt(entry["psnr_db_std"]),
                    _fmt(entry["ssim_mean"]),
                    _fmt(entry["ssim_std"]),
                    _fmt(entry["residual_mean"]),
                    _fmt(entry["runtime_s_mean"]),
                ]
            )
        )
    return lines


def write_results(rows: list[ResultRow], traces: dict, out_dir) -> dict:
    """Write rows.csv, traces/<run-id>.csv, and summary.csv.

    Numeric cells use 6 significant digits, '.' decimals, '\\n' endings.
    Returns the written paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows_path = out_dir / "rows.csv"
    lines = [ROWS_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    r.image,
                    r.method,
                    _fmt(r.alpha),
                    str(r.mc),
                    _fmt(r.psnr_db),
                    _fmt(r.ssim),
                    _fmt(r.residual),
                    _fmt(r.runtime_s),
                    str(r.seed),
                ]
            )
        )
    rows_path.write_text("\n".join(lines) + "\n")

    trace_dir = out_dir / "traces"
    trace_paths = []
    if traces:
        trace_dir.mkdir(exist_ok=True)
    for run_id, record in traces.items():
        path = trace_dir / f"{run_id}.csv"
        tlines = [TRACE_HEADER]
        for k in range(len(record.norm_diff)):
            psnr_cell = (
                _fmt(record.psnr_db[k]) if record.psnr_db is not None else ""
            )
            tlines.append(
                f"{k},{_fmt(record.norm_diff[k])},"
                f"{_fmt(record.residual[k])},{psnr_cell}"
            )
        path.write_text("\n".join(tlines) + "\n")
        trace_paths.append(path)

    summary_path = out_dir / "summary.csv"
    summary_path.write_text(
        "\n".join([SUMMARY_HEADER] + summarize(rows)) + "\n"
    )
    return {"rows": rows_path, "summary": summary_path, "traces": trace_paths}
