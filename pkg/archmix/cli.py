"""
Command-line front-end for archmix.

Provides:
- simulate: write simulated paths
- bound: write theoretical bound curves and their constants
- estimate: write empirical mixing estimates
- verify: run the identity suites (volterra, density, minimize-eta)
- sweep: bounds against estimates over a lag range
- report: plain-text summary of a sweep
"""

import argparse
import asyncio
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from bounds import bound_curve, verify_minimize_eta
from config import get_estimation_config, get_runtime_config
from density_analysis import verify_scale_mixture
from errors import ArchMixError, AssumptionViolatedError, SpecValidationError
from mixing_estimation import decay_fit, estimate_curve
from process_models import load_spec, parse_innovation, simulate_archinf, simulate_tvarch
from schemas import CheckRow, ExperimentConfig, InnovationModel, InnovationName, PathEnsemble, TvArchSpec
from volterra import random_archinf_specs, random_tvarch_specs, verify_identities

logger = logging.getLogger(__name__)

DENSITY_LAWS = ("exponential", "uniform", "chi2:3")


# ========== FORMATTING ==========


def _fmt(value: Any) -> str:
    """Fixed textual form: 17 significant digits for floats, empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _write_csv(path: Path, config_hash: str, header: Sequence[str], rows: Iterable[Sequence[Any]],
               comments: Sequence[str] = ()) -> None:
    with path.open("w", newline="") as f:
        f.write(f"# config_sha256={config_hash}\n")
        for line in comments:
            f.write(f"# {line}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    logger.info(f"✓ Wrote {path}")


def _output_dir(cfg: ExperimentConfig) -> Path:
    out = Path(get_runtime_config().out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ========== SHARED STEPS ==========


def _load(cfg: ExperimentConfig) -> Tuple[Any, InnovationModel]:
    if cfg.spec is None:
        raise SpecValidationError("spec", f"'{cfg.command}' needs --spec")
    spec, innovation = load_spec(cfg.spec)
    if cfg.innovation is not None:
        innovation = parse_innovation(cfg.innovation)
    return spec, innovation


def _left_window(spec: Any, cfg: ExperimentConfig) -> int:
    """Default left window, capped so the left side stays enumerable on the grid."""
    est = get_estimation_config()
    if cfg.r_left is not None:
        return cfg.r_left
    wanted = spec.p if isinstance(spec, TvArchSpec) else est.archinf_left_window
    cap = max(0, int(math.floor(math.log(est.max_cells) / math.log(cfg.grid) + 1e-12)) - 1)
    if wanted > cap:
        logger.warning(f"⚠️ Left window {wanted} exceeds {est.max_cells} cells at grid {cfg.grid}; using {cap}")
    return min(wanted, cap)


def _simulate(spec: Any, innovation: InnovationModel, cfg: ExperimentConfig, length: int,
              replicates: int) -> PathEnsemble:
    if isinstance(spec, TvArchSpec):
        return simulate_tvarch(spec, innovation, (0, length - 1), replicates, cfg.seed, workers=cfg.workers)
    return simulate_archinf(spec, innovation, length, replicates, cfg.seed, workers=cfg.workers,
                            tail_tol=cfg.tail_tol)


def _estimate(spec: Any, innovation: InnovationModel, cfg: ExperimentConfig):
    r_left = _left_window(spec, cfg)
    reach = cfg.k_hi + r_left + cfg.r_right
    if cfg.t is None:
        length = -(-cfg.samples // cfg.replicates) + reach
        ensemble = _simulate(spec, innovation, cfg, length, cfg.replicates)
    else:
        if cfg.t < r_left:
            raise SpecValidationError("t", f"cross-sectional t must be at least the left window {r_left}")
        ensemble = _simulate(spec, innovation, cfg, cfg.t + cfg.k_hi + cfg.r_right + 1, cfg.samples)
    return estimate_curve(ensemble, cfg.lags, cfg.grid, r_left, cfg.r_right, t=cfg.t)


def _bounds(spec: Any, innovation: InnovationModel, cfg: ExperimentConfig):
    return bound_curve(
        spec,
        innovation,
        cfg.lags,
        variant=cfg.variant,
        literal=cfg.literal,
        s_max=cfg.s_max,
        i_max=cfg.i_max,
        delta_tilde=cfg.delta_tilde,
        t=cfg.t or 0,
        workers=cfg.workers,
    )


def _report_failures(rows: Sequence[CheckRow]) -> int:
    failed = [row for row in rows if not row.passed]
    for row in failed:
        logger.error(f"FAILED {row.check}: instances={row.instances} max_rel_err={row.max_rel_err:.3g}")
    return 1 if failed else 0


# ========== COMMAND HANDLERS ==========


async def cmd_simulate(cfg: ExperimentConfig) -> int:
    """Write paths.csv: one row per (replicate, t)."""
    spec, innovation = _load(cfg)
    ensemble = await asyncio.to_thread(_simulate, spec, innovation, cfg, cfg.samples, cfg.replicates)
    rows = (
        (r, ensemble.t_start + i, value)
        for r, path in enumerate(ensemble.paths)
        for i, value in enumerate(path)
    )
    _write_csv(
        _output_dir(cfg) / "paths.csv",
        cfg.config_hash(),
        ["replicate", "t", "x"],
        rows,
        comments=[
            f"spec_id={ensemble.spec_id} burn_in={ensemble.burn_in} "
            f"truncation_lag={_fmt(ensemble.truncation_lag)}"
        ],
    )
    return 0


async def cmd_bound(cfg: ExperimentConfig) -> int:
    """Write bounds.csv and bounds_constants.json."""
    spec, innovation = _load(cfg)
    curve = await asyncio.to_thread(_bounds, spec, innovation, cfg)
    out = _output_dir(cfg)
    config_hash = cfg.config_hash()
    rows = (
        (k, a, b, m, tight, curve.rate_class)
        for k, a, b, m, tight in zip(curve.lags, curve.alpha_bound, curve.beta_bound, curve.twomix_bound,
                                      curve.tight_alpha)
    )
    _write_csv(out / "bounds.csv", config_hash,
               ["k", "alpha_bound", "beta_bound", "twomix_bound", "tight_alpha", "rate_class"], rows)
    sidecar = {
        "config_sha256": config_hash,
        "variant": cfg.variant,
        "rate_class": curve.rate_class,
        "monotone_from": curve.monotone_from,
        "constants": curve.constants,
    }
    path = out / "bounds_constants.json"
    path.write_text(json.dumps(sidecar, indent=2, sort_keys=True, default=_jsonable) + "\n")
    logger.info(f"✓ Wrote {path}")
    return 0


async def cmd_estimate(cfg: ExperimentConfig) -> int:
    """Write estimates.csv."""
    spec, innovation = _load(cfg)
    curve = await asyncio.to_thread(_estimate, spec, innovation, cfg)
    rows = (
        (k, curve.alpha_hat[i], curve.beta_hat[i], curve.twomix_hat[i], curve.se_alpha[i], curve.se_beta[i],
         curve.se_twomix[i], curve.m, curve.r_left, curve.r_right, curve.n[i], curve.exact[i])
        for i, k in enumerate(curve.lags)
    )
    _write_csv(
        _output_dir(cfg) / "estimates.csv",
        cfg.config_hash(),
        ["k", "alpha_hat", "beta_hat", "twomix_hat", "se_alpha", "se_beta", "se_twomix",
         "m", "r_left", "r_right", "n", "exact_flag"],
        rows,
    )
    return 0


def _volterra_rows(cfg: ExperimentConfig) -> List[CheckRow]:
    rng = np.random.default_rng(cfg.seed)
    specs: List[Any] = []
    if cfg.spec is not None:
        specs.append(_load(cfg)[0])
    specs += random_tvarch_specs(rng, 20) + random_archinf_specs(rng, 20)
    return verify_identities(specs, rng)


def _density_rows(cfg: ExperimentConfig) -> Tuple[List[CheckRow], List[Tuple]]:
    laws = [cfg.innovation] if cfg.innovation is not None else list(DENSITY_LAWS)
    checks, table = [], []
    for name in laws:
        innovation = parse_innovation(name)
        report = verify_scale_mixture(innovation)
        excess = max(0.0, max(tv - bound for tv, bound in zip(report.tv_values, report.bound_values)))
        checks.append(CheckRow(check=f"scale_mixture_{innovation.label}", instances=len(report.pairs),
                               max_rel_err=excess, passed=report.passed))
        if innovation.name is InnovationName.UNIFORM:
            closed = [2 * B / (A + B) for A, B in report.pairs]
            err = max(abs(tv - c) for tv, c in zip(report.tv_values, closed))
            checks.append(CheckRow(check="uniform_closed_form", instances=len(closed), max_rel_err=err,
                                   passed=err <= 1e-9))
        for (A, B), tv, bound in zip(report.pairs, report.tv_values, report.bound_values):
            table.append((innovation.label, A, B, tv, bound, tv / bound if bound > 0 else None))
    return checks, table


async def cmd_verify(cfg: ExperimentConfig) -> int:
    """Write verify.csv (and density.csv for the density suite); exit 1 if any check fails."""
    out = _output_dir(cfg)
    config_hash = cfg.config_hash()
    rows: List[CheckRow] = []
    if cfg.suite in ("volterra", "all"):
        rows += await asyncio.to_thread(_volterra_rows, cfg)
    if cfg.suite in ("density", "all"):
        checks, table = await asyncio.to_thread(_density_rows, cfg)
        rows += checks
        _write_csv(out / "density.csv", config_hash, ["law", "A", "B", "tv", "bound", "ratio"], table)
    if cfg.suite in ("minimize-eta", "all"):
        rows += await asyncio.to_thread(verify_minimize_eta, np.random.default_rng(cfg.seed), 100)
    _write_csv(out / "verify.csv", config_hash, ["check", "instances", "max_rel_err", "pass"],
               ((r.check, r.instances, r.max_rel_err, r.passed) for r in rows))
    return _report_failures(rows)


async def cmd_sweep(cfg: ExperimentConfig) -> int:
    """Bounds and estimates side by side; exit 1 if an estimate exceeds its bound by 3 SE."""
    spec, innovation = _load(cfg)
    tasks = [
        asyncio.to_thread(_bounds, spec, innovation, cfg) if cfg.with_bound else asyncio.sleep(0, None),
        asyncio.to_thread(_estimate, spec, innovation, cfg) if cfg.with_estimate else asyncio.sleep(0, None),
    ]
    bounds, estimates = await asyncio.gather(*tasks)
    rows, failed = [], []
    for i, k in enumerate(cfg.lags):
        estimate = estimates.alpha_hat[i] if estimates else None
        se = estimates.se_alpha[i] if estimates else None
        bound = bounds.alpha_bound[i] if bounds else None
        dominated = None if estimate is None or bound is None else estimate - 3 * se <= bound
        if dominated is False:
            failed.append(k)
        rows.append((k, estimate, se, bound, dominated))
    _write_csv(_output_dir(cfg) / "sweep.csv", cfg.config_hash(),
               ["k", "estimate", "estimate_se", "bound", "dominated"], rows)
    for k in failed:
        logger.error(f"FAILED dominance at k={k}: estimate - 3 SE exceeds the bound")
    return 1 if failed else 0


def _read_sweep(path: Path) -> Dict[str, List[Optional[float]]]:
    with path.open(newline="") as f:
        reader = csv.DictReader(line for line in f if not line.startswith("#"))
        columns: Dict[str, List[Optional[float]]] = {"k": [], "estimate": [], "estimate_se": [], "bound": [],
                                                     "dominated": []}
        for row in reader:
            for name in ("k", "estimate", "estimate_se", "bound"):
                columns[name].append(float(row[name]) if row[name] else None)
            columns["dominated"].append({"true": 1.0, "false": 0.0}.get(row["dominated"]))
    return columns


def _fit_line(label: str, lags: List[float], values: List[Optional[float]]) -> str:
    pairs = [(k, v) for k, v in zip(lags, values) if v is not None and v > 0]
    if len(pairs) < 3:
        return f"{label}: not enough positive values to fit"
    fit = decay_fit([int(k) for k, _ in pairs], [v for _, v in pairs])
    return (f"{label}: {fit.kind} (param={_fmt(fit.param)}, R^2={_fmt(fit.r_squared)}, "
            f"other R^2={_fmt(fit.alternative_r_squared)})")


async def cmd_report(cfg: ExperimentConfig) -> int:
    """Summarize a sweep CSV into report.txt."""
    if cfg.input is None:
        raise SpecValidationError("input", "'report' needs --input pointing at a sweep CSV")
    columns = _read_sweep(Path(cfg.input))
    lags = columns["k"]
    checked = [d for d in columns["dominated"] if d is not None]
    lines = [
        f"# config_sha256={cfg.config_hash()}",
        f"sweep: {cfg.input}",
        f"lags: {_fmt(int(lags[0]))}..{_fmt(int(lags[-1]))} ({len(lags)} rows)" if lags else "lags: none",
        f"dominated: {int(sum(checked))}/{len(checked)}",
        _fit_line("estimate decay", lags, columns["estimate"]),
        _fit_line("bound decay", lags, columns["bound"]),
        "",
        f"{'k':>6} {'estimate':>24} {'estimate_se':>24} {'bound':>24}",
    ]
    for k, est, se, bound in zip(lags, columns["estimate"], columns["estimate_se"], columns["bound"]):
        lines.append(f"{int(k):>6} {_fmt(est):>24} {_fmt(se):>24} {_fmt(bound):>24}")
    path = _output_dir(cfg) / "report.txt"
    path.write_text("\n".join(lines) + "\n")
    logger.info(f"✓ Wrote {path}")
    return 0


HANDLERS = {
    "simulate": cmd_simulate,
    "bound": cmd_bound,
    "estimate": cmd_estimate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


# ========== ARGUMENT PARSING ==========


def parse_lags(value: str) -> Tuple[int, int]:
    """'A..B' or a single lag 'K'."""
    lo, sep, hi = value.partition("..")
    try:
        first = int(lo)
        last = int(hi) if sep else first
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got '{value}'")
    if first < 1 or last < first:
        raise argparse.ArgumentTypeError(f"lag range must satisfy 1 <= A <= B, got '{value}'")
    return first, last


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="JSON spec file")
    common.add_argument("--innovation", help="Innovation override: exponential, uniform or chi2:M")
    common.add_argument("--seed", type=int, default=0, help="64-bit master seed")
    common.add_argument("--k", type=parse_lags, default=(1, 10), metavar="A..B", help="Lag range")
    common.add_argument("--samples", type=int, default=100_000, help="Pooled samples per lag, or path length")
    common.add_argument("--replicates", type=int, default=16, help="Independent replicates")
    common.add_argument("--grid", type=int, default=get_estimation_config().grid, help="Bins per coordinate")
    common.add_argument("--r-left", type=int, help="Left window (default p, or the configured ARCH(inf) window)")
    common.add_argument("--r-right", type=int, default=0, help="Right window")
    common.add_argument("--t", type=int, help="Cross-sectional time (default: pool over t)")
    common.add_argument(
        "--s-max", type=int,
        help="Recorded in the constants only; the s-sum is summed in closed form, so values do not change",
    )
    common.add_argument("--i-max", type=int, help="Explicit i-sum truncation")
    common.add_argument("--tail-tol", type=float, default=1e-8, help="Truncation tail tolerance")
    common.add_argument("--delta-tilde", type=float, help="Contraction exponent override (tvARCH)")
    common.add_argument("--out", default="archmix_out", help="Output directory (ARCHMIX_OUT overrides)")
    common.add_argument("--workers", type=int, help="Worker threads (default: available CPUs)")
    variant = common.add_mutually_exclusive_group()
    variant.add_argument("--tight", dest="variant", action="store_const", const="tight")
    variant.add_argument("--packaged", dest="variant", action="store_const", const="packaged")
    common.add_argument("--literal-twomix", "--theorem42-literal", dest="literal", action="store_true",
                        help="Use a_j|psi_j| in the 2-mixing brackets")
    common.set_defaults(variant="packaged")

    parser = argparse.ArgumentParser(prog="archmix", description="Mixing bounds and estimates for ARCH processes")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("simulate", parents=[common], help="Simulate paths")
    commands.add_parser("bound", parents=[common], help="Theoretical bound curves")
    commands.add_parser("estimate", parents=[common], help="Empirical mixing estimates")
    verify = commands.add_parser("verify", parents=[common], help="Identity suites")
    verify.add_argument("suite", nargs="?", default="all", choices=["volterra", "density", "minimize-eta", "all"])
    sweep = commands.add_parser("sweep", parents=[common], help="Bounds against estimates")
    sweep.add_argument("--no-bound", dest="with_bound", action="store_false")
    sweep.add_argument("--no-estimate", dest="with_estimate", action="store_false")
    report = commands.add_parser("report", parents=[common], help="Summarize a sweep CSV")
    report.add_argument("--input", required=True, help="sweep.csv to summarize")
    return parser


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    values = {key: value for key, value in vars(ns).items() if value is not None and key != "k"}
    values["k_lo"], values["k_hi"] = ns.k
    values.setdefault("workers", get_runtime_config().workers)
    return ExperimentConfig.model_validate(values)


def run(argv: Sequence[str]) -> int:
    """
    Parse argv, run one command and map the outcome to an exit code.

    Returns:
        0 on success, 1 when a requested check fails, 2 on usage, parse or validation errors
    """
    try:
        cfg = config_from_args(build_parser().parse_args(list(argv)))
    except SystemExit as e:
        return int(e.code or 0)
    except ValidationError as e:
        logger.error(f"Invalid arguments: {e}")
        return 2

    logger.info(f"Running {cfg.command} (config {cfg.config_hash()[:12]})")
    try:
        return asyncio.run(HANDLERS[cfg.command](cfg))
    except json.JSONDecodeError as e:
        logger.error(f"Malformed JSON in {cfg.spec} at line {e.lineno}, column {e.colno}: {e.msg}")
        return 2
    except (ValidationError, SpecValidationError, AssumptionViolatedError, FileNotFoundError) as e:
        logger.error(f"Invalid input: {e}")
        return 2
    except ArchMixError as e:
        logger.error(f"FAILED {type(e).__name__}: {e}")
        return 1
