"""
Process models: specifications, innovation laws, assumption checks and simulation.

Provides:
- Innovation model construction with certified Lipschitz constants
- Assumption reports for tvARCH(p) and ARCH(inf) specs
- Deterministic, replicate-parallel simulation of both process families
- Companion matrices of the tvARCH state recursion
- Stationary mean and moment bounds
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numba import njit

from config import get_runtime_config, get_simulation_config
from density_analysis import check_unit_mean, innovation_tv_lipschitz
from errors import (
    AssumptionViolatedError,
    SimulationDivergedError,
    SpecValidationError,
    TruncationError,
)
from schemas import (
    ArchInfSpec,
    AssumptionClause,
    AssumptionReport,
    CoefficientSchedule,
    InnovationLaw,
    InnovationModel,
    InnovationName,
    PathEnsemble,
    TvArchSpec,
)

logger = logging.getLogger(__name__)

ProcessSpec = Union[TvArchSpec, ArchInfSpec]

_MASK64 = (1 << 64) - 1
_ASSUMPTION_EPS = 1e-12


# ========== SEEDING ==========


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer on a 64-bit unsigned integer."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replicate_seed(master_seed: int, replicate: int) -> int:
    """Stream seed of replicate r: SplitMix64(master_seed XOR r)."""
    if not 0 <= master_seed <= _MASK64:
        raise SpecValidationError("master_seed", "must be a 64-bit unsigned integer")
    return splitmix64((master_seed ^ replicate) & _MASK64)


def replicate_generator(master_seed: int, replicate: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(replicate_seed(master_seed, replicate)))


# ========== INNOVATIONS ==========


@lru_cache(maxsize=None)
def build_innovation(name: str, dof: Optional[int] = None) -> InnovationModel:
    """
    Build an innovation model with numerically certified Lipschitz constants.

    Args:
        name: exponential, uniform or chi2
        dof: Degrees of freedom for chi2

    Returns:
        Immutable InnovationModel (memoized per law)

    Raises:
        SpecValidationError: unknown law, or a density that is not a unit-mean probability density
    """
    try:
        law = InnovationLaw(name=InnovationName(name), dof=dof)
    except ValueError as e:
        raise SpecValidationError("innovation", f"unknown innovation {name!r} (dof={dof}): {e}") from e
    check_unit_mean(law)
    cert = innovation_tv_lipschitz(law)
    return InnovationModel(
        law=law,
        lipschitz_iii=cert.k_iii,
        lipschitz_iv=cert.k_iv,
        second_moment=law.moment(2.0),
        a_grid_points=len(cert.a_grid),
        tau_points=cert.tau_points,
    )


def parse_innovation(value: Union[str, Dict[str, Any], None]) -> InnovationModel:
    """Innovation from 'exponential', 'uniform', 'chi2:3' or {"name": ..., "dof": ...}."""
    if value is None:
        return build_innovation("exponential")
    if isinstance(value, dict):
        dof = value.get("dof")
        if dof is not None and not isinstance(dof, int):
            raise SpecValidationError("innovation", f"dof must be an integer, got {dof!r}")
        return build_innovation(str(value.get("name", "")), dof)
    name, _, dof = str(value).partition(":")
    try:
        return build_innovation(name.strip(), int(dof) if dof else None)
    except SpecValidationError:
        raise
    except ValueError as e:
        raise SpecValidationError("innovation", f"unknown innovation '{value}'") from e


# ========== SPEC FILES ==========


def spec_from_dict(payload: Dict[str, Any]) -> Tuple[ProcessSpec, InnovationModel]:
    """Build (spec, innovation) from a decoded JSON spec file."""
    data = dict(payload)
    innovation = parse_innovation(data.pop("innovation", None))
    kind = data.get("kind")
    if kind == "tvarch":
        if "schedule" not in data:
            coeffs = data.pop("coeffs", [])
            data["schedule"] = CoefficientSchedule(
                breakpoints=[0], intercepts=[data.pop("a0", 0.0)], coeffs=[coeffs]
            )
            data.setdefault("p", len(coeffs))
        data.pop("nu", None)
        return TvArchSpec.model_validate(data), innovation
    if kind == "archinf":
        return ArchInfSpec.model_validate(data), innovation
    raise SpecValidationError("kind", f"expected 'tvarch' or 'archinf', got {kind!r}")


def load_spec(path: Union[str, Path]) -> Tuple[ProcessSpec, InnovationModel]:
    """Read a JSON spec file. json.JSONDecodeError propagates with its line/column."""
    text = Path(path).read_text()
    return spec_from_dict(json.loads(text))


# ========== ASSUMPTIONS ==========


def _tvarch_range(spec: TvArchSpec, t_range: Optional[Tuple[int, int]]) -> Tuple[int, int]:
    if t_range is None:
        if spec.rule is not None:
            raise SpecValidationError("t_range", "a rule-based schedule needs an explicit t_range")
        return spec.span()
    lo, hi = int(t_range[0]), int(t_range[1])
    if hi < lo:
        raise SpecValidationError("t_range", "must be nonempty")
    return lo, hi


def check_assumptions(spec: ProcessSpec, innovation: InnovationModel,
                      t_range: Optional[Tuple[int, int]] = None) -> AssumptionReport:
    """
    Check the model assumptions clause by clause.

    Args:
        spec: tvARCH or ARCH(inf) spec
        innovation: Innovation model
        t_range: Queried time interval (tvARCH); defaults to the schedule span

    Returns:
        AssumptionReport with the violating witness of every clause
    """
    if isinstance(spec, TvArchSpec):
        lo, hi = _tvarch_range(spec, t_range)
        a0, a = spec.coefficients_over(lo, hi)
        sums = a.sum(axis=1)
        i_sum, i_a0 = int(np.argmax(sums)), int(np.argmin(a0))
        clauses = [
            AssumptionClause(
                clause="tv_contraction",
                passed=bool(sums[i_sum] <= 1.0 - spec.delta + _ASSUMPTION_EPS),
                value=float(sums[i_sum]),
                threshold=1.0 - spec.delta,
                witness=f"t={lo + i_sum}",
            ),
            AssumptionClause(
                clause="tv_intercept",
                passed=bool(a0[i_a0] > 0 and np.all(np.isfinite(a0))),
                value=float(a0[i_a0]),
                threshold=0.0,
                witness=f"t={lo + i_a0}",
            ),
            AssumptionClause(
                clause="tv_lipschitz",
                passed=bool(np.isfinite(innovation.lipschitz_iii)),
                value=innovation.lipschitz_iii,
                threshold=float("inf"),
                witness=innovation.label,
            ),
            AssumptionClause(
                clause="tv_lipschitz_sup",
                passed=bool(np.isfinite(innovation.lipschitz_iv)),
                value=innovation.lipschitz_iv,
                threshold=float("inf"),
                witness=innovation.label,
            ),
        ]
        return AssumptionReport(kind="tvarch", clauses=clauses)

    total = spec.total()
    z_norm = innovation.moment(spec.nu) ** (1.0 / spec.nu)
    clauses = [
        AssumptionClause(
            clause="inf_contraction",
            passed=bool(total < 1.0 - spec.delta),
            value=total,
            threshold=1.0 - spec.delta,
            witness=f"sum(a)={total:.6g}",
        ),
        AssumptionClause(
            clause="inf_moment",
            passed=bool(z_norm * total < 1.0),
            value=z_norm * total,
            threshold=1.0,
            witness=f"E[Z^{spec.nu:g}]^(1/{spec.nu:g})={z_norm:.6g}",
        ),
    ]
    return AssumptionReport(kind="archinf", clauses=clauses)


def _require(report: AssumptionReport, clauses: Sequence[str]) -> None:
    failed = [c for c in report.failures() if c.clause in clauses]
    if failed:
        detail = ", ".join(f"{c.clause} ({c.value:.6g} vs {c.threshold:.6g} at {c.witness})" for c in failed)
        raise AssumptionViolatedError(f"assumption clauses failed: {detail}")


# ========== MEAN AND MOMENT BOUNDS ==========


def stationary_mean_bound(spec: ProcessSpec, t_range: Optional[Tuple[int, int]] = None) -> float:
    """sup a0 / (1 - sup sum_j a_j) for tvARCH, a0 / (1 - sum_j a_j) for ARCH(inf)."""
    if isinstance(spec, TvArchSpec):
        lo, hi = _tvarch_range(spec, t_range)
        a0, a = spec.coefficients_over(lo, hi)
        numerator, denominator = float(a0.max()), 1.0 - float(a.sum(axis=1).max())
    else:
        numerator, denominator = spec.a0, 1.0 - spec.total()
    if denominator <= 0:
        raise AssumptionViolatedError(f"coefficient sum reaches {1.0 - denominator:.6g}; mean is unbounded")
    return numerator / denominator


def moment_bound(spec: ArchInfSpec, innovation: InnovationModel) -> Tuple[float, str]:
    """
    Bound on E|X_0|^nu and where it came from.

    Uses the user value when given, the stationary mean for nu = 1, and otherwise
    Minkowski's inequality on the stationary solution:
    ||X||_nu <= a0 ||Z||_nu / (1 - ||Z||_nu sum_j a_j).
    """
    if spec.moment_bound is not None:
        return spec.moment_bound, "user"
    if spec.nu == 1.0:
        return stationary_mean_bound(spec), "stationary_mean"
    z_norm = innovation.moment(spec.nu) ** (1.0 / spec.nu)
    contraction = z_norm * spec.total()
    if contraction >= 1.0:
        raise AssumptionViolatedError(
            f"moment condition fails ({contraction:.6g} >= 1); supply moment_bound in the spec"
        )
    return (spec.a0 * z_norm / (1.0 - contraction)) ** spec.nu, "minkowski"


# ========== COMPANION MATRICES ==========


def companion_matrices(spec: TvArchSpec, t: int, z: float = 1.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    State-update matrices of X_t = (X_t, ..., X_{t-p+1}).

    Returns:
        (A_t, A~_t, b_t): A_t has first row a_j(t) z and ones on the subdiagonal,
        A~_t is A_t at z = 1, b_t = (a0(t) z, 0, ..., 0)
    """
    if not z >= 0:
        raise SpecValidationError("z", "must be nonnegative")
    a0, a = spec.coefficients_over(t, t)
    A_tilde = np.zeros((spec.p, spec.p))
    A_tilde[0, :] = a[0]
    A_tilde[np.arange(1, spec.p), np.arange(spec.p - 1)] = 1.0
    A = A_tilde.copy()
    A[0, :] *= z
    b = np.zeros(spec.p)
    b[0] = a0[0] * z
    return A, A_tilde, b


# ========== RECURSION KERNELS ==========


@njit(cache=True, nogil=True)
def _tvarch_kernel(a0, a, z, init):
    n = z.shape[0]
    p = init.shape[0]
    buf = np.empty(p + n)
    buf[:p] = init
    for t in range(n):
        acc = a0[t]
        for j in range(1, p + 1):
            acc += a[t, j - 1] * buf[p + t - j]
        x = z[t] * acc
        if not np.isfinite(x):
            return buf[p:], t
        buf[p + t] = x
    return buf[p:], -1


@njit(cache=True, nogil=True)
def _archinf_kernel(a0, a, z, init):
    n = z.shape[0]
    lag = init.shape[0]
    buf = np.empty(lag + n)
    buf[:lag] = init
    for t in range(n):
        acc = a0
        for j in range(1, lag + 1):
            acc += a[j - 1] * buf[lag + t - j]
        x = z[t] * acc
        if not np.isfinite(x):
            return buf[lag:], t
        buf[lag + t] = x
    return buf[lag:], -1


def propagate_tvarch(spec: TvArchSpec, t_start: int, x_init: Sequence[float], z: Sequence[float],
                     replicate: int = 0) -> np.ndarray:
    """
    Run the tvARCH recursion forward from a given past.

    Args:
        spec: tvARCH spec
        t_start: Time of the most recent past value
        x_init: (X_{t_start}, X_{t_start-1}, ..., X_{t_start-p+1})
        z: Innovations Z_{t_start+1}, ..., Z_{t_start+n}
        replicate: Replicate index reported on divergence

    Returns:
        X_{t_start+1}, ..., X_{t_start+n}
    """
    x_init = np.asarray(x_init, dtype=float)
    z = np.ascontiguousarray(z, dtype=float)
    if x_init.shape != (spec.p,):
        raise SpecValidationError("x", f"expected {spec.p} past values, got {x_init.size}")
    if z.size == 0:
        return np.empty(0)
    a0, a = spec.coefficients_over(t_start + 1, t_start + z.size)
    path, bad = _tvarch_kernel(
        np.ascontiguousarray(a0), np.ascontiguousarray(a), z, np.ascontiguousarray(x_init[::-1])
    )
    if bad >= 0:
        raise SimulationDivergedError(t=t_start + 1 + int(bad), replicate=replicate)
    return path


def propagate_archinf(spec: ArchInfSpec, x_init: Sequence[float], z: Sequence[float],
                      truncation_lag: int, replicate: int = 0) -> np.ndarray:
    """
    Run the truncated ARCH(inf) recursion X_t = Z_t (a0 + sum_{j<=L} a_j X_{t-j}).

    Args:
        x_init: (X_0, X_{-1}, ..., X_{-L+1}); shorter blocks are zero-padded
        z: Innovations Z_1, ..., Z_n

    Returns:
        X_1, ..., X_n
    """
    x_init = np.asarray(x_init, dtype=float)
    z = np.ascontiguousarray(z, dtype=float)
    if truncation_lag < 1:
        raise SpecValidationError("truncation_lag", "must be at least 1")
    past = np.zeros(truncation_lag)
    n_past = min(truncation_lag, x_init.size)
    past[:n_past] = x_init[:n_past]
    if z.size == 0:
        return np.empty(0)
    path, bad = _archinf_kernel(
        float(spec.a0), np.ascontiguousarray(spec.coefficients(truncation_lag)), z,
        np.ascontiguousarray(past[::-1]),
    )
    if bad >= 0:
        raise SimulationDivergedError(t=1 + int(bad), replicate=replicate)
    return path


# ========== SIMULATION ==========


def _run_replicates(worker: Callable[[int], np.ndarray], replicates: int, workers: Optional[int]) -> List[np.ndarray]:
    """Evaluate worker(r) for every replicate; results come back in replicate order."""
    workers = workers or get_runtime_config().workers
    if workers <= 1 or replicates == 1:
        return [worker(r) for r in range(replicates)]
    with ThreadPoolExecutor(max_workers=min(workers, replicates)) as pool:
        return list(pool.map(worker, range(replicates)))


def simulate_tvarch(spec: TvArchSpec, innovation: InnovationModel, t_range: Tuple[int, int],
                    replicates: int, master_seed: int, burn_in: Optional[int] = None,
                    workers: Optional[int] = None) -> PathEnsemble:
    """
    Simulate tvARCH(p) paths on t_range (inclusive).

    Pre-sample values sit at the fixed point a0/(1 - sum a) of the earliest simulated
    time; the first burn_in steps are discarded.

    Args:
        spec: tvARCH spec (contraction and intercept clauses must hold on the simulated range)
        innovation: Innovation model
        t_range: (first kept t, last kept t)
        replicates: Number of independent paths
        master_seed: 64-bit master seed
        burn_in: Discarded steps; default 10 * max(p, 50)
        workers: Worker threads (default from RuntimeConfig)

    Returns:
        PathEnsemble of kept values
    """
    cfg = get_simulation_config()
    if replicates < 1:
        raise SpecValidationError("replicates", "must be at least 1")
    if burn_in is None:
        burn_in = cfg.burn_in_factor * max(spec.p, cfg.burn_in_floor)
    if burn_in < 0:
        raise SpecValidationError("burn_in", "must be nonnegative")
    t0, t1 = _tvarch_range(spec, t_range)
    first = t0 - burn_in
    _require(check_assumptions(spec, innovation, (first, t1)), ("tv_contraction", "tv_intercept"))

    a0_first = spec.intercept_at(first)
    fixed_point = a0_first / (1.0 - float(spec.coeffs_at(first).sum()))
    x_init = np.full(spec.p, fixed_point)
    n_total = t1 - first + 1

    def worker(r: int) -> np.ndarray:
        z = innovation.sample(replicate_generator(master_seed, r), n_total)
        path = propagate_tvarch(spec, first - 1, x_init, z, replicate=r)
        return np.ascontiguousarray(path[burn_in:])

    try:
        paths = _run_replicates(worker, replicates, workers)
    except SimulationDivergedError as e:
        logger.error(f"tvARCH simulation diverged: {e}")
        raise

    logger.info(
        f"Simulated {replicates} tvARCH({spec.p}) paths on t=[{t0}, {t1}] "
        f"(burn-in {burn_in}, seed {master_seed})"
    )
    return PathEnsemble(
        spec_id=spec.spec_id,
        kind="tvarch",
        master_seed=master_seed,
        replicate_count=replicates,
        paths=paths,
        t_start=t0,
        burn_in=burn_in,
    )


def choose_truncation_lag(spec: ArchInfSpec, tail_tol: Optional[float] = None) -> int:
    """Smallest L with coefficient mass beyond L below tail_tol * (1 - sum a)."""
    cfg = get_simulation_config()
    tol = cfg.tail_tol if tail_tol is None else tail_tol
    margin = 1.0 - spec.total()
    if margin <= 0:
        raise AssumptionViolatedError("coefficient sum must be below 1")
    budget = tol * margin

    hi = 1
    while spec.tail_mass(hi) >= budget:
        if hi >= cfg.max_truncation_lag:
            raise TruncationError(
                f"tail mass stays above {budget:.3g} up to lag {cfg.max_truncation_lag}",
                required={"truncation_lag": None},
            )
        hi = min(2 * hi, cfg.max_truncation_lag)
    lo = max(1, hi // 2)
    if spec.tail_mass(lo) < budget:
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if spec.tail_mass(mid) < budget:
            hi = mid
        else:
            lo = mid
    return hi


def simulate_archinf(spec: ArchInfSpec, innovation: InnovationModel, n: int, replicates: int,
                     master_seed: int, burn_in: Optional[int] = None,
                     truncation_lag: Optional[int] = None, workers: Optional[int] = None,
                     tail_tol: Optional[float] = None) -> PathEnsemble:
    """
    Simulate ARCH(inf) paths through the recursion truncated at L.

    Args:
        spec: ARCH(inf) spec (the contraction clause must hold)
        innovation: Innovation model
        n: Kept path length
        replicates: Number of independent paths
        master_seed: 64-bit master seed
        burn_in: Discarded steps; default 10 * max(L, 50), at least 5 * L
        truncation_lag: L; chosen from the tail tolerance when omitted
        workers: Worker threads
        tail_tol: Override of SimulationConfig.tail_tol

    Returns:
        PathEnsemble of kept values with its truncation lag
    """
    cfg = get_simulation_config()
    if n < 1 or replicates < 1:
        raise SpecValidationError("n", "path length and replicates must be positive")
    _require(check_assumptions(spec, innovation), ("inf_contraction",))

    required = choose_truncation_lag(spec, tail_tol)
    if truncation_lag is None:
        truncation_lag = required
    elif truncation_lag < required:
        raise TruncationError(
            f"tail mass beyond lag {truncation_lag} is {spec.tail_mass(truncation_lag):.3g}; "
            f"truncation_lag must be at least {required}",
            required={"truncation_lag": required},
        )
    if burn_in is None:
        burn_in = cfg.burn_in_factor * max(truncation_lag, cfg.burn_in_floor)
    if burn_in < cfg.archinf_min_burn_factor * truncation_lag:
        raise SpecValidationError(
            "burn_in", f"must be at least {cfg.archinf_min_burn_factor} * truncation_lag = "
            f"{cfg.archinf_min_burn_factor * truncation_lag}"
        )

    fixed_point = spec.a0 / (1.0 - float(spec.coefficients(truncation_lag).sum()))
    x_init = np.full(truncation_lag, fixed_point)
    n_total = burn_in + n

    def worker(r: int) -> np.ndarray:
        z = innovation.sample(replicate_generator(master_seed, r), n_total)
        path = propagate_archinf(spec, x_init, z, truncation_lag, replicate=r)
        return np.ascontiguousarray(path[burn_in:])

    try:
        paths = _run_replicates(worker, replicates, workers)
    except SimulationDivergedError as e:
        logger.error(f"ARCH(inf) simulation diverged: {e}")
        raise

    logger.info(
        f"Simulated {replicates} ARCH(inf) paths of length {n} "
        f"(L={truncation_lag}, burn-in {burn_in}, seed {master_seed})"
    )
    return PathEnsemble(
        spec_id=spec.spec_id,
        kind="archinf",
        master_seed=master_seed,
        replicate_count=replicates,
        paths=paths,
        t_start=0,
        burn_in=burn_in,
        truncation_lag=truncation_lag,
    )
