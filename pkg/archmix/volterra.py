"""
Volterra-type expansions of tvARCH(p) and ARCH(inf) values.

Provides:
- P/Q splits X = Z (P + Q) into an innovation-driven part and a part linear in the past
- Exact Q weights of the tvARCH expansion at unit innovations
- psi coefficients of the inverse power series (1 - sum_j a_j z^j)^{-1}
- Tail functionals d_k and the mean Q_{0,k}(1, x) by two routes
- The identity suite behind `verify volterra`
"""

import itertools
import logging
import math
import threading
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import signal

from config import get_bound_config
from errors import (
    CombinatorialLimitError,
    DivergenceError,
    InternalConsistencyError,
    SpecValidationError,
)
from process_models import (
    choose_truncation_lag,
    companion_matrices,
    propagate_archinf,
    propagate_tvarch,
)
from schemas import (
    ArchInfSpec,
    CheckRow,
    CoefficientRule,
    CoefficientSchedule,
    PastBlock,
    PqTerms,
    PsiSequence,
    TailFunctional,
    TvArchSpec,
)

logger = logging.getLogger(__name__)

PastLike = Union[PastBlock, Sequence[float], np.ndarray]

_ROUTE_REL_TOL = 1e-10
_VERIFY_LAG = 256

_psi_cache: Dict[Tuple[str, int], PsiSequence] = {}
_psi_lock = threading.Lock()


def _past_block(x: PastLike) -> PastBlock:
    if isinstance(x, PastBlock):
        return x
    values = np.asarray(x, dtype=float).ravel()
    if np.any(~np.isfinite(values)) or np.any(values < 0):
        raise SpecValidationError("x", "past values must be finite and nonnegative")
    return PastBlock(values=values.tolist())


def _innovations(z: Sequence[float], expected: int) -> np.ndarray:
    z = np.asarray(z, dtype=float).ravel()
    if z.size != expected:
        raise SpecValidationError("z", f"expected {expected} innovations, got {z.size}")
    if np.any(~np.isfinite(z)) or np.any(z < 0):
        raise SpecValidationError("z", "innovations must be finite and nonnegative")
    return z


def _check_lags(s: int, k: int) -> None:
    if s < 0:
        raise SpecValidationError("s", "must be nonnegative")
    if k < 1:
        raise SpecValidationError("k", "must be at least 1")


# ========== tvARCH(p) ==========


def pq_tvarch(spec: TvArchSpec, z: Sequence[float], x: Sequence[float], s: int, k: int, t: int = 0) -> PqTerms:
    """
    Split X_{t+k+s} = Z_{t+k+s} (P + Q) by iterating the companion recursion.

    Args:
        spec: tvARCH spec
        z: Z_{t+1}, ..., Z_{t+k-1} when s = 0; Z_{t+1}, ..., Z_{t+k+s-1} when s >= 1
        x: (X_t, X_{t-1}, ..., X_{t-p+1})
        s: Offset beyond the lag
        k: Lag, >= 1
        t: Time of the most recent past value

    Returns:
        PqTerms; Q = 0 for s > p or a zero past
    """
    _check_lags(s, k)
    p = spec.p
    steps = k - 1 if s == 0 else k + s - 1
    z = _innovations(z, steps)
    x = np.asarray(x, dtype=float).ravel()
    if x.size != p:
        raise SpecValidationError("x", f"expected {p} past values, got {x.size}")
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise SpecValidationError("x", "past values must be finite and nonnegative")

    # xp/xq hold the P- and Q-parts of X_{t+m} at index m + p - 1, m = 1-p..steps
    xp = np.zeros(steps + p)
    xq = np.zeros(steps + p)
    xq[:p] = x[::-1]
    u = np.zeros(p)
    v = x.copy()
    for m in range(1, steps + 1):
        A, _, b = companion_matrices(spec, t + m, z[m - 1])
        u = A @ u + b
        v = A @ v
        xp[m + p - 1] = u[0]
        xq[m + p - 1] = v[0]

    target = t + k + s
    a0, a = spec.intercept_at(target), spec.coeffs_at(target)
    lag_index = np.arange(1, p + 1)
    slots = k + s - lag_index + p - 1
    conditioned = lag_index < s
    p_term = a0 + float(np.sum(a[conditioned] * (xp + xq)[slots[conditioned]]))
    expanded = ~conditioned
    p_term += float(np.sum(a[expanded] * xp[slots[expanded]]))
    q_term = float(np.sum(a[expanded] * xq[slots[expanded]]))
    if s > p:
        q_term = 0.0
    return PqTerms(p_term=p_term, q_term=q_term, s=s, k=k, t=t, conditioning_block=z.tolist())


def q_weights_tvarch(spec: TvArchSpec, s: int, k: int, t: int = 0) -> np.ndarray:
    """
    Weights w with Q_{s,k,t}(1, x) = w . x at unit innovations.

    w(m) is the first row of A~_{t+m} ... A~_{t+1} for m >= 1 and the unit vector
    e_{-m} for m <= 0; w_s = sum_{i=max(s,1)}^p a_i(t+k+s) w(k+s-i).
    """
    _check_lags(s, k)
    p = spec.p
    if s > p:
        return np.zeros(p)
    steps = k + s - 1
    rows = {m: np.eye(p)[-m] for m in range(1 - p, 1)}
    product = np.eye(p)
    for m in range(1, steps + 1):
        _, A_tilde, _ = companion_matrices(spec, t + m)
        product = A_tilde @ product
        rows[m] = product[0].copy()
    a = spec.coeffs_at(t + k + s)
    weights = np.zeros(p)
    for i in range(max(s, 1), p + 1):
        weights += a[i - 1] * rows[k + s - i]
    return weights


# ========== psi COEFFICIENTS ==========


def psi_coefficients(coeffs: Sequence[float], length: int) -> PsiSequence:
    """
    Invert 1 - sum_j a_j z^j as a power series.

    Args:
        coeffs: a_1, a_2, ... (nonnegative)
        length: Last index L of psi_0..psi_L

    Returns:
        PsiSequence from the IIR recursion psi_k = sum_{j<=k} a_j psi_{k-j}
    """
    a = np.asarray(coeffs, dtype=float).ravel()
    if length < 0:
        raise SpecValidationError("length", "must be nonnegative")
    if a.sum() >= 1.0:
        raise DivergenceError(f"coefficient sum {a.sum():.6g} >= 1; the inverse series diverges")
    impulse = np.zeros(length + 1)
    impulse[0] = 1.0
    denominator = np.concatenate([[1.0], -a[:length]])
    values = signal.lfilter([1.0], denominator, impulse)
    return PsiSequence(values=values, source_coeffs=a)


def psi_for_spec(spec: ArchInfSpec, length: int) -> PsiSequence:
    """psi_0..psi_length of an ARCH(inf) spec, memoized per spec."""
    key = (spec.spec_id, length)
    with _psi_lock:
        cached = _psi_cache.get(key)
    if cached is None:
        if spec.total() >= 1.0:
            raise DivergenceError(f"coefficient sum {spec.total():.6g} >= 1; the inverse series diverges")
        cached = psi_coefficients(spec.coefficients(length), length)
        with _psi_lock:
            _psi_cache.setdefault(key, cached)
    return cached


# ========== TAIL FUNCTIONALS ==========


def d_sequence(spec: ArchInfSpec, x: PastLike, k_max: int) -> TailFunctional:
    """
    d_k(x) = sum_{i>=0} a_{k+i} x_{-i} for k = 1..k_max.

    Past values beyond the explicit block sit at the block's tail level; their
    contribution is summed analytically through the spec's tail sums.
    """
    past = _past_block(x)
    if k_max < 0:
        raise SpecValidationError("k_max", "must be nonnegative")
    values = np.asarray(past.values, dtype=float)
    ks = np.arange(1, k_max + 1)
    if values.size:
        idx = ks[:, None] + np.arange(values.size)[None, :]
        d = spec.coefficients_at(idx) @ values
    else:
        d = np.zeros(k_max)
    if past.tail_level > 0:
        d = d + past.tail_level * spec.tail_sum(ks + values.size)
    return TailFunctional(values=np.asarray(d, dtype=float))


def _q0k_routes(spec: ArchInfSpec, x: PastLike, k: int) -> Tuple[float, float]:
    """(recursion, psi-convolution) values of Q_{0,k}(1, x)."""
    d = d_sequence(spec, x, k).values
    a = spec.coefficient_array(k)
    q = np.zeros(k + 1)
    for m in range(1, k + 1):
        q[m] = float(np.dot(a[1:m], q[m - 1 : 0 : -1])) + d[m - 1]
    psi = psi_for_spec(spec, k).values
    convolution = float(np.dot(psi[:k], d[::-1]))
    return float(q[k]), convolution


def q0k_mean(spec: ArchInfSpec, x: PastLike, k: int) -> float:
    """
    Q_{0,k}(1, x) by the recursion Q_k = sum_j a_j Q_{k-j} + d_k, cross-checked
    against sum_{j<k} psi_j d_{k-j}. Zero for k <= 0.
    """
    if k <= 0:
        return 0.0
    recursion, convolution = _q0k_routes(spec, x, k)
    if not math.isclose(recursion, convolution, rel_tol=_ROUTE_REL_TOL, abs_tol=1e-300):
        raise InternalConsistencyError(
            f"Q_0,{k}: recursion {recursion:.17g} disagrees with psi-convolution {convolution:.17g}"
        )
    return recursion


# ========== ARCH(inf) ==========


def _working_spec(spec: ArchInfSpec, truncation_lag: Optional[int]) -> Tuple[ArchInfSpec, int]:
    lag = truncation_lag
    if lag is None:
        lag = spec.cutoff if spec.cutoff is not None else choose_truncation_lag(spec)
    if lag < 1:
        raise SpecValidationError("truncation_lag", "must be at least 1")
    if spec.cutoff is not None and lag >= spec.cutoff:
        return spec, lag
    return spec.truncated(lag), lag


def _chain_weights(a: np.ndarray, z: np.ndarray, m: int) -> np.ndarray:
    """C[r] = sum over chains r = j_1 < ... < j_n = m of prod a_{j_{i+1}-j_i} prod_{i<n} z_{j_i}."""
    weights = np.zeros(m + 1)
    for r in range(1, m + 1):
        inner = range(r + 1, m)
        total = 0.0
        for size in range(len(inner) + 1):
            for middle in itertools.combinations(inner, size):
                chain = (r,) + middle + (m,)
                term = 1.0
                for lo, hi in zip(chain, chain[1:]):
                    term *= (a[hi - lo] if hi - lo < a.size else 0.0) * z[lo]
                total += term
        weights[r] = total
    return weights


def pq_archinf(spec: ArchInfSpec, z: Sequence[float], x: PastLike, s: int, k: int,
               truncation_lag: Optional[int] = None, oracle: bool = False) -> PqTerms:
    """
    Split X_{k+s} = Z_{k+s} (P + Q) for the ARCH(inf) recursion truncated at L.

    Args:
        spec: ARCH(inf) spec
        z: Z_1, ..., Z_{k-1} when s = 0; Z_1, ..., Z_{k+s-1} when s >= 1
        x: Past block (X_0, X_{-1}, ...)
        s: Offset beyond the lag; X_k..X_{k+s-1} enter P as conditioned values
        k: Lag, >= 1
        truncation_lag: L; defaults to the explicit cutoff or the tail-tolerance lag
        oracle: Also evaluate the explicit chain sums (k <= 12) and require agreement

    Returns:
        PqTerms with Q from the linear recursion route
    """
    _check_lags(s, k)
    steps = k - 1 if s == 0 else k + s - 1
    z = _innovations(z, steps)
    past = _past_block(x)
    limit = get_bound_config().multi_index_limit
    if oracle and k > limit:
        raise CombinatorialLimitError(f"chain-sum oracle is limited to k <= {limit}, got k={k}")

    work, _ = _working_spec(spec, truncation_lag)
    horizon = k + s
    a = work.coefficient_array(horizon)
    d = np.concatenate([[0.0], d_sequence(work, past, horizon).values])
    zt = np.concatenate([[0.0], z])

    # P_{0,m}, Q_{0,m} for m = 1..steps, indexed by m
    p0 = np.zeros(steps + 1)
    q0 = np.zeros(steps + 1)
    for m in range(1, steps + 1):
        back = zt[m - 1 : 0 : -1]
        p0[m] = work.a0 + float(np.dot(a[1:m], back * p0[m - 1 : 0 : -1]))
        q0[m] = float(np.dot(a[1:m], back * q0[m - 1 : 0 : -1])) + d[m]

    p_term, q_term = _pq_from_parts(work.a0, a, zt, p0, q0, d, s, k)

    if oracle:
        p_chain, q_chain = _chain_terms(work.a0, a, zt, d, s, k)
        for label, fast, slow in (("P", p_term, p_chain), ("Q", q_term, q_chain)):
            if not math.isclose(fast, slow, rel_tol=_ROUTE_REL_TOL, abs_tol=1e-300):
                raise InternalConsistencyError(
                    f"{label}_{s},{k}: recursion {fast:.17g} disagrees with chain sum {slow:.17g}"
                )

    return PqTerms(p_term=p_term, q_term=q_term, s=s, k=k, t=0, conditioning_block=z.tolist())


def _chain_terms(a0: float, a: np.ndarray, zt: np.ndarray, d: np.ndarray, s: int,
                 k: int) -> Tuple[float, float]:
    """P_{s,k}, Q_{s,k} with P_{0,m}, Q_{0,m} from explicit chain sums."""
    steps = k - 1 if s == 0 else k + s - 1
    p0 = np.zeros(steps + 1)
    q0 = np.zeros(steps + 1)
    for m in range(1, steps + 1):
        weights = _chain_weights(a, zt, m)
        p0[m] = a0 * weights.sum()
        q0[m] = float(np.dot(weights[1:], d[1 : m + 1]))
    return _pq_from_parts(a0, a, zt, p0, q0, d, s, k)


def chain_sum_terms(spec: ArchInfSpec, z: Sequence[float], x: PastLike, s: int, k: int,
                    truncation_lag: Optional[int] = None) -> Tuple[float, float]:
    """
    P_{s,k} and Q_{s,k} of the truncated ARCH(inf) recursion by explicit chain enumeration.

    Exponential in k; limited to k <= multi_index_limit.
    """
    _check_lags(s, k)
    limit = get_bound_config().multi_index_limit
    if k > limit:
        raise CombinatorialLimitError(f"chain-sum oracle is limited to k <= {limit}, got k={k}")
    steps = k - 1 if s == 0 else k + s - 1
    zt = np.concatenate([[0.0], _innovations(z, steps)])
    work, _ = _working_spec(spec, truncation_lag)
    a = work.coefficient_array(k + s)
    d = np.concatenate([[0.0], d_sequence(work, _past_block(x), k + s).values])
    return _chain_terms(work.a0, a, zt, d, s, k)


def _pq_from_parts(a0: float, a: np.ndarray, zt: np.ndarray, p0: np.ndarray, q0: np.ndarray,
                   d: np.ndarray, s: int, k: int) -> Tuple[float, float]:
    """Assemble P_{s,k}, Q_{s,k} from P_{0,m}, Q_{0,m} (m < k + s) and d."""
    if s == 0:
        if k == 1:
            return a0, float(d[1])
        m = k
        back = zt[m - 1 : 0 : -1]
        p_term = a0 + float(np.dot(a[1:m], back * p0[m - 1 : 0 : -1]))
        q_term = float(np.dot(a[1:m], back * q0[m - 1 : 0 : -1])) + d[m]
        return p_term, float(q_term)
    horizon = k + s
    p_term = a0
    q_term = float(d[horizon])
    for j in range(1, horizon):
        m = horizon - j
        if j <= s:
            p_term += a[j] * zt[m] * (p0[m] + q0[m])
        else:
            p_term += a[j] * zt[m] * p0[m]
            q_term += a[j] * zt[m] * q0[m]
    return float(p_term), q_term


# ========== IDENTITY SUITE ==========


def random_archinf_specs(rng: np.random.Generator, count: int) -> List[ArchInfSpec]:
    """Random stationary ARCH(inf) specs mixing explicit, geometric and polynomial coefficients."""
    specs: List[ArchInfSpec] = []
    for n in range(count):
        total = rng.uniform(0.1, 0.8)
        delta = 0.5 * (1.0 - total)
        a0 = rng.uniform(0.05, 2.0)
        flavor = n % 3
        if flavor == 0:
            raw = rng.uniform(0.0, 1.0, size=int(rng.integers(1, 12)))
            coeffs = (total * raw / max(raw.sum(), 1e-12)).tolist()
            specs.append(ArchInfSpec(a0=a0, coeffs=coeffs, delta=delta))
        elif flavor == 1:
            rule = CoefficientRule.scaled_to("geometric", float(rng.uniform(0.2, 0.9)), total)
            specs.append(ArchInfSpec(a0=a0, rule=rule, delta=delta))
        else:
            rule = CoefficientRule.scaled_to("polynomial", float(rng.uniform(2.0, 4.0)), total)
            specs.append(ArchInfSpec(a0=a0, rule=rule, delta=delta))
    return specs


def random_tvarch_specs(rng: np.random.Generator, count: int) -> List[TvArchSpec]:
    """Random two-regime tvARCH(p) specs with p in 1..4."""
    specs: List[TvArchSpec] = []
    for _ in range(count):
        p = int(rng.integers(1, 5))
        rows, intercepts = [], []
        for _ in range(2):
            raw = rng.uniform(0.0, 1.0, size=p)
            rows.append((rng.uniform(0.1, 0.8) * raw / max(raw.sum(), 1e-12)).tolist())
            intercepts.append(float(rng.uniform(0.05, 1.0)))
        schedule = CoefficientSchedule(breakpoints=[0, int(rng.integers(1, 6))], intercepts=intercepts, coeffs=rows)
        specs.append(TvArchSpec(p=p, schedule=schedule, delta=0.2))
    return specs


def _rel_err(value: float, reference: float) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


def verify_identities(spec_list: Sequence[Union[TvArchSpec, ArchInfSpec]],
                      rng: np.random.Generator) -> List[CheckRow]:
    """
    Run the expansion identities over a list of specs.

    Checks: psi convolution identity, recursion vs psi-convolution for Q_{0,k}(1, x),
    exact reproduction of simulated tvARCH and ARCH(inf) values, the chain-sum
    oracle, and linearity of Q in the past block.
    """
    errors: Dict[str, List[float]] = {
        "psi_convolution": [],
        "q0k_dual_route": [],
        "tvarch_exactness": [],
        "archinf_exactness": [],
        "chain_oracle": [],
        "q_linearity": [],
    }
    tolerances = {"psi_convolution": 1e-12, "q_linearity": 0.0}

    for spec in spec_list:
        if isinstance(spec, TvArchSpec):
            for k in range(1, 9):
                for s in range(0, 4):
                    x = rng.exponential(size=spec.p)
                    z = rng.exponential(size=k + s)
                    steps = k - 1 if s == 0 else k + s - 1
                    terms = pq_tvarch(spec, z[:steps], x, s, k, t=0)
                    path = propagate_tvarch(spec, 0, x, z)
                    errors["tvarch_exactness"].append(_rel_err(z[-1] * terms.scale, path[-1]))
            continue

        psi = psi_for_spec(spec, 64)
        errors["psi_convolution"].append(psi.residual())

        lag = spec.cutoff if spec.cutoff is not None else _VERIFY_LAG
        past = rng.exponential(size=min(lag, 64))
        for k in range(1, 51):
            recursion, convolution = _q0k_routes(spec, past, k)
            errors["q0k_dual_route"].append(_rel_err(recursion, convolution))
            doubled = q0k_mean(spec, 2.0 * past, k)
            errors["q_linearity"].append(abs(doubled - 2.0 * recursion))

        x = np.zeros(lag)
        x[: past.size] = past
        for k in range(1, 9):
            for s in range(0, 4):
                z = rng.exponential(size=k + s)
                steps = k - 1 if s == 0 else k + s - 1
                terms = pq_archinf(spec, z[:steps], x, s, k, truncation_lag=lag)
                path = propagate_archinf(spec, x, z, lag)
                errors["archinf_exactness"].append(_rel_err(z[-1] * terms.scale, path[-1]))
        for k in range(1, get_bound_config().multi_index_limit + 1):
            for s in range(0, 4):
                z = rng.exponential(size=k - 1 if s == 0 else k + s - 1)
                terms = pq_archinf(spec, z, x, s, k, truncation_lag=lag)
                p_chain, q_chain = chain_sum_terms(spec, z, x, s, k, truncation_lag=lag)
                worst = max(_rel_err(p_chain, terms.p_term), _rel_err(q_chain, terms.q_term))
                errors["chain_oracle"].append(worst)

    rows = []
    for name, values in errors.items():
        worst = max(values, default=0.0)
        tol = tolerances.get(name, _ROUTE_REL_TOL)
        passed = worst <= tol
        rows.append(CheckRow(check=name, instances=len(values), max_rel_err=worst, passed=passed))
        marker = "✓" if passed else "⚠️"
        logger.info(f"{marker} {name}: {len(values)} instances, max error {worst:.3g}")
    return rows
