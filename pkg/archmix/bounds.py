"""
Theoretical mixing-rate bounds.

Provides:
- Closed-form minimizer of sum_i (c_i eta_i + d_i eta_i^(-nu)) and a golden-section oracle
- Envelope assembly 2 * TV-sum + 4 * tail probability
- Geometric tvARCH(p) bound with explicitly assembled constants
- ARCH(inf) alpha/beta and 2-mixing bounds with certified truncations
- Decay-rate classes and per-lag bound curves
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, signal, special

from config import BoundConfig, get_bound_config, get_runtime_config
from errors import (
    ContractError,
    DivergenceError,
    InternalConsistencyError,
    SpecValidationError,
    TruncationError,
)
from process_models import companion_matrices, moment_bound, stationary_mean_bound
from schemas import (
    ArchInfBound,
    ArchInfSpec,
    BoundCurve,
    CheckRow,
    EtaProblem,
    InnovationModel,
    LinearTvTerm,
    PowerTailTerm,
    RateClass,
    SpectralDecayReport,
    TvArchBound,
    TvArchSpec,
)
from volterra import psi_for_spec, q_weights_tvarch

logger = logging.getLogger(__name__)

EnvelopeTerm = Union[LinearTvTerm, PowerTailTerm, Callable[[np.ndarray], float]]

_LOG_ETA_RANGE = 40.0


# ========== ETA MINIMIZATION ==========


def eta_constant(nu: float) -> float:
    """nu^(1/(1+nu)) + nu^(-nu/(nu+1))."""
    return nu ** (1.0 / (1.0 + nu)) + nu ** (-nu / (nu + 1.0))


def k_nu(nu: float) -> float:
    """K(nu) = 3 (nu^(1/(1+nu)) + nu^(-nu/(nu+1)))."""
    return 3.0 * eta_constant(nu)


def minimize_eta(problem: EtaProblem) -> Tuple[float, np.ndarray]:
    """
    Closed-form infimum of sum_i (c_i eta_i + d_i eta_i^(-nu)).

    Returns:
        (value, eta) with eta_i = (nu d_i / c_i)^(1/(1+nu)) and
        value = (nu^(1/(1+nu)) + nu^(-nu/(nu+1))) sum_i c_i^(nu/(nu+1)) d_i^(1/(nu+1))
    """
    c = np.asarray(problem.c)
    d = np.asarray(problem.d)
    nu = problem.nu
    theta = nu / (nu + 1.0)
    eta = (nu * d / c) ** (1.0 / (1.0 + nu))
    value = eta_constant(nu) * float(np.sum(c**theta * d ** (1.0 - theta)))
    return value, eta


def _golden_coordinate(fn: Callable[[float], float], tol: float) -> Tuple[float, float]:
    """Minimize fn over log-eta in [-40, 40]: coarse scan, then golden section on the best bracket."""
    grid = np.linspace(-_LOG_ETA_RANGE, _LOG_ETA_RANGE, 161)
    values = np.array([fn(x) for x in grid])
    best = int(np.argmin(values))
    if best in (0, grid.size - 1):
        return float(grid[best]), float(values[best])
    result = optimize.minimize_scalar(
        fn, bracket=(grid[best - 1], grid[best], grid[best + 1]), method="golden", tol=tol
    )
    return float(result.x), float(result.fun)


def golden_section_eta(objective: Callable[[np.ndarray], float], n: int,
                       sweeps: int = 50) -> Tuple[float, np.ndarray]:
    """
    Per-coordinate golden-section minimization of objective(eta) over eta in (0, inf)^n.

    Coordinates are swept cyclically in log scale until a sweep no longer improves
    the value by more than the golden tolerance.
    """
    if n < 1:
        raise SpecValidationError("n", "need at least one coordinate")
    tol = get_bound_config().golden_tol
    log_eta = np.zeros(n)
    value = float(objective(np.exp(log_eta)))
    for _ in range(sweeps):
        before = value
        for j in range(n):
            def along(x: float, j: int = j) -> float:
                trial = log_eta.copy()
                trial[j] = x
                return float(objective(np.exp(trial)))

            log_eta[j], value = _golden_coordinate(along, tol)
        if before - value <= tol * max(abs(value), 1e-300):
            break
    return value, np.exp(log_eta)


# ========== ENVELOPE ASSEMBLY ==========


def _check_monotone(tv_sum: Callable, tail_prob: Callable, n: int) -> None:
    """Check coordinatewise monotonicity: tv_sum nondecreasing, tail_prob nonincreasing."""
    rng = np.random.default_rng(0)
    for _ in range(8):
        eta = np.exp(rng.uniform(-4.0, 4.0, size=n))
        tv0, tail0 = tv_sum(eta), tail_prob(eta)
        for j in range(n):
            bumped = eta.copy()
            bumped[j] *= 2.0
            tv1, tail1 = tv_sum(bumped), tail_prob(bumped)
            if tv1 < tv0 - 1e-12 * max(abs(tv0), 1.0):
                raise ContractError(f"tv_sum decreases in coordinate {j} near eta={eta[j]:.3g}")
            if tail1 > tail0 + 1e-12 * max(abs(tail0), 1.0):
                raise ContractError(f"tail_prob increases in coordinate {j} near eta={eta[j]:.3g}")


def assemble_envelope(tv_sum: EnvelopeTerm, tail_prob: Optional[EnvelopeTerm] = None,
                      n: Optional[int] = None) -> float:
    """
    inf over eta of 2 * tv_sum(eta) + 4 * tail_prob(eta).

    Args:
        tv_sum: LinearTvTerm or a callable nondecreasing in every coordinate
        tail_prob: PowerTailTerm, a callable nonincreasing in every coordinate, or None for zero
        n: Number of coordinates (required when neither term is structured)

    Returns:
        The envelope value; closed form for structured terms, golden section otherwise
    """
    if isinstance(tv_sum, LinearTvTerm) and (tail_prob is None or isinstance(tail_prob, PowerTailTerm)):
        c = 2.0 * np.asarray(tv_sum.weights)
        if tail_prob is None:
            return 0.0
        d = 4.0 * np.asarray(tail_prob.weights)
        if d.size != c.size:
            raise SpecValidationError("tail_prob", "needs one weight per TV coordinate")
        active = (c > 0) & (d > 0)
        if not np.any(active):
            return 0.0
        value, _ = minimize_eta(EtaProblem(c=c[active].tolist(), d=d[active].tolist(), nu=tail_prob.nu))
        return value

    if n is None:
        for term in (tv_sum, tail_prob):
            if isinstance(term, (LinearTvTerm, PowerTailTerm)):
                n = len(term.weights)
    if n is None:
        raise SpecValidationError("n", "coordinate count is required for callable terms")
    tail = tail_prob if tail_prob is not None else (lambda eta: 0.0)
    _check_monotone(tv_sum, tail, n)
    value, _ = golden_section_eta(lambda eta: 2.0 * tv_sum(eta) + 4.0 * tail(eta), n)
    return max(value, 0.0)


# ========== tvARCH(p) ==========


def _spectral_norm(M: np.ndarray, tol: float, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on M^T M from the ones vector."""
    scale = float(np.max(np.abs(M)))
    if scale == 0.0:
        return 0.0
    B = M / scale
    v = np.ones(B.shape[1]) / math.sqrt(B.shape[1])
    previous = 0.0
    estimate = 0.0
    for _ in range(max_iter):
        w = B.T @ (B @ v)
        estimate = float(np.linalg.norm(w))
        if estimate == 0.0:
            return 0.0
        v = w / estimate
        if abs(estimate - previous) <= tol * estimate:
            break
        previous = estimate
    return scale * math.sqrt(estimate)


def _resolve_delta_tilde(spec: TvArchSpec, delta_tilde: Optional[float], cfg: BoundConfig) -> float:
    if delta_tilde is None:
        return cfg.delta_tilde_fraction * spec.delta
    if not 0.0 < delta_tilde < spec.delta:
        raise SpecValidationError("delta_tilde", f"must lie in (0, {spec.delta})")
    return float(delta_tilde)


def _forward_spectral_constant(spec: TvArchSpec, t: int, m_max: int, delta_tilde: float, tol: float) -> float:
    """max(1, max_{m <= m_max} ||A~_{t+m} ... A~_{t+1}||_2 / (1 - delta_tilde)^m)."""
    product = np.eye(spec.p)
    constant = 1.0
    for m in range(1, m_max + 1):
        _, A_tilde, _ = companion_matrices(spec, t + m)
        product = A_tilde @ product
        constant = max(constant, _spectral_norm(product, tol) / (1.0 - delta_tilde) ** m)
    return constant


def tvarch_alpha_bound(spec: TvArchSpec, innovation: InnovationModel, t: int, k: int,
                       delta_tilde: Optional[float] = None, clause: str = "iii") -> TvArchBound:
    """
    Geometric mixing bound of tvARCH(p) between sigma(X_s, s <= t) and sigma(X_s, s >= t + k).

    The explicit value is inf_eta [2 (K+1)/inf a0 sum_{s<p} w_s . eta + 4 M sum_j 1/eta_j]
    with exact Q-weights w_s and M the stationary mean bound. The envelope
    K' (1 - delta_tilde)^(k/2) dominates it with
    K' = 2p sqrt(4M * 2(K+1)/inf a0 * K_spec * C), K_spec the largest ratio
    ||A~ products||_2 / (1 - delta_tilde)^m over the lags involved and
    C = sum_{s<p} sum_{i>=max(s,1)} sup a_i (1 - delta_tilde)^(s-i).

    Args:
        spec: tvARCH spec
        innovation: Innovation model with certified constants
        t: Time of the most recent past value
        k: Lag, >= 1
        delta_tilde: Contraction exponent in (0, delta); default 0.9 * delta
        clause: "iii" (alpha-mixing) or "iv" (beta-mixing) Lipschitz constant

    Returns:
        TvArchBound
    """
    cfg = get_bound_config()
    if k < 1:
        raise SpecValidationError("k", "must be at least 1")
    if clause not in ("iii", "iv"):
        raise SpecValidationError("clause", "must be 'iii' or 'iv'")
    dt = _resolve_delta_tilde(spec, delta_tilde, cfg)
    p = spec.p
    lipschitz = innovation.lipschitz_iii if clause == "iii" else innovation.lipschitz_iv

    window = (t - p + 1, t + k + p)
    a0, a = spec.coefficients_over(*window)
    inf_a0 = float(a0.min())
    mean = stationary_mean_bound(spec, window)

    weights = np.zeros(p)
    for s in range(p):
        weights += q_weights_tvarch(spec, s, k, t)
    c = 2.0 * (lipschitz + 1.0) / inf_a0 * weights
    active = c > 0
    if np.any(active):
        explicit, _ = minimize_eta(
            EtaProblem(c=c[active].tolist(), d=[4.0 * mean] * int(active.sum()), nu=1.0)
        )
    else:
        explicit = 0.0

    k_spec = _forward_spectral_constant(spec, t, k + p, dt, cfg.power_tol)
    a_sup = a.max(axis=0)
    spread = sum(
        a_sup[i - 1] * (1.0 - dt) ** (s - i) for s in range(p) for i in range(max(s, 1), p + 1)
    )
    k_prime = 2.0 * p * math.sqrt(4.0 * mean * 2.0 * (lipschitz + 1.0) / inf_a0 * k_spec * spread)
    envelope = k_prime * (1.0 - dt) ** (k / 2.0)

    return TvArchBound(
        t=t,
        k=k,
        explicit=explicit,
        envelope=envelope,
        k_prime=k_prime,
        delta_tilde=dt,
        lipschitz=lipschitz,
        mean_bound=mean,
        inf_intercept=inf_a0,
        tv_weights=c.tolist(),
    )


def optimize_delta_tilde(spec: TvArchSpec, innovation: InnovationModel, t: int, k: int) -> TvArchBound:
    """Pick delta_tilde in (0, delta) minimizing the envelope at lag k."""
    lo, hi = 1e-6 * spec.delta, spec.delta * (1.0 - 1e-9)
    result = optimize.minimize_scalar(
        lambda dt: tvarch_alpha_bound(spec, innovation, t, k, delta_tilde=dt).envelope,
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-8 * spec.delta},
    )
    best = tvarch_alpha_bound(spec, innovation, t, k, delta_tilde=float(result.x))
    logger.info(f"delta_tilde={best.delta_tilde:.6g} minimizes the envelope at k={k}: {best.envelope:.6g}")
    return best


def spectral_product_decay(spec: TvArchSpec, t: int, k_max: int,
                           delta_tilde: Optional[float] = None) -> SpectralDecayReport:
    """
    Spectral norms of backward products A~_t A~_{t-1} ... A~_{t-k+1} for k = 1..k_max.

    Also reports the smallest K with norm_k <= K (1 - delta_tilde)^k on the range, and the
    infinity norms of consecutive p-step blocks (each at most sup_t sum_j a_j(t)).
    """
    cfg = get_bound_config()
    if k_max < spec.p:
        raise SpecValidationError("k_max", f"must be at least p = {spec.p}")
    dt = _resolve_delta_tilde(spec, delta_tilde, cfg)
    product = np.eye(spec.p)
    norms = []
    for i in range(k_max):
        _, A_tilde, _ = companion_matrices(spec, t - i)
        product = product @ A_tilde
        norms.append(_spectral_norm(product, cfg.power_tol))
    k_constant = max(n / (1.0 - dt) ** (i + 1) for i, n in enumerate(norms))

    block_factors = []
    for start in range(0, k_max - spec.p + 1, spec.p):
        block = np.eye(spec.p)
        for i in range(start, start + spec.p):
            block = block @ companion_matrices(spec, t - i)[1]
        block_factors.append(float(np.linalg.norm(block, ord=np.inf)))

    return SpectralDecayReport(
        t=t, k_max=k_max, delta_tilde=dt, norms=norms, k_constant=k_constant, block_factors=block_factors
    )


# ========== ARCH(inf) ==========


def _alpha_brackets(spec: ArchInfSpec, k: int, n_terms: int) -> np.ndarray:
    """
    bracket_i, i = 0..n_terms, of the alpha/beta bound with the s-sum in closed form:
    a0 * bracket_i = sum_{n=1}^{k} g_n a_{k-n+i} + S(k+i), g_n = sum_{u=1}^{n} S(u) psi_{n-u},
    S(q) = sum_{j>=q} a_j and a_0 := 0.
    """
    psi = psi_for_spec(spec, k).values
    tails = spec.tail_sum(np.arange(1, k + 1))
    g = np.convolve(tails, psi[:k])[:k]
    a = spec.coefficient_array(n_terms + k - 1)
    linear = signal.correlate(a, g[::-1], mode="valid", method="direct")
    tail = spec.tail_sum(k + np.arange(n_terms + 1))
    return np.maximum(linear + tail, 0.0) / spec.a0


def _twomix_brackets(spec: ArchInfSpec, k: int, n_terms: int, literal: bool) -> np.ndarray:
    """bracket_i = (1/a0) sum_{j=0}^{k-1} w_j a_{k-j+i}, w_j = psi_j (or a_j psi_j when literal)."""
    psi = psi_for_spec(spec, k).values[:k]
    weights = psi * spec.coefficient_array(k - 1) if literal else psi
    kernel = np.concatenate([[0.0], weights[::-1]])
    a = spec.coefficient_array(n_terms + k)
    linear = signal.correlate(a, kernel, mode="valid", method="direct")
    return np.maximum(linear, 0.0) / spec.a0


def _i_tail_certificate(spec: ArchInfSpec, last: float, n_terms: int, k: int, theta: float) -> float:
    """Bound on sum_{i > n_terms} bracket_i^theta given bracket_{n_terms} = last."""
    if spec.cutoff is not None or last == 0.0:
        return 0.0
    rule = spec.rule
    if rule.kind == "geometric":
        ratio = rule.param**theta
        return last**theta * ratio / (1.0 - ratio)
    power = theta * (rule.param - 1.0)
    if power <= 1.0:
        raise DivergenceError(
            f"sum_i bracket_i^theta diverges: theta*(exponent-1) = {power:.6g} <= 1"
        )
    anchor = float(k + n_terms)
    return float(last**theta * anchor**power * special.zeta(power, anchor + 1.0))


def _certified_sum(spec: ArchInfSpec, brackets_fn: Callable[[int], np.ndarray], k: int, theta: float,
                   i_max: Optional[int], cfg: BoundConfig) -> Tuple[np.ndarray, float, int]:
    """Brackets up to a certified i-truncation, the tail certificate and the truncation used."""

    def attempt(n_terms: int) -> Tuple[np.ndarray, float]:
        brackets = brackets_fn(n_terms)
        return brackets, _i_tail_certificate(spec, float(brackets[-1]), n_terms, k, theta)

    def good_enough(brackets: np.ndarray, cert: float) -> bool:
        partial = float(np.sum(brackets**theta))
        return cert <= cfg.tail_tol * partial or partial == 0.0

    if spec.cutoff is not None:
        if i_max is not None and i_max < spec.cutoff:
            raise TruncationError(
                f"i_max={i_max} drops nonzero terms; explicit coefficients need i_max >= {spec.cutoff}",
                required={"i_max": spec.cutoff},
            )
        n_terms = max(spec.cutoff, 1) if i_max is None else i_max
        brackets, cert = attempt(n_terms)
        return brackets, cert, n_terms

    if i_max is not None:
        brackets, cert = attempt(i_max)
        if good_enough(brackets, cert):
            return brackets, cert, i_max
        required = i_max
        while not good_enough(*attempt(required)) and required < 64 * cfg.i_cap:
            required *= 2
        raise TruncationError(
            f"i-tail certificate {cert:.3g} exceeds tail_tol at i_max={i_max}; need i_max >= {required}",
            required={"i_max": required},
        )

    n_terms = cfg.i_start
    brackets, cert = attempt(n_terms)
    while not good_enough(brackets, cert):
        if n_terms >= cfg.i_cap:
            logger.warning(
                f"⚠️ i-truncation capped at {n_terms} for k={k}; certificate {cert:.3g} added to the bound"
            )
            break
        n_terms = min(2 * n_terms, cfg.i_cap)
        brackets, cert = attempt(n_terms)
    return brackets, cert, n_terms


def _assemble_archinf(spec: ArchInfSpec, innovation: InnovationModel, k: int,
                      brackets_fn: Callable[[int], np.ndarray], i_max: Optional[int],
                      s_max: Optional[int]) -> ArchInfBound:
    cfg = get_bound_config()
    if k < 1:
        raise SpecValidationError("k", "must be at least 1")
    nu = spec.nu
    theta = nu / (nu + 1.0)
    moment, _ = moment_bound(spec, innovation)
    brackets, cert, n_terms = _certified_sum(spec, brackets_fn, k, theta, i_max, cfg)
    mass = float(np.sum(brackets**theta)) + cert
    packaged = k_nu(nu) * moment ** (1.0 - theta) * mass

    active = brackets > 0
    if np.any(active):
        tight, _ = minimize_eta(
            EtaProblem(c=(2.0 * brackets[active]).tolist(), d=[4.0 * moment] * int(active.sum()), nu=nu)
        )
    else:
        tight = 0.0
    tight += eta_constant(nu) * 2.0**theta * 4.0 ** (1.0 - theta) * moment ** (1.0 - theta) * cert
    if tight > packaged * (1.0 + 1e-12):
        raise InternalConsistencyError(f"tight bound {tight:.17g} exceeds packaged bound {packaged:.17g}")

    return ArchInfBound(
        k=k,
        packaged=packaged,
        tight=tight,
        i_max=n_terms,
        s_max=s_max,
        i_certificate=cert,
        s_certificate=0.0,
        k_nu=k_nu(nu),
        moment=moment,
    )


def archinf_alpha_beta_bound(spec: ArchInfSpec, innovation: InnovationModel, k: int,
                             s_max: Optional[int] = None, i_max: Optional[int] = None) -> ArchInfBound:
    """
    alpha- and beta-mixing bound of ARCH(inf) at lag k.

    packaged = K(nu) E|X_0|^nu ^(1/(nu+1)) sum_i bracket_i^(nu/(nu+1)); the tight value is
    the direct eta-infimum of sum_i (2 bracket_i eta_i + 4 E|X_0|^nu eta_i^(-nu)). The s-sum
    is summed exactly through coefficient tail sums, so s_max is only recorded.
    """
    return _assemble_archinf(
        spec, innovation, k, lambda n: _alpha_brackets(spec, k, n), i_max, s_max
    )


def archinf_two_mix_bound(spec: ArchInfSpec, innovation: InnovationModel, k: int,
                          i_max: Optional[int] = None, literal: bool = False) -> ArchInfBound:
    """2-mixing bound of ARCH(inf) at lag k (literal=True weights psi_j by a_j)."""
    return _assemble_archinf(
        spec, innovation, k, lambda n: _twomix_brackets(spec, k, n, literal), i_max, None
    )


def rate_classifier(spec: ArchInfSpec) -> RateClass:
    """Symbolic decay class of the ARCH(inf) bounds from the coefficient tail class."""
    tail = spec.rate_tail()
    if tail is None:
        raise SpecValidationError("tail", "a declared tail class is needed to classify the rate")
    nu = spec.nu
    if tail.kind == "geometric":
        expr = f"C*k*{tail.param:.6g}^(k/2)"
        return RateClass(kind="geometric", param=tail.param, nu=nu, alpha_beta_expr=expr, twomix_expr=expr)
    dt = tail.param * nu / (nu + 1.0)
    return RateClass(
        kind="polynomial",
        param=tail.param,
        nu=nu,
        delta_tilde=dt,
        alpha_beta_expr=f"k*(k+1)^({3.0 - dt:.6g}) + (k+1)^({2.0 - dt:.6g})",
        twomix_expr=f"k*(k+1)^({1.0 - dt:.6g})",
    )


# ========== CURVES ==========


def _monotone_from(lags: Sequence[int], values: Sequence[float]) -> Optional[int]:
    if not lags:
        return None
    start = len(values) - 1
    while start > 0 and values[start - 1] >= values[start]:
        start -= 1
    return int(lags[start])


def bound_curve(spec: Union[TvArchSpec, ArchInfSpec], innovation: InnovationModel, lags: Sequence[int],
                variant: str = "packaged", literal: bool = False, s_max: Optional[int] = None,
                i_max: Optional[int] = None, delta_tilde: Optional[float] = None, t: int = 0,
                workers: Optional[int] = None) -> BoundCurve:
    """
    Per-lag alpha, beta, 2-mixing and tight alpha bounds.

    tvARCH: the packaged columns are the geometric envelopes (clause iii for alpha and
    2-mixing, clause iv for beta) and the tight column is the explicit assembly.
    ARCH(inf): alpha and beta share the alpha/beta bound; `variant` picks which value
    fills the alpha, beta and 2-mixing columns.
    """
    if variant not in ("packaged", "tight"):
        raise SpecValidationError("variant", "must be 'packaged' or 'tight'")
    lags = [int(k) for k in lags]
    workers = workers or get_runtime_config().workers
    constants: Dict[str, object] = {
        "K_iii": innovation.lipschitz_iii,
        "K_iv": innovation.lipschitz_iv,
        "innovation": innovation.label,
    }

    if isinstance(spec, TvArchSpec):
        def one(k: int) -> Tuple[TvArchBound, TvArchBound]:
            return (
                tvarch_alpha_bound(spec, innovation, t, k, delta_tilde, clause="iii"),
                tvarch_alpha_bound(spec, innovation, t, k, delta_tilde, clause="iv"),
            )

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, lags))
        pick = (lambda b: b.envelope) if variant == "packaged" else (lambda b: b.explicit)
        alpha = [pick(a) for a, _ in results]
        beta = [pick(b) for _, b in results]
        tight = [a.explicit for a, _ in results]
        first = results[0][0] if results else None
        if first is not None:
            constants.update(
                delta_tilde=first.delta_tilde,
                mean_bound=first.mean_bound,
                inf_intercept=first.inf_intercept,
                k_prime=[a.k_prime for a, _ in results],
                t=t,
            )
            rate = f"geometric(ratio={math.sqrt(1.0 - first.delta_tilde):.6g})"
        else:
            rate = "geometric"
        return BoundCurve(
            lags=lags,
            alpha_bound=alpha,
            beta_bound=beta,
            twomix_bound=list(alpha),
            tight_alpha=tight,
            constants=constants,
            rate_class=rate,
            monotone_from=_monotone_from(lags, alpha),
        )

    def one_inf(k: int) -> Tuple[ArchInfBound, ArchInfBound]:
        return (
            archinf_alpha_beta_bound(spec, innovation, k, s_max=s_max, i_max=i_max),
            archinf_two_mix_bound(spec, innovation, k, i_max=i_max, literal=literal),
        )

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one_inf, lags))
    pick = (lambda b: b.packaged) if variant == "packaged" else (lambda b: b.tight)
    alpha = [pick(a) for a, _ in results]
    twomix = [pick(m) for _, m in results]
    _, source = moment_bound(spec, innovation)
    constants.update(
        K_nu=k_nu(spec.nu),
        nu=spec.nu,
        moment=results[0][0].moment if results else None,
        moment_source=source,
        i_max=[a.i_max for a, _ in results],
        i_certificate=[a.i_certificate for a, _ in results],
        literal=literal,
    )
    try:
        rate_class = rate_classifier(spec)
        constants["delta_tilde"] = rate_class.delta_tilde
        rate = rate_class.label
    except SpecValidationError:
        rate = "unclassified"
    return BoundCurve(
        lags=lags,
        alpha_bound=alpha,
        beta_bound=list(alpha),
        twomix_bound=twomix,
        tight_alpha=[a.tight for a, _ in results],
        constants=constants,
        rate_class=rate,
        monotone_from=_monotone_from(lags, alpha),
    )


# ========== VERIFICATION SUITE ==========


def verify_minimize_eta(rng: np.random.Generator, count: int = 100) -> List[CheckRow]:
    """
    Check the closed-form minimizer on random problems.

    Rows: plug-back of eta into the objective, no random eta beating the closed form,
    and agreement with per-coordinate golden-section minimization.
    """
    plug_errors, violations, golden_errors = [], [], []
    for _ in range(count):
        n = int(rng.integers(1, 9))
        problem = EtaProblem(
            c=np.exp(rng.uniform(-3, 3, size=n)).tolist(),
            d=np.exp(rng.uniform(-3, 3, size=n)).tolist(),
            nu=float(rng.choice([0.5, 1.0, 2.0, 3.0])),
        )
        value, eta = minimize_eta(problem)
        plug_errors.append(abs(problem.objective(eta) - value) / value)
        samples = np.exp(rng.uniform(-6, 6, size=(1000, n)))
        c, d = np.asarray(problem.c), np.asarray(problem.d)
        objectives = np.sum(c * samples + d * samples ** (-problem.nu), axis=1)
        violations.append(max(0.0, (value - float(objectives.min())) / value))
        golden_value, _ = golden_section_eta(problem.objective, n)
        golden_errors.append(abs(golden_value - value) / value)

    rows = [
        CheckRow(check="minimize_eta_plugback", instances=count, max_rel_err=max(plug_errors),
                 passed=max(plug_errors) <= 1e-12),
        CheckRow(check="minimize_eta_optimality", instances=count * 1000, max_rel_err=max(violations),
                 passed=max(violations) == 0.0),
        CheckRow(check="minimize_eta_golden", instances=count, max_rel_err=max(golden_errors),
                 passed=max(golden_errors) <= 1e-8),
    ]
    for row in rows:
        marker = "✓" if row.passed else "⚠️"
        logger.info(f"{marker} {row.check}: max error {row.max_rel_err:.3g}")
    return rows
