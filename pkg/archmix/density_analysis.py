"""
Density analysis for positive scale families.

Provides:
- Numerical certification of the scale-perturbation Lipschitz constants K of an
  innovation density (shift clause and supremum clause)
- Total variation between two scale mixtures of the innovation density and the
  two-term bound it is dominated by
- Conditional densities (1/(P+Q)) f_Z(y/(P+Q)) of the expanded process
"""

import logging
import warnings
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, optimize

from config import DensityConfig, get_density_config
from errors import InternalConsistencyError, QuadratureError, SpecValidationError
from schemas import InnovationLaw, InnovationModel, LipschitzCertificate, TvReport

logger = logging.getLogger(__name__)

LawLike = Union[InnovationLaw, InnovationModel]


def _law(innovation: LawLike) -> InnovationLaw:
    return innovation.law if isinstance(innovation, InnovationModel) else innovation


# ========== QUADRATURE ==========


def _quad(fn: Callable[[float], float], lo: float, hi: float, points: Sequence[float],
          cfg: DensityConfig, at: object) -> float:
    """Adaptive Gauss-Kronrod on [lo, hi]; any integration warning becomes a QuadratureError."""
    if hi <= lo:
        return 0.0
    inner = sorted({float(x) for x in points if lo < x < hi})
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(
                fn, lo, hi, points=inner or None, epsabs=cfg.quad_abs_tol / 10, epsrel=1e-10,
                limit=cfg.quad_limit,
            )
        except integrate.IntegrationWarning as e:
            raise QuadratureError(f"quadrature did not converge at {at}: {e}", at=at) from e
    if not np.isfinite(value):
        raise QuadratureError(f"non-finite integral at {at}", at=at)
    return float(value)


def _sign_changes(g: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, n: int = 512) -> List[float]:
    """Roots (or jump locations) of g on (lo, hi) found by bracketing on a mixed grid."""
    if hi <= lo:
        return []
    grid = np.union1d(np.linspace(lo, hi, n), np.geomspace(max(lo, hi * 1e-9), hi, n))
    grid = grid[(grid > lo) & (grid < hi)]
    vals = g(grid)
    flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    roots = []
    for i in flips:
        roots.append(optimize.brentq(lambda x: float(g(np.asarray(x))), grid[i], grid[i + 1], xtol=1e-14))
    return roots


def _abs_integral(integrand: Callable[[np.ndarray], np.ndarray], signed: Iterable[Callable],
                  law: InnovationLaw, scales: Sequence[float], upper: float,
                  cfg: DensityConfig, at: object) -> float:
    """Integrate a nonnegative piecewise-smooth integrand over (0, upper).

    `signed` are the functions whose sign changes produce kinks; `scales` are the
    length scales of the densities involved (for breakpoints and the singularity knot).
    """
    points = [bp * s for bp in law.breakpoints for s in scales]
    for g in signed:
        points.extend(_sign_changes(g, 0.0, upper))

    def fn(x: float) -> float:
        return float(integrand(np.asarray(x)))

    if not law.singular_at_zero:
        return _quad(fn, 0.0, upper, points, cfg, at)

    # u = v^2 near zero removes the 1/sqrt(u) singularity
    knot = 0.1 * min(scales)
    head = _quad(lambda v: 2.0 * v * fn(v * v), 0.0, np.sqrt(knot),
                 [np.sqrt(x) for x in points if 0 < x < knot], cfg, at)
    return head + _quad(fn, knot, upper, points, cfg, at)


# ========== UNIT MEAN ==========


def law_mass_and_mean(innovation: LawLike) -> Tuple[float, float]:
    """Quadrature of f_Z and of z f_Z over the support (both should be 1)."""
    cfg = get_density_config()
    law = _law(innovation)
    upper = law.upper_quantile(cfg.tail_mass)
    mass = _abs_integral(law.density, [], law, [1.0], upper, cfg, ("mass", law.label))
    mean = _abs_integral(lambda z: z * law.density(z), [], law, [1.0], upper, cfg, ("mean", law.label))
    return mass, mean


def check_unit_mean(innovation: LawLike, seed: int = 0) -> None:
    """
    Require a probability density with E[Z] = 1.

    Quadrature must give mass and mean within normalization_tol of 1, and the mean of
    mean_check_samples inverse-CDF draws must lie within 3 standard errors of 1.

    Raises:
        SpecValidationError: on either failure
    """
    cfg = get_density_config()
    law = _law(innovation)
    mass, mean = law_mass_and_mean(law)
    if abs(mass - 1.0) > cfg.normalization_tol or abs(mean - 1.0) > cfg.normalization_tol:
        raise SpecValidationError(
            "innovation", f"{law.label}: density mass {mass:.12g} and mean {mean:.12g} must both be 1"
        )
    draws = law.ppf(np.random.default_rng(seed).random(cfg.mean_check_samples))
    se = float(np.std(draws, ddof=1)) / np.sqrt(draws.size)
    if abs(float(np.mean(draws)) - 1.0) > 3.0 * se:
        raise SpecValidationError(
            "innovation", f"{law.label}: sample mean {np.mean(draws):.6f} is not within 3 SE ({se:.2g}) of 1"
        )
    logger.debug(f"✓ {law.label}: mass {mass:.12f}, mean {mean:.12f}")


# ========== LIPSCHITZ CERTIFICATION ==========


def default_a_grid(cfg: Optional[DensityConfig] = None) -> np.ndarray:
    cfg = cfg or get_density_config()
    return np.geomspace(cfg.a_min, cfg.a_max, cfg.a_points)


def innovation_tv_lipschitz(innovation: LawLike, a_grid: Optional[Sequence[float]] = None,
                            tau_points: Optional[int] = None) -> LipschitzCertificate:
    """
    Estimate the Lipschitz constants K of the innovation density under scale perturbation.

    Args:
        innovation: Law (or model) whose density is checked
        a_grid: Perturbations a in (0, a_max]; log-spaced default from DensityConfig
        tau_points: Size of the inner tau-subgrid for the supremum clause

    Returns:
        Certificate with per-a ratios, K_iii and K_iv
    """
    cfg = get_density_config()
    law = _law(innovation)
    grid = default_a_grid(cfg) if a_grid is None else np.asarray(a_grid, dtype=float)
    n_tau = tau_points or cfg.tau_points
    if grid.size == 0 or np.any(~(grid > 0)) or np.any(grid > cfg.a_max):
        raise SpecValidationError("a_grid", f"perturbations must lie in (0, {cfg.a_max}]")

    f = law.density
    upper = law.upper_quantile(cfg.tail_mass)
    ratios_iii, ratios_iv, scale_ratios = [], [], []

    for a in grid:
        shift = lambda u, a=a: f(u) - f(u * (1.0 + a))  # noqa: E731
        value = _abs_integral(lambda u: np.abs(shift(u)), [shift], law, [1.0, 1.0 / (1.0 + a)],
                              upper, cfg, a)
        ratios_iii.append(value / a)

        taus = np.geomspace(a * 1e-3, a, n_tau)

        def sup_shift(u, taus=taus):
            u = np.asarray(u, dtype=float)
            diffs = np.abs(f(u)[..., None] - f(u[..., None] * (1.0 + taus)))
            return diffs.max(axis=-1)

        signed = [lambda u, tau=tau: f(u) - f(u * (1.0 + tau)) for tau in taus]
        value_iv = _abs_integral(sup_shift, signed, law, [1.0] + [1.0 / (1.0 + tau) for tau in taus],
                                 upper, cfg, a)
        ratios_iv.append(max(value_iv / a, ratios_iii[-1]))

        rescale = lambda u, a=a: f(u) - (1.0 + a) * f(u * (1.0 + a))  # noqa: E731
        value_tv = _abs_integral(lambda u: np.abs(rescale(u)), [rescale], law, [1.0, 1.0 / (1.0 + a)],
                                 upper, cfg, a)
        scale_ratios.append(value_tv / a)

    cert = LipschitzCertificate(
        law=law.label,
        a_grid=[float(a) for a in grid],
        tau_points=n_tau,
        ratios_iii=ratios_iii,
        ratios_iv=ratios_iv,
        scale_tv_ratios=scale_ratios,
        k_iii=max(ratios_iii),
        k_iv=max(ratios_iv),
    )
    logger.info(f"✓ Certified {law.label}: K_iii={cert.k_iii:.6g}, K_iv={cert.k_iv:.6g} on {grid.size} points")
    return cert


# ========== SCALE MIXTURES ==========


def _scaled_density(law: InnovationLaw, scale: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda y: law.density(np.asarray(y) / scale) / scale


def _check_scales(A: float, Bs: Sequence[float]) -> None:
    if not A > 0:
        raise SpecValidationError("A", "must be positive")
    if any(not B >= 0 for B in Bs):
        raise SpecValidationError("B", "must be nonnegative")


def _mixture_tv(law: InnovationLaw, A: float, B: float, cfg: DensityConfig) -> float:
    if B == 0:
        return 0.0
    wide = _scaled_density(law, A + B)
    narrow = _scaled_density(law, A)
    diff = lambda y: wide(y) - narrow(y)  # noqa: E731
    upper = (A + B) * law.upper_quantile(cfg.tail_mass)
    return _abs_integral(lambda y: np.abs(diff(y)), [diff], law, [A, A + B], upper, cfg, (A, B))


def scale_mixture_tv(innovation: InnovationModel, A: float, B: float) -> Tuple[float, float]:
    """
    TV integral between the (A+B)- and A-rescaled innovation densities and its bound.

    Returns:
        (tv, bound) with bound = K_iii * B/A + B/(A+B)
    """
    _check_scales(A, [B])
    cfg = get_density_config()
    tv = _mixture_tv(innovation.law, A, B, cfg)
    bound = innovation.lipschitz_iii * B / A + B / (A + B)
    if tv > bound + cfg.dominance_slack:
        raise InternalConsistencyError(f"TV {tv:.12g} exceeds bound {bound:.12g} at A={A}, B={B}")
    return tv, bound


def scale_mixture_sup_tv(innovation: InnovationModel, A: float, Bs: Sequence[float]) -> Tuple[float, float]:
    """Supremum form: int sup_j |Delta_j(y)| dy against K_iv max(B_j/A) + max B_j/(A+B_j)."""
    _check_scales(A, Bs)
    if not Bs:
        raise SpecValidationError("B", "need at least one perturbation")
    cfg = get_density_config()
    law = innovation.law
    bound = innovation.lipschitz_iv * max(Bs) / A + max(B / (A + B) for B in Bs)
    active = [B for B in Bs if B > 0]
    if not active:
        return 0.0, bound

    narrow = _scaled_density(law, A)
    diffs = [lambda y, B=B: _scaled_density(law, A + B)(y) - narrow(y) for B in active]

    def sup_abs(y):
        return np.max(np.abs(np.stack([g(y) for g in diffs])), axis=0)

    upper = (A + max(active)) * law.upper_quantile(cfg.tail_mass)
    tv = _abs_integral(sup_abs, diffs, law, [A] + [A + B for B in active], upper, cfg, (A, tuple(Bs)))
    return tv, bound


def conditional_density(innovation: LawLike, p_term: float, q_term: float, y):
    """
    Density of X = Z (P + Q) given P and Q.

    Args:
        innovation: Innovation law or model
        p_term: Innovation-driven scale part, > 0
        q_term: Past-block scale part, >= 0
        y: Evaluation point(s), >= 0

    Returns:
        (1/(P+Q)) f_Z(y/(P+Q)), scalar or array like y
    """
    if not p_term > 0:
        raise SpecValidationError("p_term", "must be positive")
    if not q_term >= 0:
        raise SpecValidationError("q_term", "must be nonnegative")
    scale = p_term + q_term
    value = _law(innovation).density(np.asarray(y, dtype=float) / scale) / scale
    return float(value) if np.ndim(value) == 0 else value


def density_normalization(innovation: LawLike, p_term: float, q_term: float) -> float:
    """Quadrature of the conditional density over y >= 0 (should be 1)."""
    cfg = get_density_config()
    law = _law(innovation)
    scale = p_term + q_term
    density = lambda y: np.asarray(conditional_density(law, p_term, q_term, y))  # noqa: E731
    upper = scale * law.upper_quantile(cfg.tail_mass)
    return _abs_integral(density, [], law, [scale], upper, cfg, (p_term, q_term))


# ========== VERIFICATION SUITE ==========


def verify_scale_mixture(innovation: InnovationModel,
                         A_grid: Sequence[float] = (0.5, 1.0, 2.0),
                         B_grid: Sequence[float] = (0.0, 0.1, 1.0, 10.0)) -> TvReport:
    """Evaluate the scale-mixture TV inequality over an (A, B) grid."""
    cfg = get_density_config()
    pairs, tvs, bounds = [], [], []
    for A in A_grid:
        for B in B_grid:
            _check_scales(A, [B])
            tv = _mixture_tv(innovation.law, A, B, cfg)
            bound = innovation.lipschitz_iii * B / A + B / (A + B)
            if tv > bound + cfg.dominance_slack:
                logger.error(f"Scale-mixture dominance failed for {innovation.label} at A={A}, B={B}")
            pairs.append((float(A), float(B)))
            tvs.append(tv)
            bounds.append(bound)
    ratios = [tv / bound for tv, bound in zip(tvs, bounds) if bound > 0]
    return TvReport(
        law=innovation.label,
        pairs=pairs,
        tv_values=tvs,
        bound_values=bounds,
        ratio_max=max(ratios, default=0.0),
    )
