"""
Empirical mixing estimation on simulated paths.

Provides:
- Joint cell tables of a left and a right window over marginal-quantile grids
- Exact suprema of alpha-, beta- and 2-mixing over the induced finite event algebras
- Per-lag estimate curves with batch-means standard errors
- Autocovariance curves and decay-class fits
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from config import get_estimation_config
from errors import EnumerationLimitError, InternalConsistencyError, SpecValidationError
from schemas import CovarianceCurve, DecayFit, EstimateCurve, JointCellTable, PathEnsemble

logger = logging.getLogger(__name__)

_SUBSET_CHUNK = 256


# ========== CELL TABLES ==========


def _window_samples(ensemble: PathEnsemble, t: Optional[int], k: int, r_left: int,
                    r_right: int) -> Tuple[np.ndarray, np.ndarray]:
    """Left (n, r_left+1) and right (n, r_right+1) samples, replicate-major."""
    lefts, rights = [], []
    for path in ensemble.paths:
        n = path.size
        if t is None:
            anchors = np.arange(r_left, n - k - r_right)
        else:
            anchor = t - ensemble.t_start
            if anchor - r_left < 0 or anchor + k + r_right > n - 1:
                raise SpecValidationError("t", f"windows around t={t} leave the simulated range")
            anchors = np.array([anchor])
        lefts.append(np.stack([path[anchors - i] for i in range(r_left + 1)], axis=1))
        rights.append(np.stack([path[anchors + k + i] for i in range(r_right + 1)], axis=1))
    left, right = np.concatenate(lefts), np.concatenate(rights)
    if left.shape[0] == 0:
        raise SpecValidationError("k", f"paths of length {ensemble.length} admit no lag-{k} windows")
    return left, right


def _quantile_bins(columns: np.ndarray, m: int) -> Tuple[List[np.ndarray], np.ndarray]:
    """Per-column interior quantile edges and the bin index of every entry."""
    probs = np.linspace(0.0, 1.0, m + 1)[1:-1]
    edges, bins = [], np.empty(columns.shape, dtype=np.int64)
    for c in range(columns.shape[1]):
        cut = np.quantile(columns[:, c], probs)
        edges.append(cut)
        bins[:, c] = np.searchsorted(cut, columns[:, c], side="right")
    return edges, bins


def build_table(ensemble: PathEnsemble, t: Optional[int], k: int, r_left: int, r_right: int, m: int,
                n_batches: Optional[int] = None) -> JointCellTable:
    """
    Count joint cells of (X_t, ..., X_{t-r_left}) and (X_{t+k}, ..., X_{t+k+r_right}).

    Args:
        ensemble: Simulated paths
        t: Cross-sectional time (one sample per replicate), or None to pool every admissible t
        k: Lag, >= 1
        r_left: Extra left coordinates
        r_right: Extra right coordinates
        m: Bins per coordinate, at marginal quantiles
        n_batches: Contiguous sample batches for standard errors

    Returns:
        JointCellTable with lexicographic cell indices (first coordinate most significant)
    """
    cfg = get_estimation_config()
    if k < 1:
        raise SpecValidationError("k", "must be at least 1")
    if m < 2:
        raise SpecValidationError("m", "need at least two bins per coordinate")
    if r_left < 0 or r_right < 0:
        raise SpecValidationError("r_left", "windows must be nonnegative")
    n_left, n_right = m ** (r_left + 1), m ** (r_right + 1)
    if max(n_left, n_right) > cfg.max_cells:
        raise EnumerationLimitError(
            f"{n_left} x {n_right} cells exceed the per-side limit {cfg.max_cells}; reduce the grid or windows"
        )
    if n_left * n_right > cfg.max_joint_cells:
        raise EnumerationLimitError(f"{n_left * n_right} joint cells exceed {cfg.max_joint_cells}")
    n_batches = n_batches or cfg.n_batches

    left, right = _window_samples(ensemble, t, k, r_left, r_right)
    left_edges, left_bins = _quantile_bins(left, m)
    right_edges, right_bins = _quantile_bins(right, m)
    left_cell = np.ravel_multi_index(tuple(left_bins.T), (m,) * (r_left + 1))
    right_cell = np.ravel_multi_index(tuple(right_bins.T), (m,) * (r_right + 1))
    joint = left_cell * n_right + right_cell

    batch_counts = np.stack([
        np.bincount(chunk, minlength=n_left * n_right).reshape(n_left, n_right)
        for chunk in np.array_split(joint, n_batches)
    ])
    return JointCellTable(
        k=k,
        t=t,
        r_left=r_left,
        r_right=r_right,
        m=m,
        edges=left_edges + right_edges,
        counts=batch_counts.sum(axis=0),
        batch_counts=batch_counts,
    )


def marginalize_table(table: JointCellTable) -> JointCellTable:
    """Table of the first left and first right coordinate, summed from the full table."""
    m = table.m
    shape = (-1, m, m ** table.r_left, m, m ** table.r_right)
    batch_counts = table.batch_counts.reshape(shape).sum(axis=(2, 4))
    return JointCellTable(
        k=table.k,
        t=table.t,
        r_left=0,
        r_right=0,
        m=m,
        edges=[table.edges[0], table.edges[table.r_left + 1]],
        counts=batch_counts.sum(axis=0),
        batch_counts=batch_counts,
    )


# ========== ESTIMATORS ==========


def _scaled_dependence(table: JointCellTable) -> Tuple[np.ndarray, float]:
    """N p(i,j) - p(i) q(j) N, in exact integer arithmetic, and the N^2 divisor."""
    counts = table.counts.astype(np.int64)
    n = int(counts.sum())
    numerator = n * counts - np.outer(counts.sum(axis=1), counts.sum(axis=0))
    return numerator.astype(float), float(n) * float(n)


def _oriented(D: np.ndarray) -> Tuple[np.ndarray, bool]:
    """D with the smaller side as columns, and whether it was transposed."""
    return (D, False) if D.shape[1] <= D.shape[0] else (D.T, True)


def is_exhaustive(table: JointCellTable) -> bool:
    """True when alpha_hat enumerates every union of cells on the smaller side."""
    return min(table.counts.shape) <= get_estimation_config().exhaustive_side_limit


def _enumerate(D: np.ndarray) -> Tuple[float, np.ndarray]:
    n = D.shape[1]
    best, best_mask = 0.0, np.zeros(n, dtype=bool)
    bits = np.arange(n)
    for start in range(0, 1 << n, _SUBSET_CHUNK):
        codes = np.arange(start, min(start + _SUBSET_CHUNK, 1 << n))
        masks = ((codes[:, None] >> bits[None, :]) & 1).astype(float)
        sums = D @ masks.T
        values = np.maximum(sums, 0.0).sum(axis=0)
        i = int(np.argmax(values))
        if values[i] > best:
            best, best_mask = float(values[i]), masks[i].astype(bool)
    return best, best_mask


def _threshold_ascent(D: np.ndarray, starts: Sequence[np.ndarray]) -> Tuple[float, np.ndarray]:
    cfg = get_estimation_config()
    rng = np.random.default_rng(cfg.heuristic_seed)
    candidates = list(starts) + [rng.random(D.shape[1]) < 0.5 for _ in range(cfg.heuristic_restarts)]
    best, best_mask = 0.0, np.zeros(D.shape[1], dtype=bool)
    for mask in candidates:
        cols = np.asarray(mask, dtype=bool)
        value = -1.0
        for _ in range(1000):
            rows = D[:, cols].sum(axis=1) > 0
            new_cols = D[rows].sum(axis=0) > 0
            new_value = float(D[np.ix_(rows, new_cols)].sum())
            if new_value <= value:
                break
            cols, value = new_cols, new_value
        if value > best:
            best, best_mask = value, cols
    return best, best_mask


def _alpha_search(table: JointCellTable, starts: Sequence[np.ndarray] = ()) -> Tuple[float, np.ndarray, bool]:
    """Alpha supremum, the optimal smaller-side union and whether the search was exact."""
    numerator, scale = _scaled_dependence(table)
    D, _ = _oriented(numerator)
    if is_exhaustive(table):
        value, mask = _enumerate(D)
        return value / scale, mask, True
    value, mask = _threshold_ascent(D, starts)
    return value / scale, mask, False


def alpha_hat(table: JointCellTable, starts: Sequence[np.ndarray] = ()) -> float:
    """
    sup |P(G n H) - P(G) P(H)| over unions G of left cells and H of right cells.

    For a fixed union on the smaller side the best union on the other side keeps the
    cells with positive dependence sum, so enumerating the smaller side is exact.
    Beyond the exhaustive limit alternating threshold ascent is used (see is_exhaustive);
    `starts` seeds it with extra smaller-side unions.
    """
    return _alpha_search(table, starts)[0]


def beta_hat(table: JointCellTable) -> float:
    """sum_{i,j} |p(i,j) - p(i) q(j)| over the finest cell partition."""
    numerator, scale = _scaled_dependence(table)
    return float(np.abs(numerator).sum()) / scale


def two_mix_hat(ensemble: PathEnsemble, t: Optional[int], k: int, m: int) -> float:
    """alpha_hat of the single-coordinate (X_t, X_{t+k}) table."""
    return alpha_hat(build_table(ensemble, t, k, 0, 0, m))


def _batch_se(table: JointCellTable, estimator) -> float:
    values = [estimator(table.batch_table(b)) for b in range(table.batch_count)
              if table.batch_counts[b].sum() > 0]
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))


def _lifted_start(table: JointCellTable, small: JointCellTable, right_mask: np.ndarray) -> np.ndarray:
    """Lift the optimal 2-mixing events to a union on the smaller side of the full table."""
    m = table.m
    if table.counts.shape[1] <= table.counts.shape[0]:
        first = np.arange(m ** (table.r_right + 1)) // m ** table.r_right
        return right_mask[first]
    numerator, _ = _scaled_dependence(small)
    left_mask = numerator[:, right_mask].sum(axis=1) > 0
    first = np.arange(m ** (table.r_left + 1)) // m ** table.r_left
    return left_mask[first]


def estimate_curve(ensemble: PathEnsemble, lags: Sequence[int], m: int, r_left: int, r_right: int,
                   t: Optional[int] = None, n_batches: Optional[int] = None) -> EstimateCurve:
    """
    alpha, beta and 2-mixing estimates per lag from one table each.

    The 2-mixing table is the marginal of the full table on the first coordinates, so
    0 <= twomix_hat <= alpha_hat <= beta_hat holds exactly; a violation raises
    InternalConsistencyError.
    """
    fields = {name: [] for name in ("alpha", "beta", "twomix", "se_alpha", "se_beta", "se_twomix", "n", "exact")}
    for k in lags:
        table = build_table(ensemble, t, k, r_left, r_right, m, n_batches)
        small = marginalize_table(table)
        twomix, twomix_mask, _ = _alpha_search(small)
        alpha, _, exact = _alpha_search(table, [_lifted_start(table, small, twomix_mask)])
        beta = beta_hat(table)

        if not (0.0 <= twomix <= alpha <= beta):
            raise InternalConsistencyError(
                f"estimator ordering violated at k={k}: twomix={twomix:.17g}, alpha={alpha:.17g}, beta={beta:.17g}"
            )
        fields["alpha"].append(alpha)
        fields["beta"].append(beta)
        fields["twomix"].append(twomix)
        fields["se_alpha"].append(_batch_se(table, alpha_hat))
        fields["se_beta"].append(_batch_se(table, beta_hat))
        fields["se_twomix"].append(_batch_se(small, alpha_hat))
        fields["n"].append(table.sample_count)
        fields["exact"].append(exact)
        logger.debug(f"k={k}: alpha={alpha:.4g} beta={beta:.4g} twomix={twomix:.4g} (n={table.sample_count})")

    logger.info(f"Estimated mixing on {len(fields['n'])} lags (m={m}, r_left={r_left}, r_right={r_right})")
    return EstimateCurve(
        lags=[int(k) for k in lags],
        alpha_hat=fields["alpha"],
        beta_hat=fields["beta"],
        twomix_hat=fields["twomix"],
        se_alpha=fields["se_alpha"],
        se_beta=fields["se_beta"],
        se_twomix=fields["se_twomix"],
        m=m,
        r_left=r_left,
        r_right=r_right,
        n=fields["n"],
        exact=fields["exact"],
    )


# ========== COVARIANCE AND DECAY ==========


def _pair_cov(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(x * y) - np.mean(x) * np.mean(y))


def covariance_curve(ensemble: PathEnsemble, k_range: Sequence[int],
                     n_batches: Optional[int] = None) -> CovarianceCurve:
    """cov(X_t, X_{t+k}) pooled over t and replicates, with batch-means standard errors."""
    n_batches = n_batches or get_estimation_config().n_batches
    covs, ses = [], []
    for k in k_range:
        if k < 0 or k >= ensemble.length:
            raise SpecValidationError("k", f"lag {k} outside [0, {ensemble.length})")
        x = np.concatenate([path[: path.size - k] for path in ensemble.paths])
        y = np.concatenate([path[k:] for path in ensemble.paths])
        covs.append(_pair_cov(x, y))
        batches = [_pair_cov(bx, by) for bx, by in zip(np.array_split(x, n_batches), np.array_split(y, n_batches))
                   if bx.size > 1]
        ses.append(float(np.std(batches, ddof=1) / np.sqrt(len(batches))) if len(batches) > 1 else 0.0)
    return CovarianceCurve(lags=[int(k) for k in k_range], cov=covs, se=ses, t_averaged=True)


def decay_fit(lags: Sequence[int], values: Sequence[float],
              k_window: Optional[Tuple[int, int]] = None) -> DecayFit:
    """
    Classify a positive curve as geometric (log v linear in k) or polynomial (log v linear
    in log k) by least squares; the larger R^2 wins.
    """
    k = np.asarray(lags, dtype=float)
    v = np.asarray(values, dtype=float)
    if k_window is not None:
        keep = (k >= k_window[0]) & (k <= k_window[1])
        k, v = k[keep], v[keep]
    if k.size < 3:
        raise SpecValidationError("k_window", "need at least three lags to fit")
    if np.any(~(v > 0)) or np.any(k <= 0):
        raise SpecValidationError("values", "decay fits need positive values at positive lags")
    geometric = stats.linregress(k, np.log(v))
    polynomial = stats.linregress(np.log(k), np.log(v))
    r2_geo, r2_poly = geometric.rvalue**2, polynomial.rvalue**2
    if r2_geo >= r2_poly:
        return DecayFit(kind="geometric", param=float(np.exp(geometric.slope)), slope=float(geometric.slope),
                        intercept=float(geometric.intercept), r_squared=float(r2_geo),
                        alternative_r_squared=float(r2_poly))
    return DecayFit(kind="polynomial", param=float(polynomial.slope), slope=float(polynomial.slope),
                    intercept=float(polynomial.intercept), r_squared=float(r2_poly),
                    alternative_r_squared=float(r2_geo))
