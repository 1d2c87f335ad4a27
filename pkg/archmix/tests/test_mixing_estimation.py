"""
Tests for cell tables, mixing estimators, covariances and decay fits.
"""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bounds import tvarch_alpha_bound
from errors import EnumerationLimitError, SpecValidationError
from mixing_estimation import (
    alpha_hat,
    beta_hat,
    build_table,
    covariance_curve,
    decay_fit,
    estimate_curve,
    marginalize_table,
    two_mix_hat,
)
from process_models import load_spec, simulate_archinf, simulate_tvarch
from schemas import JointCellTable, PathEnsemble


def _table(counts, r_left=0, r_right=0, m=2):
    counts = np.asarray(counts, dtype=np.int64)
    return JointCellTable(
        k=1,
        t=None,
        r_left=r_left,
        r_right=r_right,
        m=m,
        edges=[np.array([0.5])] * (r_left + r_right + 2),
        counts=counts,
        batch_counts=counts[None, :, :],
    )


def _ensemble(paths):
    return PathEnsemble(
        spec_id="test", kind="tvarch", master_seed=0, replicate_count=len(paths), paths=paths, burn_in=0
    )


# ========== ESTIMATORS ON FIXED TABLES ==========


def test_alpha_beta_two_by_two():
    """p = [[0.3, 0.2], [0.1, 0.4]]: alpha = 0.1, beta = 0.4."""
    table = _table([[30, 20], [10, 40]])
    assert alpha_hat(table) == 0.1
    assert beta_hat(table) == 0.4


def test_product_table_is_independent():
    """A product table has zero dependence exactly."""
    table = _table([[4, 6], [2, 3]])
    assert alpha_hat(table) == 0.0
    assert beta_hat(table) == 0.0


@pytest.mark.property
@given(cells=st.lists(st.integers(min_value=0, max_value=60), min_size=8, max_size=8))
@settings(max_examples=200, deadline=None)
def test_estimator_ordering(cells):
    """0 <= twomix <= alpha <= beta on every table."""
    assume(sum(cells) > 0)
    table = _table(np.reshape(cells, (4, 2)), r_left=1)
    twomix = alpha_hat(marginalize_table(table))
    alpha = alpha_hat(table)
    assert 0.0 <= twomix <= alpha <= beta_hat(table)


def test_marginalize_table_sums_extra_coordinates():
    """The first-coordinate table adds up the finer cells."""
    table = _table(np.arange(8).reshape(4, 2), r_left=1)
    small = marginalize_table(table)
    np.testing.assert_array_equal(small.counts, [[0 + 2, 1 + 3], [4 + 6, 5 + 7]])
    assert small.sample_count == table.sample_count


# ========== CELL TABLES ==========


def test_equal_columns_fill_the_diagonal():
    """X_t = X_{t+k} puts every sample on the diagonal."""
    ensemble = _ensemble([np.tile([1.0, 2.0, 3.0, 4.0], 100)])
    table = build_table(ensemble, None, 4, 0, 0, 2)
    assert table.counts[0, 1] == 0 and table.counts[1, 0] == 0
    assert table.counts[0, 0] == table.counts[1, 1] == 198
    assert alpha_hat(table) == 0.25
    assert beta_hat(table) == 1.0


def test_grid_refinement_never_decreases(arch1_ensemble):
    """Quartile cells refine median cells, so estimates can only grow."""
    for k in (1, 3):
        coarse = build_table(arch1_ensemble, None, k, 0, 0, 2)
        fine = build_table(arch1_ensemble, None, k, 0, 0, 4)
        assert alpha_hat(fine) >= alpha_hat(coarse)
        assert beta_hat(fine) >= beta_hat(coarse)


def test_table_too_fine(arch1_ensemble):
    """8^5 left cells exceed the enumeration limit."""
    with pytest.raises(EnumerationLimitError):
        build_table(arch1_ensemble, None, 1, 4, 0, 8)


def test_cross_sectional_table(arch1_ensemble):
    """With t fixed there is one sample per replicate."""
    table = build_table(arch1_ensemble, 10, 2, 0, 0, 2)
    assert table.sample_count == 8
    assert table.t == 10
    with pytest.raises(SpecValidationError):
        build_table(arch1_ensemble, 4999, 2, 0, 0, 2)


def test_table_validation(arch1_ensemble):
    """k >= 1 and m >= 2."""
    with pytest.raises(SpecValidationError):
        build_table(arch1_ensemble, None, 0, 0, 0, 4)
    with pytest.raises(SpecValidationError):
        build_table(arch1_ensemble, None, 1, 0, 0, 1)


def test_batches_add_up(arch1_ensemble):
    """Batch tables partition the pooled samples."""
    table = build_table(arch1_ensemble, None, 2, 1, 0, 4, n_batches=5)
    assert table.batch_count == 5
    assert sum(table.batch_table(b).sample_count for b in range(5)) == table.sample_count


# ========== CURVES ==========


def test_estimate_curve_ordering(arch1_ensemble):
    """Per lag: 0 <= twomix <= alpha <= beta, exact on small grids."""
    curve = estimate_curve(arch1_ensemble, range(1, 6), m=4, r_left=1, r_right=0)
    assert curve.lags == [1, 2, 3, 4, 5]
    for twomix, alpha, beta in zip(curve.twomix_hat, curve.alpha_hat, curve.beta_hat):
        assert 0.0 <= twomix <= alpha <= beta
    assert all(curve.exact)
    assert curve.n[0] == 8 * (5000 - 1 - 1)
    assert all(se >= 0.0 for se in curve.se_alpha + curve.se_beta + curve.se_twomix)


def test_two_mix_hat_is_first_coordinate_alpha(arch1_ensemble):
    """two_mix_hat is alpha_hat of the single-coordinate table."""
    value = two_mix_hat(arch1_ensemble, None, 2, 4)
    assert value == alpha_hat(build_table(arch1_ensemble, None, 2, 0, 0, 4))
    assert value > 0.0


def test_threshold_ascent_path(arch1_ensemble, monkeypatch):
    """Past the exhaustive limit the heuristic keeps the ordering and never beats the exact value."""
    table = build_table(arch1_ensemble, None, 1, 1, 0, 4)
    exact = alpha_hat(table)

    monkeypatch.setenv("ARCHMIX_EXHAUSTIVE_SIDE_LIMIT", "1")
    heuristic = alpha_hat(table)
    assert 0.0 < heuristic <= exact

    curve = estimate_curve(arch1_ensemble, [1, 2], m=4, r_left=1, r_right=0)
    assert curve.exact == [False, False]
    for twomix, alpha, beta in zip(curve.twomix_hat, curve.alpha_hat, curve.beta_hat):
        assert twomix <= alpha <= beta



def test_shuffled_paths_look_independent(arch1_ensemble, rng):
    """Shuffling each path removes the dependence: every estimate stays within 4 batch SE of zero."""
    shuffled = _ensemble([rng.permutation(path) for path in arch1_ensemble.paths])
    curve = estimate_curve(shuffled, [1, 3], m=2, r_left=0, r_right=0)
    for k in range(2):
        assert curve.alpha_hat[k] <= 4.0 * curve.se_alpha[k]
        assert curve.beta_hat[k] <= 4.0 * curve.se_beta[k]
        assert curve.twomix_hat[k] <= 4.0 * curve.se_twomix[k]

    original = estimate_curve(arch1_ensemble, [1], m=2, r_left=0, r_right=0)
    assert original.alpha_hat[0] > 4.0 * original.se_alpha[0]


# ========== COVARIANCE AND DECAY ==========


def test_covariance_of_independent_draws(rng):
    """Independent draws: variance at lag 0, nothing at positive lags."""
    ensemble = _ensemble([rng.exponential(size=10_000) for _ in range(4)])
    curve = covariance_curve(ensemble, [0, 1, 5])
    assert curve.t_averaged
    assert curve.cov[0] == pytest.approx(1.0, abs=0.06)
    assert abs(curve.cov[1]) < 0.05
    assert abs(curve.cov[2]) < 0.05
    assert all(se > 0 for se in curve.se)


def test_covariance_lag_out_of_range(rng):
    """Lags beyond the path length are rejected."""
    ensemble = _ensemble([rng.exponential(size=50)])
    with pytest.raises(SpecValidationError):
        covariance_curve(ensemble, [50])


def test_decay_fit_geometric():
    """3 * 0.7^k is geometric with ratio 0.7."""
    k = np.arange(1, 21)
    fit = decay_fit(k, 3.0 * 0.7**k)
    assert fit.kind == "geometric"
    assert fit.param == pytest.approx(0.7, rel=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_decay_fit_polynomial():
    """k^-2 is polynomial with exponent -2."""
    k = np.arange(1, 41)
    fit = decay_fit(k, k**-2.0)
    assert fit.kind == "polynomial"
    assert fit.param == pytest.approx(-2.0, rel=1e-9)
    assert fit.alternative_r_squared < fit.r_squared


def test_decay_fit_window_and_validation():
    """Windows restrict the lags; too few or nonpositive values are rejected."""
    k = np.arange(1, 21)
    fit = decay_fit(k, 0.5**k, k_window=(5, 15))
    assert fit.param == pytest.approx(0.5, rel=1e-9)
    with pytest.raises(SpecValidationError):
        decay_fit(k, 0.5**k, k_window=(1, 2))
    with pytest.raises(SpecValidationError):
        decay_fit([1, 2, 3], [0.1, 0.0, 0.01])


# ========== FULL-SIZE RUNS ==========


@pytest.mark.slow
def test_arch1_estimates_decay_below_bound(arch1_tvarch, exponential):
    """N = 10^6: estimates decay and stay below the explicit bound within 3 SE."""
    ensemble = simulate_tvarch(arch1_tvarch, exponential, (0, 62_511), replicates=16, master_seed=2024)
    curve = estimate_curve(ensemble, range(1, 11), m=8, r_left=1, r_right=0)
    assert curve.n[0] >= 1_000_000

    for k, alpha, se in zip(curve.lags, curve.alpha_hat, curve.se_alpha):
        bound = tvarch_alpha_bound(arch1_tvarch, exponential, t=0, k=k).explicit
        assert alpha - 3 * se <= bound

    for values, ses in ((curve.alpha_hat, curve.se_alpha), (curve.beta_hat, curve.se_beta),
                        (curve.twomix_hat, curve.se_twomix)):
        assert values[-1] < values[0] - 3 * np.hypot(ses[0], ses[-1])


@pytest.mark.slow
def test_arch1_covariance_decays(arch1_tvarch, exponential):
    """Autocovariance at lag 1 dominates lag 10 by more than 3 SE."""
    ensemble = simulate_tvarch(arch1_tvarch, exponential, (0, 62_499), replicates=16, master_seed=99)
    curve = covariance_curve(ensemble, [1, 10])
    assert curve.cov[0] > curve.cov[1] + 3 * np.hypot(curve.se[0], curve.se[1])


@pytest.mark.slow
def test_polynomial_archinf_covariance_decays(fixtures_dir):
    """a_j ~ j^-2 with uniform innovations: the log-log covariance slope over lags 2..30 lies in [-3, -1]."""
    spec, innovation = load_spec(fixtures_dir / "polynomial_archinf.json")
    ensemble = simulate_archinf(spec, innovation, 62_500, replicates=256, master_seed=5, tail_tol=1e-2)
    lags = [2, 3, 4, 6, 8, 11, 16, 22, 30]
    curve = covariance_curve(ensemble, lags)
    assert all(c > 0 for c in curve.cov)
    assert curve.cov[0] > curve.cov[-1] + 3 * np.hypot(curve.se[0], curve.se[-1])

    slope = np.polyfit(np.log(lags), np.log(curve.cov), 1)[0]
    assert -3.0 <= slope <= -1.0
    fit = decay_fit(lags, curve.cov, k_window=(2, 30))
    assert fit.r_squared > 0.9
    if fit.kind == "polynomial":
        assert fit.slope == pytest.approx(slope, rel=1e-9)
