"""
Tests for process specs, assumption reports and simulation.
"""

import json
import math

import numpy as np
import pytest

from errors import (
    AssumptionViolatedError,
    SimulationDivergedError,
    SpecValidationError,
    TruncationError,
)
from process_models import (
    build_innovation,
    check_assumptions,
    choose_truncation_lag,
    companion_matrices,
    load_spec,
    moment_bound,
    parse_innovation,
    propagate_tvarch,
    replicate_seed,
    simulate_archinf,
    simulate_tvarch,
    spec_from_dict,
    splitmix64,
    stationary_mean_bound,
)
from schemas import ArchInfSpec, CoefficientRule, CoefficientSchedule, TvArchSpec


# ========== SEEDING ==========


def test_replicate_seeds_are_deterministic_and_distinct():
    """Same (seed, replicate) gives the same stream seed; replicates differ."""
    seeds = [replicate_seed(42, r) for r in range(16)]
    assert seeds == [replicate_seed(42, r) for r in range(16)]
    assert len(set(seeds)) == 16
    assert replicate_seed(42, 3) == splitmix64(42 ^ 3)


def test_replicate_seed_rejects_out_of_range_master():
    """Master seeds must fit in 64 bits."""
    with pytest.raises(SpecValidationError):
        replicate_seed(-1, 0)
    with pytest.raises(SpecValidationError):
        replicate_seed(1 << 64, 0)


# ========== SPEC FILES ==========


def test_load_shipped_fixtures(fixtures_dir):
    """Every shipped spec parses into its process family."""
    spec, innovation = load_spec(fixtures_dir / "arch1_archinf.json")
    assert isinstance(spec, ArchInfSpec)
    assert spec.coeffs == [0.5]
    assert innovation.label == "exponential"

    spec, _ = load_spec(fixtures_dir / "tvarch2_regimes.json")
    assert isinstance(spec, TvArchSpec)
    assert spec.p == 2
    assert spec.schedule.breakpoints == [0, 5000]

    spec, innovation = load_spec(fixtures_dir / "polynomial_archinf.json")
    assert spec.rule is not None and spec.rule.kind == "polynomial"
    assert innovation.label == "uniform"


def test_load_spec_malformed_json(tmp_path):
    """Broken JSON surfaces as a JSONDecodeError with its position."""
    path = tmp_path / "broken.json"
    path.write_text('{"kind": "archinf",\n  "a0": }')
    with pytest.raises(json.JSONDecodeError) as exc_info:
        load_spec(path)
    assert exc_info.value.lineno == 2


def test_spec_from_dict_tvarch_shorthand():
    """A tvARCH spec may give a0/coeffs instead of a schedule."""
    spec, _ = spec_from_dict({"kind": "tvarch", "a0": 0.1, "coeffs": [0.3, 0.2], "delta": 0.45})
    assert spec.p == 2
    np.testing.assert_array_equal(spec.coeffs_at(123), [0.3, 0.2])


def test_spec_from_dict_unknown_kind():
    """Only tvarch and archinf are accepted."""
    with pytest.raises(SpecValidationError) as exc_info:
        spec_from_dict({"kind": "garch", "a0": 1.0, "delta": 0.1})
    assert exc_info.value.field == "kind"


def test_parse_innovation_unknown_law():
    """Unknown innovation names are a validation error."""
    with pytest.raises(SpecValidationError):
        parse_innovation("cauchy")


@pytest.mark.parametrize("value", [{"name": "cauchy"}, {"name": "chi2"}, {"name": "chi2", "dof": "three"}, {}])
def test_parse_innovation_bad_mapping(value):
    """Mapping innovations fail with a validation error, never a bare ValueError."""
    with pytest.raises(SpecValidationError) as exc_info:
        parse_innovation(value)
    assert exc_info.value.field == "innovation"


def test_parse_innovation_mapping():
    """{"name": "chi2", "dof": 3} is the scaled chi-square with three degrees of freedom."""
    assert parse_innovation({"name": "chi2", "dof": 3}).label == "chi2(3)"


@pytest.mark.parametrize("value", ["exponential", "uniform", "chi2:3"])
def test_build_innovation_has_unit_mean(value):
    """Every supported law passes the unit-mean check and keeps E[Z] = 1."""
    name, _, dof = value.partition(":")
    innovation = build_innovation(name, int(dof) if dof else None)
    assert innovation.moment(1.0) == pytest.approx(1.0, abs=1e-12)
    assert innovation.second_moment > 1.0


def test_build_innovation_refuses_non_unit_mean(monkeypatch):
    """A law failing the unit-mean check is never certified."""
    def refuse(law):
        raise SpecValidationError("innovation", f"{law.label}: mean is not 1")

    monkeypatch.setattr("process_models.check_unit_mean", refuse)
    build_innovation.cache_clear()
    try:
        with pytest.raises(SpecValidationError):
            build_innovation("uniform")
    finally:
        build_innovation.cache_clear()


def test_schedule_validation():
    """Nonpositive intercepts and misordered breakpoints are rejected."""
    with pytest.raises(ValueError):
        CoefficientSchedule(breakpoints=[0], intercepts=[0.0], coeffs=[[0.5]])
    with pytest.raises(ValueError):
        CoefficientSchedule(breakpoints=[5, 5], intercepts=[0.1, 0.1], coeffs=[[0.5], [0.5]])
    with pytest.raises(ValueError):
        CoefficientSchedule(breakpoints=[0], intercepts=[0.1], coeffs=[[-0.1]])


# ========== ASSUMPTIONS ==========


def test_check_assumptions_tvarch_passes(arch1_tvarch, unit_exponential):
    """ARCH(1) with a1 = 0.5 and delta = 0.5 satisfies every clause."""
    report = check_assumptions(arch1_tvarch, unit_exponential)
    assert report.passed
    assert {c.clause for c in report.clauses} == {
        "tv_contraction", "tv_intercept", "tv_lipschitz", "tv_lipschitz_sup"
    }


def test_check_assumptions_tvarch_contraction_witness(unit_exponential):
    """The failing contraction clause names the time of the largest coefficient sum."""
    schedule = CoefficientSchedule(breakpoints=[0, 10], intercepts=[0.1, 0.1], coeffs=[[0.3], [0.6]])
    spec = TvArchSpec(p=1, schedule=schedule, delta=0.5)
    report = check_assumptions(spec, unit_exponential, (0, 20))
    failures = report.failures()
    assert [c.clause for c in failures] == ["tv_contraction"]
    assert failures[0].witness == "t=10"
    assert failures[0].value == pytest.approx(0.6)


def test_rule_schedule_needs_t_range(unit_exponential):
    """A closed-form schedule is checked on an explicit interval only."""
    spec = TvArchSpec(
        p=1,
        schedule=CoefficientSchedule(breakpoints=[0], intercepts=[0.1], coeffs=[[0.5]]),
        delta=0.4,
        rule=lambda t: (0.1, [0.3 + 0.2 * math.sin(t)]),
    )
    with pytest.raises(SpecValidationError):
        check_assumptions(spec, unit_exponential)
    assert check_assumptions(spec, unit_exponential, (0, 200)).passed


def test_simulate_refuses_violated_assumptions(unit_exponential):
    """Simulation stops before drawing when the contraction clause fails."""
    spec = TvArchSpec.constant(0.1, [0.7], delta=0.5)
    with pytest.raises(AssumptionViolatedError):
        simulate_tvarch(spec, unit_exponential, (0, 99), replicates=1, master_seed=0)


def test_check_assumptions_archinf(unit_exponential):
    """Moment clause uses ||Z||_nu * sum(a)."""
    spec = ArchInfSpec(a0=1.0, coeffs=[0.5], delta=0.3, nu=2.0)
    report = check_assumptions(spec, unit_exponential)
    assert report.passed
    moment = next(c for c in report.clauses if c.clause == "inf_moment")
    assert moment.value == pytest.approx(math.sqrt(2.0) * 0.5)

    heavy = ArchInfSpec(a0=1.0, coeffs=[0.6], delta=0.5, nu=2.0)
    assert {c.clause for c in check_assumptions(heavy, unit_exponential).failures()} == {
        "inf_contraction"
    }


# ========== MEAN AND MOMENT BOUNDS ==========


def test_stationary_mean_bound(arch1_tvarch, arch1_archinf):
    """a0 / (1 - sum a)."""
    assert stationary_mean_bound(arch1_tvarch) == pytest.approx(0.2)
    assert stationary_mean_bound(arch1_archinf) == pytest.approx(2.0)


def test_moment_bound_sources(arch1_archinf, unit_exponential):
    """User value, then the stationary mean for nu = 1, then Minkowski."""
    assert moment_bound(arch1_archinf, unit_exponential) == (pytest.approx(2.0), "stationary_mean")

    user = arch1_archinf.model_copy(update={"moment_bound": 7.5})
    assert moment_bound(user, unit_exponential) == (7.5, "user")

    squared = arch1_archinf.model_copy(update={"nu": 2.0})
    value, source = moment_bound(squared, unit_exponential)
    z_norm = math.sqrt(2.0)
    assert source == "minkowski"
    assert value == pytest.approx((z_norm / (1.0 - 0.5 * z_norm)) ** 2, rel=1e-12)


# ========== COMPANION MATRICES ==========


def test_companion_matrices(tvarch2):
    """First row a_j(t) z, subdiagonal ones, b = (a0 z, 0)."""
    A, A_tilde, b = companion_matrices(tvarch2, t=7, z=2.0)
    np.testing.assert_allclose(A, [[0.6, 0.4], [1.0, 0.0]])
    np.testing.assert_allclose(A_tilde, [[0.3, 0.2], [1.0, 0.0]])
    np.testing.assert_allclose(b, [0.2, 0.0])


# ========== SIMULATION ==========


def test_simulation_is_deterministic(arch1_tvarch, unit_exponential):
    """Same seed gives identical paths regardless of the worker count."""
    one = simulate_tvarch(arch1_tvarch, unit_exponential, (0, 499), replicates=4, master_seed=5, workers=1)
    many = simulate_tvarch(arch1_tvarch, unit_exponential, (0, 499), replicates=4, master_seed=5, workers=4)
    other = simulate_tvarch(arch1_tvarch, unit_exponential, (0, 499), replicates=4, master_seed=6, workers=1)
    for a, b in zip(one.paths, many.paths):
        np.testing.assert_array_equal(a, b)
    assert not np.array_equal(one.paths[0], other.paths[0])


def test_arch1_simulators_agree_bitwise(arch1_archinf, unit_exponential):
    """ARCH(1) through the tvARCH and ARCH(inf) simulators gives identical values."""
    tvarch = TvArchSpec.constant(1.0, [0.5], delta=0.3)
    a = simulate_tvarch(tvarch, unit_exponential, (0, 999), replicates=3, master_seed=7, workers=1)
    b = simulate_archinf(arch1_archinf, unit_exponential, 1000, replicates=3, master_seed=7, workers=1)
    assert b.truncation_lag == 1
    for x, y in zip(a.paths, b.paths):
        np.testing.assert_array_equal(x, y)


def test_simulated_paths_are_nonnegative(arch1_ensemble):
    """X_t >= 0 everywhere."""
    assert arch1_ensemble.replicate_count == 8
    assert arch1_ensemble.length == 5000
    assert all(np.all(path >= 0) for path in arch1_ensemble.paths)


def test_sample_mean_below_stationary_bound(arch1_tvarch, arch1_ensemble):
    """Sample mean stays below sup a0 / (1 - sup sum a) up to three standard errors."""
    means = np.array([path.mean() for path in arch1_ensemble.paths])
    se = means.std(ddof=1) / math.sqrt(means.size)
    assert means.mean() <= stationary_mean_bound(arch1_tvarch) + 3 * se


def test_propagate_reports_divergence(arch1_tvarch):
    """A non-finite value names the time and replicate where it appeared."""
    with pytest.raises(SimulationDivergedError) as exc_info:
        propagate_tvarch(arch1_tvarch, 0, [1.0], [1.0, np.inf, 1.0], replicate=3)
    assert exc_info.value.t == 2
    assert exc_info.value.replicate == 3


def test_choose_truncation_lag_is_smallest(unit_exponential):
    """L is the first lag whose tail mass drops below tail_tol * (1 - sum a)."""
    spec = ArchInfSpec(a0=1.0, rule=CoefficientRule.scaled_to("geometric", 0.5, 0.5), delta=0.3)
    lag = choose_truncation_lag(spec, 1e-8)
    budget = 1e-8 * (1.0 - spec.total())
    assert spec.tail_mass(lag) < budget
    assert spec.tail_mass(lag - 1) >= budget


def test_simulate_archinf_rejects_short_truncation(unit_exponential):
    """An explicit L below the required one reports the required L."""
    spec = ArchInfSpec(a0=1.0, rule=CoefficientRule.scaled_to("geometric", 0.5, 0.5), delta=0.3)
    with pytest.raises(TruncationError) as exc_info:
        simulate_archinf(spec, unit_exponential, 10, replicates=1, master_seed=0, truncation_lag=2)
    assert exc_info.value.required["truncation_lag"] == choose_truncation_lag(spec)


def test_simulate_archinf_rejects_short_burn_in(arch1_archinf, unit_exponential):
    """Burn-in must cover five truncation lags."""
    with pytest.raises(SpecValidationError) as exc_info:
        simulate_archinf(arch1_archinf, unit_exponential, 10, replicates=1, master_seed=0, burn_in=2)
    assert exc_info.value.field == "burn_in"


def test_simulate_archinf_geometric_rule(unit_exponential):
    """Rule-based ARCH(inf) simulates with its chosen truncation."""
    spec = ArchInfSpec(a0=0.5, rule=CoefficientRule.scaled_to("geometric", 0.6, 0.4), delta=0.3)
    ensemble = simulate_archinf(spec, unit_exponential, 2000, replicates=2, master_seed=3, workers=1)
    assert ensemble.truncation_lag == choose_truncation_lag(spec)
    assert ensemble.burn_in >= 5 * ensemble.truncation_lag
    assert all(path.size == 2000 and np.all(path >= 0) for path in ensemble.paths)


def test_simulate_archinf_polynomial_mean(uniform):
    """a_j = j^-2 / (2 zeta(2)) and a0 = 1: the sample mean sits within 3 SE of 1 / (1 - 1/2) = 2."""
    rule = CoefficientRule(kind="polynomial", scale=0.5 / (math.pi**2 / 6.0), param=2.0)
    spec = ArchInfSpec(a0=1.0, rule=rule, delta=0.4)
    ensemble = simulate_archinf(spec, uniform, 10_000, replicates=16, master_seed=8, tail_tol=1e-3, workers=2)
    means = np.array([path.mean() for path in ensemble.paths])
    se = means.std(ddof=1) / math.sqrt(means.size)
    assert abs(means.mean() - 2.0) <= 3.0 * se


# ========== SPEC IDENTIFIERS ==========


def test_spec_id_distinguishes_rules():
    """Rule-driven tvARCH specs with equal tables get different ids; equal rules agree."""
    schedule = CoefficientSchedule(breakpoints=[0], intercepts=[0.1], coeffs=[[0.4]])

    def calm(t):
        return 0.1, [0.2]

    def busy(t):
        return 0.1, [0.6 if t % 2 else 0.2]

    first = TvArchSpec(p=1, schedule=schedule, delta=0.3, rule=calm)
    second = TvArchSpec(p=1, schedule=schedule, delta=0.3, rule=busy)
    table_only = TvArchSpec(p=1, schedule=schedule, delta=0.3)
    assert len({first.spec_id, second.spec_id, table_only.spec_id}) == 3
    assert TvArchSpec(p=1, schedule=schedule, delta=0.3, rule=calm).spec_id == first.spec_id


def test_spec_id_lambda_rules_differ_by_values():
    """Two lambdas share a qualified name; their values still separate them."""
    schedule = CoefficientSchedule(breakpoints=[0], intercepts=[0.1], coeffs=[[0.4]])
    low = TvArchSpec(p=1, schedule=schedule, delta=0.3, rule=lambda t: (0.1, [0.2]))
    high = TvArchSpec(p=1, schedule=schedule, delta=0.3, rule=lambda t: (0.1, [0.3]))
    assert low.spec_id != high.spec_id
