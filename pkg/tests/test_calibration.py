import numpy as np
import pytest
import scipy.stats

from bayescg_lab.calibration import (
    CalibrationConfig,
    bayesian_accuracy_study,
    calibration_scenarios,
    chi2_cdf,
    chi2_quantile,
    cost_factor_study,
    ks_statistic,
    ks_two_sample,
    run_calibration,
    z_statistic,
)
from bayescg_lab.gaussian import GaussianBelief
from bayescg_lab.problems import random_spd_problem
from bayescg_lab.solver import PriorSpec, TerminationPolicy, bayescg_solve, make_prior

rng = np.random.default_rng(2718)


# ---------------------------------------------------------------------------
# chi-squared helpers (checked against the scipy.stats reference route)

@pytest.mark.parametrize("dof", [1, 4, 15])
def test_chi2_cdf_against_scipy_stats(dof):
    x = np.linspace(0.01, 4 * dof, 40)
    np.testing.assert_allclose(chi2_cdf(x, dof), scipy.stats.chi2.cdf(x, dof), atol=1e-12)


@pytest.mark.parametrize("dof", [2, 15])
def test_chi2_quantile_against_scipy_stats(dof):
    for p in (0.5, 0.8, 0.9, 0.95):
        assert chi2_quantile(p, dof) == pytest.approx(scipy.stats.chi2.ppf(p, dof), rel=1e-10)


def test_ks_statistic_small_for_true_chi2_samples():
    dof = 6
    samples = scipy.stats.chi2.rvs(dof, size=4000, random_state=9)
    assert ks_statistic(samples, dof) <= 0.03


def test_ks_statistic_large_for_wrong_reference():
    samples = scipy.stats.chi2.rvs(2, size=2000, random_state=9)
    assert ks_statistic(samples, 12) >= 0.5


def test_ks_two_sample_identical_is_zero():
    a = rng.standard_normal(100)
    assert ks_two_sample(a, a) == 0.0


# ---------------------------------------------------------------------------
# z statistic

def test_z_zero_when_truth_equals_mean():
    b = GaussianBelief(np.ones(3), np.eye(3))
    assert z_statistic(np.ones(3), b) == 0.0


def test_z_scalar_one_sigma():
    b = GaussianBelief(np.zeros(1), np.eye(1))
    assert z_statistic(np.array([1.0]), b) == pytest.approx(1.0, abs=1e-12)


def test_z_dirac_belief():
    b = GaussianBelief.dirac(np.array([2.0, 3.0]))
    assert z_statistic(np.array([2.0, 3.0]), b) == 0.0
    assert z_statistic(np.array([2.5, 3.0]), b) == np.inf


def test_z_invariant_under_direction_normalization():
    d, m = 12, 4
    problem = random_spd_problem(d, 5)
    prior = make_prior(PriorSpec.identity(), problem)
    policy = TerminationPolicy(residual_tol=1e-300, trace_tol=1e-300, max_iters=m)
    t_on = bayescg_solve(problem, prior, policy, normalize_directions=True)
    t_off = bayescg_solve(problem, prior, policy, normalize_directions=False)
    z_on = z_statistic(problem.truth, t_on.final_belief())
    z_off = z_statistic(problem.truth, t_off.final_belief())
    assert z_on == pytest.approx(z_off, rel=1e-8)


def test_z_mean_matches_chi2_identity_monte_carlo():
    # well-specified randomized setup with solution-independent directions:
    # sample mean of Z within 5% of d - m
    config = CalibrationConfig(d=12, m=4, generating_prior=PriorSpec.identity(),
                               solver_prior=PriorSpec.identity(),
                               replications=2000, rng_seed=3)
    report = run_calibration(config)
    dof = 8
    assert report.reference_dof == dof
    assert abs(report.mean_z - dof) <= 0.05 * dof


# ---------------------------------------------------------------------------
# run_calibration

def test_well_specified_ks_small():
    config = CalibrationConfig(d=10, m=3, generating_prior=PriorSpec.identity(),
                               solver_prior=PriorSpec.identity(),
                               replications=1500, rng_seed=7)
    report = run_calibration(config)
    assert report.ks_statistic <= 0.05
    for lv, rate in report.credible_coverage.items():
        assert abs(rate - lv) <= 0.06


def test_over_dispersed_prior_over_covers():
    scenarios = calibration_scenarios(d=10, m=3, replications=400, rng_seed=11)
    report = run_calibration(scenarios["over_dispersed"])
    for lv, rate in report.credible_coverage.items():
        assert rate > lv, (lv, rate)


def test_under_dispersed_prior_under_covers():
    scenarios = calibration_scenarios(d=10, m=3, replications=400, rng_seed=11)
    report = run_calibration(scenarios["under_dispersed"])
    for lv, rate in report.credible_coverage.items():
        assert rate < lv, (lv, rate)


def test_coverage_monotone_in_level_every_scenario():
    scenarios = calibration_scenarios(d=8, m=2, replications=200, rng_seed=13)
    for name, config in scenarios.items():
        report = run_calibration(config)
        rates = [report.credible_coverage[lv] for lv in config.levels]
        assert all(b >= a for a, b in zip(rates, rates[1:])), (name, rates)


def test_krylov_directions_are_conservative():
    # Residual-seeded directions peek at b, so the belief keeps more spread
    # than the realized error: Z collapses far below its reference mean.
    config = CalibrationConfig(d=12, m=4, generating_prior=PriorSpec.identity(),
                               solver_prior=PriorSpec.identity(),
                               replications=400, rng_seed=17,
                               direction_policy="krylov")
    report = run_calibration(config)
    # many standard errors below the well-specified mean, and visibly non-chi2
    assert report.mean_z < 0.85 * report.reference_dof
    assert report.ks_statistic > 0.1
    for lv, rate in report.credible_coverage.items():
        assert rate > lv, (lv, rate)


def test_full_depth_beliefs_are_dirac_and_z_zero():
    config = CalibrationConfig(d=6, m=6, generating_prior=PriorSpec.identity(),
                               solver_prior=PriorSpec.identity(),
                               replications=50, rng_seed=19)
    report = run_calibration(config)
    assert report.reference_dof == 0
    assert np.all(report.z_samples == 0.0)
    assert all(rate == 1.0 for rate in report.credible_coverage.values())


def test_c_sigma0_estimate_within_eigenvalue_envelope():
    d = 10
    g = rng.standard_normal((d, d))
    sigma0 = g @ g.T / d + np.eye(d)
    config = CalibrationConfig(d=d, m=3, generating_prior=PriorSpec.identity(),
                               solver_prior=PriorSpec.user(sigma0),
                               replications=10, rng_seed=23)
    report = run_calibration(config)
    lam = np.linalg.eigvalsh(sigma0)
    assert lam[0] - 1e-9 <= report.c_sigma0_estimate <= lam[-1] + 1e-9


def test_square_root_route_indifference():
    # Sampling the truth through the symmetric PSD root or the Cholesky factor
    # yields the same Z distribution (same stream, correlated draws).
    base = dict(d=10, m=3,
                generating_prior=PriorSpec.user(np.diag(np.linspace(0.5, 2.0, 10))),
                solver_prior=PriorSpec.user(np.diag(np.linspace(0.5, 2.0, 10))),
                replications=2000, rng_seed=29)
    r_chol = run_calibration(CalibrationConfig(factor_route="cholesky", **base))
    r_sqrt = run_calibration(CalibrationConfig(factor_route="psd_sqrt", **base))
    assert ks_two_sample(r_chol.z_samples, r_sqrt.z_samples) <= 0.05


def test_calibration_deterministic():
    config = CalibrationConfig(d=8, m=2, generating_prior=PriorSpec.identity(),
                               solver_prior=PriorSpec.identity(),
                               replications=60, rng_seed=31)
    r1 = run_calibration(config)
    r2 = run_calibration(config)
    assert np.array_equal(r1.z_samples, r2.z_samples)
    assert r1.credible_coverage == r2.credible_coverage


def test_config_validation():
    with pytest.raises(ValueError):
        CalibrationConfig(d=5, m=0, generating_prior=PriorSpec.identity(),
                          solver_prior=PriorSpec.identity())
    with pytest.raises(ValueError):
        CalibrationConfig(d=5, m=2, generating_prior=PriorSpec.identity(),
                          solver_prior=PriorSpec.identity(), direction_policy="nope")


# ---------------------------------------------------------------------------
# Bayesian accuracy

def test_bayesian_accuracy_analytic_distance_vanishes():
    config = CalibrationConfig(d=10, m=3, generating_prior=PriorSpec.identity(),
                               solver_prior=PriorSpec.identity(),
                               replications=1, rng_seed=37)
    result = bayesian_accuracy_study(config, sample_sizes=(1000,))
    assert result.analytic.mean_diff <= 1e-8
    assert result.analytic.cov_frobenius_diff <= 1e-8


def test_bayesian_accuracy_empirical_moments_shrink():
    config = CalibrationConfig(d=10, m=3, generating_prior=PriorSpec.identity(),
                               solver_prior=PriorSpec.identity(),
                               replications=1, rng_seed=37)
    result = bayesian_accuracy_study(config, sample_sizes=(1000, 10000))
    for n, stats in result.empirical.items():
        assert stats["mean_gap_max"] <= 5.0 / np.sqrt(n), (n, stats)
    assert result.empirical[10000]["cov_frobenius_diff"] <= 1.0


def test_bayesian_accuracy_m_zero_is_prior_comparison():
    config = CalibrationConfig(d=6, m=6, generating_prior=PriorSpec.identity(),
                               solver_prior=PriorSpec.identity(),
                               replications=1, rng_seed=41)
    result = bayesian_accuracy_study(config, sample_sizes=(1000,))
    assert result.analytic.max_gap() <= 1e-8


# ---------------------------------------------------------------------------
# cost factor

def test_cost_factor_report_structure_and_counters():
    report = cost_factor_study(d=96, trials=1, iters=24, rng_seed=43)
    assert report.dense.flop_ratio > 1.0
    assert report.sparse.flop_ratio < report.dense.flop_ratio
    assert report.dense.wall_ratio > 0.0
    assert report.runtime_ratio == report.dense.wall_ratio


def test_cost_factor_flops_deterministic():
    r1 = cost_factor_study(d=64, trials=1, iters=16, rng_seed=47)
    r2 = cost_factor_study(d=64, trials=1, iters=16, rng_seed=47)
    assert r1.dense.flops_bayescg == r2.dense.flops_bayescg
    assert r1.dense.flops_cg == r2.dense.flops_cg
