import numpy as np
import pytest

from bayescg_lab.errors import DimensionMismatchError
from bayescg_lab.gaussian import (
    GaussianBelief,
    InnerProductWeight,
    all_weights,
    gaussian_w2_distance,
    make_weight,
    sample_gaussian,
)

rng = np.random.default_rng(77)


def random_belief(d, r):
    return GaussianBelief(rng.standard_normal(d), rng.standard_normal((d, r)))


# ---------------------------------------------------------------------------
# GaussianBelief

def test_belief_basic_fields():
    b = GaussianBelief(np.zeros(3), np.eye(3))
    assert b.dim == 3
    assert b.rank_hint == 3
    assert not b.is_dirac
    assert np.array_equal(b.covariance(), np.eye(3))


def test_belief_dirac():
    b = GaussianBelief.dirac(np.array([1.0, 2.0]))
    assert b.is_dirac
    assert b.covariance_factor.shape == (2, 0)
    assert b.covariance_trace() == 0.0


def test_belief_deferred_factor_materializes_once():
    calls = []

    def build():
        calls.append(1)
        return np.eye(2)

    b = GaussianBelief(np.zeros(2), None, factor_fn=build, rank_hint=2)
    assert b.rank_hint == 2
    assert not calls
    assert np.array_equal(b.covariance_factor, np.eye(2))
    b.covariance()
    assert len(calls) == 1


def test_belief_rejects_factor_shape():
    with pytest.raises(DimensionMismatchError):
        GaussianBelief(np.zeros(3), np.eye(2))


def test_belief_requires_exactly_one_factor_source():
    with pytest.raises(ValueError):
        GaussianBelief(np.zeros(2), np.eye(2), factor_fn=lambda: np.eye(2))


# ---------------------------------------------------------------------------
# sampling

def test_sample_dirac_returns_copies_of_mean():
    b = GaussianBelief.dirac(np.array([3.0, -1.0]))
    draws = sample_gaussian(b, 5, 7)
    assert draws.shape == (7, 2)
    assert np.all(draws == np.array([3.0, -1.0]))


def test_sample_standard_normal_law_of_large_numbers():
    b = GaussianBelief(np.zeros(2), np.eye(2))
    draws = sample_gaussian(b, 11, 100_000)
    assert np.all(np.abs(draws.mean(axis=0)) < 0.02)


def test_sample_deterministic_given_seed():
    b = random_belief(4, 3)
    assert np.array_equal(sample_gaussian(b, 99, 10), sample_gaussian(b, 99, 10))


def test_sample_covariance_matches_factor():
    f = rng.standard_normal((3, 2))
    b = GaussianBelief(np.zeros(3), f)
    draws = sample_gaussian(b, 5, 200_000)
    emp = draws.T @ draws / draws.shape[0]
    assert np.linalg.norm(emp - f @ f.T, "fro") < 0.05


# ---------------------------------------------------------------------------
# 2-Wasserstein distance

def test_w2_identical_beliefs_zero():
    b = random_belief(5, 5)
    # sqrt at zero amplifies machine-eps trace residuals to ~sqrt(eps)
    assert gaussian_w2_distance(b, b) <= 1e-7


def test_w2_equal_covariance_reduces_to_mean_gap():
    f = rng.standard_normal((4, 4))
    mu = np.array([1.0, -2.0, 0.5, 3.0])
    p = GaussianBelief(np.zeros(4), f)
    q = GaussianBelief(mu, f)
    assert abs(gaussian_w2_distance(p, q) - np.linalg.norm(mu)) <= 1e-8


def test_w2_dirac_pair_is_euclidean_distance():
    x = np.array([1.0, 2.0])
    y = np.array([-1.0, 5.0])
    d = gaussian_w2_distance(GaussianBelief.dirac(x), GaussianBelief.dirac(y))
    assert abs(d - np.linalg.norm(x - y)) <= 1e-12


def test_w2_symmetry():
    p, q = random_belief(4, 4), random_belief(4, 2)
    assert abs(gaussian_w2_distance(p, q) - gaussian_w2_distance(q, p)) <= 1e-8


def test_w2_triangle_inequality_random_triples():
    for _ in range(10):
        p, q, r = (random_belief(3, k) for k in (3, 2, 3))
        dpq = gaussian_w2_distance(p, q)
        dqr = gaussian_w2_distance(q, r)
        dpr = gaussian_w2_distance(p, r)
        assert dpr <= dpq + dqr + 1e-8


def test_w2_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        gaussian_w2_distance(random_belief(2, 2), random_belief(3, 3))


# ---------------------------------------------------------------------------
# inner-product weights

def test_weight_validates_tag_and_spd():
    with pytest.raises(ValueError):
        InnerProductWeight("nope", np.eye(2))
    with pytest.raises(ValueError):
        InnerProductWeight("a", np.diag([1.0, -1.0]))


def test_make_weight_builds_all_four():
    g = rng.standard_normal((4, 4))
    a = g @ g.T / 4 + np.eye(4)
    sigma0 = np.diag([1.0, 2.0, 3.0, 4.0])
    weights = all_weights(a, sigma0)
    assert set(weights) == {"euclidean", "a", "sigma0", "a_sigma0_at"}
    np.testing.assert_allclose(weights["euclidean"].matrix, np.eye(4))
    np.testing.assert_allclose(weights["a"].matrix, a, atol=1e-12)
    np.testing.assert_allclose(weights["sigma0"].matrix, sigma0)
    np.testing.assert_allclose(weights["a_sigma0_at"].matrix, a @ sigma0 @ a.T, atol=1e-12)


def test_make_weight_a_sigma0_at_accepts_nonsymmetric_operator():
    a = np.array([[1.0, 2.0], [0.0, 1.0]])
    w = make_weight("a_sigma0_at", a, np.eye(2))
    assert w.matrix.shape == (2, 2)
