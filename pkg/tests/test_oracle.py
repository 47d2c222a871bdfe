import itertools
import math

import numpy as np
import pytest
from scipy import integrate

from conftest import small_model, zero_model
from nmfglm import CapacityError, Dataset, GlmModel, linear, logistic, standard_gaussian_prior, three_point_prior
from nmfglm.oracle import (
    elbo1_identity_check,
    enumerate_logz,
    enumerate_posterior,
    exact_product_elbo,
    quadrature_expectation,
    quadrature_logz,
)


def brute_logz(model):
    """Independent re-implementation: loop over every configuration."""
    s, q = model.prior.support, model.prior.probs
    total = 0.0
    for idx in itertools.product(range(s.size), repeat=model.p):
        beta = s[list(idx)]
        theta = model.X @ beta
        H = float(theta @ model.y - np.sum(model.family.b(theta)))
        total += math.prod(q[list(idx)]) * math.exp(H)
    return math.log(total)


def random_product_q(p, K, seed):
    q = np.random.default_rng(seed).dirichlet(np.ones(K), size=p)
    return q


def test_zero_design_gives_zero():
    assert enumerate_logz(zero_model()) == pytest.approx(0.0, abs=1e-15)


def test_one_coordinate_regression_value():
    m = GlmModel(logistic(), Dataset([[1.0]], [1.0]), three_point_prior())
    H = lambda b: b - (math.log1p(math.exp(b)) - math.log(2))  # noqa: E731
    direct = math.log(0.2 * math.exp(H(-1)) + 0.6 + 0.2 * math.exp(H(1)))
    assert enumerate_logz(m) == pytest.approx(direct, abs=1e-14)
    # e^{H(b)} = 2 sigmoid(b), and sigmoid(1) + sigmoid(-1) = 1, so Z = 1.
    assert enumerate_logz(m) == pytest.approx(0.0, abs=1e-15)
    m2 = GlmModel(logistic(), Dataset([[0.5]], [0.0]), three_point_prior())
    H2 = lambda b: -(math.log1p(math.exp(0.5 * b)) - math.log(2))  # noqa: E731
    assert enumerate_logz(m2) == pytest.approx(math.log(0.2 * math.exp(H2(-1)) + 0.6 + 0.2 * math.exp(H2(1))), abs=1e-14)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_matches_brute_force_loop(p):
    for fam in (logistic(), linear()):
        m = small_model(n=12, p=p, family=fam, seed=p, scale=4.0)
        assert enumerate_logz(m) == pytest.approx(brute_logz(m), abs=1e-12)


def test_capacity_error():
    m = small_model(n=5, p=14)
    with pytest.raises(CapacityError):
        enumerate_logz(m, cap=1000)


def test_posterior_of_zero_design_is_prior():
    post = enumerate_posterior(zero_model(p=2))
    assert np.allclose(post["marginals"], three_point_prior().probs, atol=1e-14)


def test_sign_flip_symmetry_gives_zero_mean():
    X = np.array([[0.5, 0.2], [-0.5, -0.2]])
    m = GlmModel(logistic(), Dataset(X, [1.0, 1.0]), three_point_prior())
    assert np.allclose(enumerate_posterior(m)["mean"], 0.0, atol=1e-14)


def test_enumeration_is_permutation_equivariant():
    m = small_model(n=15, p=4, seed=3, scale=4.0)
    perm = [2, 0, 3, 1]
    mp = GlmModel(m.family, Dataset(m.X[:, perm], m.y), m.prior)
    a, b = enumerate_posterior(m), enumerate_posterior(mp)
    assert np.allclose(a["marginals"][perm], b["marginals"], atol=1e-12)
    assert a["logz"] == pytest.approx(b["logz"], abs=1e-12)


def test_identity_closes_at_prior_on_zero_design():
    m = zero_model(p=3)
    q = np.tile(m.prior.probs, (3, 1))
    r = elbo1_identity_check(m, q)
    assert abs(r["expected_hamiltonian"]) < 1e-15
    assert abs(r["kl_prior"]) < 1e-15
    assert abs(r["kl_posterior"]) < 1e-15


def test_identity_closes_for_random_q():
    for seed in range(5):
        m = small_model(n=20, p=4, seed=seed, scale=4.0)
        assert abs(elbo1_identity_check(m, random_product_q(4, 3, seed))["gap"]) < 1e-9


def test_product_elbo_never_exceeds_logz():
    for seed in range(10):
        m = small_model(n=10, p=3, seed=seed, scale=9.0)
        logz = enumerate_logz(m)
        assert exact_product_elbo(m, random_product_q(3, 3, seed)) <= logz + 1e-9


def test_identity_with_exact_posterior_on_one_coordinate():
    m = small_model(n=10, p=1, seed=4, scale=9.0)
    post = enumerate_posterior(m)
    r = elbo1_identity_check(m, post["marginals"])
    assert r["kl_posterior"] == pytest.approx(0.0, abs=1e-12)
    assert r["expected_hamiltonian"] - r["kl_prior"] == pytest.approx(post["logz"], abs=1e-12)


def test_quadrature_zero_design():
    m = zero_model(p=2, prior=standard_gaussian_prior())
    assert quadrature_logz(m) == pytest.approx(0.0, abs=1e-14)


def test_quadrature_one_point_logistic_is_zero():
    # E[2 sigmoid(beta)] = 1 for symmetric beta, so log Z = 0.
    m = GlmModel(logistic(), Dataset([[1.0]], [1.0]), standard_gaussian_prior())
    assert quadrature_logz(m) == pytest.approx(0.0, abs=1e-12)
    assert quadrature_logz(m, nodes=128) == pytest.approx(quadrature_logz(m, nodes=64), abs=1e-8)


def test_quadrature_matches_linear_closed_form():
    g = np.random.default_rng(0)
    x = g.standard_normal(6) * 0.5
    y = g.standard_normal(6)
    m = GlmModel(linear(), Dataset(x[:, None], y), standard_gaussian_prior())
    a = x @ x
    b = x @ y
    closed = 0.5 * b * b / (1 + a) - 0.5 * math.log(1 + a)
    assert quadrature_logz(m) == pytest.approx(closed, abs=1e-10)


def test_quadrature_matches_adaptive_integration_in_two_dimensions():
    m = small_model(n=8, p=2, seed=5, prior=standard_gaussian_prior(), scale=2.0)

    def integrand(b2, b1):
        theta = m.X @ np.array([b1, b2])
        H = theta @ m.y - np.sum(m.family.b(theta))
        return math.exp(H - 0.5 * (b1 * b1 + b2 * b2)) / (2 * math.pi)

    val, _ = integrate.dblquad(integrand, -12, 12, -12, 12, epsabs=1e-12)
    assert quadrature_logz(m) == pytest.approx(math.log(val), abs=1e-8)


def test_quadrature_capacity():
    with pytest.raises(CapacityError):
        quadrature_logz(zero_model(p=4, prior=standard_gaussian_prior()))


def test_quadrature_expectation_moments():
    assert quadrature_expectation(lambda z: z[:, 0] ** 2, [0.5], [[2.0]]) == pytest.approx(2.25)
    cov = np.array([[1.0, 0.3], [0.3, 0.5]])
    assert quadrature_expectation(lambda z: z[:, 0] * z[:, 1], [0, 0], cov) == pytest.approx(0.3)
