import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from nmfglm import DomainError, discrete_prior, three_point_prior
from nmfglm.tilt import (
    ProductTilt,
    TiltParams,
    c_ddot,
    c_dot,
    c_pi,
    h_inverse,
    kl_tilt_grad_u,
    kl_tilt_vs_prior,
    product_kl,
    tilt_cov,
    tilt_quantile,
    tilted_probs,
)

PRIOR = three_point_prior(0.6)
B0 = 0.25


def direct_logz(g, d, b0=B0, prior=PRIOR):
    s, q = prior.support, prior.probs
    return np.log(np.sum(q * np.exp(g * s - b0 * d / 2 * s * s)))


def direct_probs(g, d, b0=B0, prior=PRIOR):
    s, q = prior.support, prior.probs
    w = q * np.exp(g * s - b0 * d / 2 * s * s)
    return w / w.sum()


def test_normalizer_closed_forms():
    assert c_pi(PRIOR, TiltParams(0.0, 0.0, B0)) == 0.0
    # weights exp(-(1/4)(4/2) s^2) = e^{-1/2} at s = +-1
    assert c_pi(PRIOR, TiltParams(0.0, 4.0, B0)) == pytest.approx(np.log(0.6 + 0.4 * np.exp(-0.5)), abs=1e-14)
    assert c_pi(PRIOR, TiltParams(1.0, 0.0, B0)) == pytest.approx(np.log(0.6 + 0.2 * np.e + 0.2 / np.e), abs=1e-14)


def test_normalizer_matches_direct_sum_on_grid():
    for g in np.linspace(-40, 40, 17):
        for d in (0.0, 0.3, 5.0, 100.0):
            assert c_pi(PRIOR, TiltParams(g, d, B0)) == pytest.approx(direct_logz(g, d), rel=1e-12, abs=1e-12)


def test_moments_simple_cases():
    for d in (0.0, 1.0, 7.5):
        assert c_dot(PRIOR, TiltParams(0.0, d, B0)) == pytest.approx(0.0, abs=1e-15)
    assert c_ddot(PRIOR, TiltParams(0.0, 0.0, B0)) == pytest.approx(0.4)
    assert c_dot(PRIOR, TiltParams(50.0, 0.0, B0)) == pytest.approx(1.0, abs=1e-10)


def test_moments_match_finite_differences_of_normalizer():
    h = 1e-4
    for g in (-3.0, -0.5, 0.0, 0.7, 2.0):
        for d in (0.0, 2.0, 10.0):
            f = lambda x: c_pi(PRIOR, TiltParams(x, d, B0))  # noqa: E731
            fd1 = (f(g + h) - f(g - h)) / (2 * h)
            fd2 = (f(g + h) - 2 * f(g) + f(g - h)) / h**2
            assert c_dot(PRIOR, TiltParams(g, d, B0)) == pytest.approx(fd1, abs=1e-7)
            assert c_ddot(PRIOR, TiltParams(g, d, B0)) == pytest.approx(fd2, abs=1e-6)


def test_tilted_probs_are_distributions():
    g = np.random.default_rng(0)
    G = g.uniform(-100, 100, 500)
    D = g.uniform(0, 200, 500)
    q = tilted_probs(PRIOR, G, D, B0)
    assert np.all(q >= 0)
    assert np.max(np.abs(q.sum(axis=1) - 1)) < 1e-12


def test_inverse_at_symmetric_point():
    for d in (0.0, 3.0, 40.0):
        assert h_inverse(PRIOR, 0.0, d, B0) == pytest.approx(0.0, abs=1e-12)


def test_inverse_regression_against_bracketing_root():
    target = brentq(lambda g: 0.4 * np.sinh(g) / (0.6 + 0.4 * np.cosh(g)) - 0.3, -20, 20, xtol=1e-14)
    assert h_inverse(PRIOR, 0.3, 0.0, B0) == pytest.approx(target, abs=1e-9)
    assert target == pytest.approx(0.7653024832768202, abs=1e-9)


def test_inverse_round_trip():
    g = np.random.default_rng(1)
    u = g.uniform(-0.999, 0.999, 100)
    d = g.uniform(0, 50, 100)
    gam = h_inverse(PRIOR, u, d, B0)
    assert np.max(np.abs(c_dot(PRIOR, TiltParams(gam, d, B0)) - u)) < 1e-9


def test_inverse_is_strictly_increasing():
    g = np.random.default_rng(2)
    u = np.linspace(-0.99, 0.99, 199)
    for d in g.uniform(0, 30, 10):
        assert np.all(np.diff(h_inverse(PRIOR, u, np.full_like(u, d), B0)) > 0)


def test_inverse_rejects_means_outside_hull():
    with pytest.raises(DomainError):
        h_inverse(PRIOR, 1.5, 0.0, B0)


def test_kl_zero_at_prior_and_nonnegative():
    assert kl_tilt_vs_prior(PRIOR, 0.0, 0.0, B0) == pytest.approx(0.0, abs=1e-14)
    g = np.random.default_rng(3)
    vals = kl_tilt_vs_prior(PRIOR, g.uniform(-0.99, 0.99, 200), g.uniform(0, 20, 200), B0)
    assert np.all(vals >= -1e-12)


def test_kl_matches_direct_sum():
    for u, d in [(0.3, 0.0), (-0.7, 2.5), (0.05, 30.0)]:
        q = direct_probs(h_inverse(PRIOR, u, d, B0), d)
        direct = np.sum(q * np.log(q / PRIOR.probs))
        assert kl_tilt_vs_prior(PRIOR, u, d, B0) == pytest.approx(direct, abs=1e-10)


def test_product_kl_additive_and_matches_joint_sum():
    u = np.array([0.4, -0.2])
    d = np.array([1.0, 3.0])
    assert product_kl(PRIOR, u, d, B0) == pytest.approx(sum(kl_tilt_vs_prior(PRIOR, a, b, B0) for a, b in zip(u, d)))
    q1, q2 = (direct_probs(h_inverse(PRIOR, a, b, B0), b) for a, b in zip(u, d))
    joint = np.outer(q1, q2)
    pj = np.outer(PRIOR.probs, PRIOR.probs)
    assert product_kl(PRIOR, u, d, B0) == pytest.approx(np.sum(joint * np.log(joint / pj)), abs=1e-10)
    assert product_kl(PRIOR, np.zeros(3), np.zeros(3), B0) == pytest.approx(0.0, abs=1e-14)


def test_kl_gradient_formula_matches_finite_difference():
    h = 1e-6
    for u in (-0.6, -0.1, 0.2, 0.75):
        for d in (0.0, 1.5, 12.0):
            fd = (kl_tilt_vs_prior(PRIOR, u + h, d, B0) - kl_tilt_vs_prior(PRIOR, u - h, d, B0)) / (2 * h)
            assert kl_tilt_grad_u(PRIOR, u, d, B0) == pytest.approx(fd, abs=1e-6)


def test_kl_gradient_blows_up_at_boundary():
    vals = [kl_tilt_grad_u(PRIOR, 1 - 10.0**-k, 2.0, B0) for k in range(2, 7)]
    assert np.all(np.diff(vals) > 0)


def test_quantiles_walk_the_cdf():
    assert tilt_quantile(PRIOR, 0.0, 0.0, 0.5, B0) == 0.0
    assert tilt_quantile(PRIOR, 0.0, 0.0, 0.05, B0) == -1.0
    assert tilt_quantile(PRIOR, 0.0, 0.0, 0.95, B0) == 1.0
    # exact hit on a cumulative mass counts
    assert tilt_quantile(PRIOR, 0.0, 0.0, 0.2, B0) == -1.0
    with pytest.raises(DomainError):
        tilt_quantile(PRIOR, 0.0, 0.0, 1.0, B0)


def test_covariance_functional():
    t = TiltParams(0.4, 1.3, B0)
    assert tilt_cov(PRIOR, t, lambda s: np.full_like(s, 3.0)) == pytest.approx(0.0, abs=1e-15)
    assert tilt_cov(PRIOR, t, lambda s: s) == pytest.approx(c_ddot(PRIOR, t), abs=1e-14)
    assert tilt_cov(PRIOR, TiltParams(0.0, 0.0, B0), lambda s: s * s) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    probs=st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5),
    u_frac=st.floats(0.02, 0.98),
    d=st.floats(0.0, 50.0),
)
def test_round_trip_on_random_priors(probs, u_frac, d):
    K = len(probs)
    q = np.asarray(probs) / np.sum(probs)
    q = q / q.sum()
    prior = discrete_prior(np.linspace(-1, 1, K) * 0.9, q)
    lo, hi = prior.support[0], prior.support[-1]
    u = lo + u_frac * (hi - lo)
    gam = h_inverse(prior, u, d, 1.0)
    assert c_dot(prior, TiltParams(gam, d, 1.0)) == pytest.approx(u, abs=1e-9)


def test_product_tilt_from_means():
    pt = ProductTilt.from_means(PRIOR, np.array([0.1, -0.5]), np.array([1.0, 2.0]), B0)
    assert np.allclose(pt.means(), [0.1, -0.5], atol=1e-10)
    assert pt.probs().shape == (2, 3)
