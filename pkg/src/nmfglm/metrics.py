"""Posterior-quality metrics."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import DomainError, ShapeError
from .families import PriorSpec
from .tilt import h_inverse, quantile_from_probs, tilted_probs


def mse(u_hat, beta_star) -> float:
    """``||u_hat - beta_star||^2 / p``."""
    u_hat = np.asarray(u_hat, float)
    beta_star = np.asarray(beta_star, float)
    if u_hat.shape != beta_star.shape:
        raise ShapeError(f"length mismatch: {u_hat.shape} vs {beta_star.shape}")
    return float(np.mean((u_hat - beta_star) ** 2))


def credible_intervals(prior: PriorSpec, u_star, d, alpha: float, epsilon: float, b2_zero: float) -> np.ndarray:
    """Per-coordinate intervals ``(q_lo - eps, q_hi + eps)``, shape (p, 2).

    ``q_lo`` / ``q_hi`` are the ``alpha/2`` and ``1 - alpha/2`` quantiles
    (right-continuous inverse CDF) of the tilt with mean ``u_star[j]`` and
    scale ``d[j]``.
    """
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"alpha must be in (0, 1/2), got {alpha}")
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    u_star = np.atleast_1d(np.asarray(u_star, float))
    d = np.broadcast_to(np.asarray(d, float), u_star.shape)
    tau = h_inverse(prior, u_star, d, b2_zero)
    q = tilted_probs(prior, tau, d, b2_zero)
    lo = quantile_from_probs(prior.support, q, alpha / 2.0)
    hi = quantile_from_probs(prior.support, q, 1.0 - alpha / 2.0)
    return np.stack([lo - epsilon, hi + epsilon], axis=-1)


def coverage_fractions(samples, intervals) -> np.ndarray:
    """Per-draw fraction of coordinates inside their (open) interval."""
    S = np.atleast_2d(np.asarray(samples, float))
    I = np.asarray(intervals, float)
    if S.shape[1] != I.shape[0]:
        raise ShapeError("samples and intervals disagree on p")
    inside = (S > I[:, 0]) & (S < I[:, 1])
    return inside.mean(axis=1)


def average_coverage(samples, intervals, alpha: float = 0.1, slack: float = 0.05) -> dict:
    """Distribution of per-draw coverage fractions.

    ``exceedance`` is the fraction of draws whose coverage is at least
    ``1 - alpha - slack``.
    """
    cov = coverage_fractions(samples, intervals)
    return {
        "mean": float(cov.mean()),
        "min": float(cov.min()),
        "exceedance": float(np.mean(cov >= 1.0 - alpha - slack - 1e-12)),
        "threshold": 1.0 - alpha - slack,
        "n_draws": int(cov.size),
    }


def classification_error(x_tilde, u_star_means, f_tilde_true) -> float:
    """Leading-order out-of-sample term ``2 |phi(sum_j E[beta_j] x_j) - f|``.

    ``u_star_means`` are the tilted means ``E[beta_j]``; the caller is
    responsible for the ``||x_tilde||_inf = O(1/p)`` scaling.
    """
    eta = float(np.dot(np.asarray(x_tilde, float), np.asarray(u_star_means, float)))
    return 2.0 * abs(float(expit(eta)) - float(f_tilde_true))


def disagreement_probability(x_tilde, u_star_means, f_tilde_true) -> float:
    """``P(Y != Yhat)`` for independent ``Bern(f)`` and ``Bern(phi(x^T E beta))``."""
    a = float(expit(np.dot(np.asarray(x_tilde, float), np.asarray(u_star_means, float))))
    f = float(f_tilde_true)
    return a + f - 2.0 * a * f


def wasserstein1_1d(a, b) -> float:
    """W1 between two equal-size empirical samples via sorted differences."""
    a = np.sort(np.asarray(a, float).ravel())
    b = np.sort(np.asarray(b, float).ravel())
    if a.size == 0 or b.size == 0:
        raise DomainError("empty sample set")
    if a.size != b.size:
        raise ShapeError("equal sample counts required; resample first")
    return float(np.mean(np.abs(a - b)))


def coordwise_w1(samples_a, samples_b) -> float:
    """Average over coordinates of 1-D W1 between empirical marginals.

    Each sample set is (m, p). The result lower-bounds ``d_W1 / p`` of the
    joint laws (a coupling of the joints induces one of every marginal).
    """
    return coordwise_w1_report(samples_a, samples_b)["value"]


def coordwise_w1_report(samples_a, samples_b) -> dict:
    """:func:`coordwise_w1` with per-coordinate values and a bound label."""
    A = np.atleast_2d(np.asarray(samples_a, float))
    B = np.atleast_2d(np.asarray(samples_b, float))
    if A.size == 0 or B.size == 0:
        raise DomainError("empty sample set")
    if A.shape != B.shape:
        raise ShapeError(f"sample sets must have equal shape, got {A.shape} and {B.shape}")
    per = np.mean(np.abs(np.sort(A, axis=0) - np.sort(B, axis=0)), axis=0)
    return {
        "value": float(per.mean()),
        "per_coordinate": per.tolist(),
        "label": "coordinate-marginal LOWER BOUND on joint W1 / p",
    }
