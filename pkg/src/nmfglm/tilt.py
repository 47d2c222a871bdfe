"""Quadratic exponential tilts of a discrete prior.

For a prior ``pi`` on ``[-1, 1]`` the tilt with natural parameter ``gamma1``
and quadratic scale ``d`` reweights ``pi`` by

    exp(gamma1 * x - b''(0) * d / 2 * x**2 - c_pi(gamma1, d)).

``c_dot`` and ``c_ddot`` are the first two ``gamma1``-derivatives of the
log-normalizer, i.e. the tilted mean and variance.  ``h_inverse`` inverts
the mean map at fixed ``d``.

All functions broadcast over array-valued ``gamma1`` / ``u`` / ``d``; the
support axis is always the trailing one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, NumericError
from .families import PriorSpec

U_CLAMP = 1e-12
H_TOL = 1e-10
H_MAX_ITER = 200


@dataclass(frozen=True)
class TiltParams:
    """Natural parameter ``gamma1``, quadratic scale ``d >= 0`` and ``b''(0)``."""

    gamma1: float | np.ndarray
    d: float | np.ndarray
    b2_zero: float

    def __post_init__(self):
        if np.any(np.asarray(self.d) < 0):
            raise DomainError("quadratic tilt scale d must be non-negative")
        if not (np.all(np.isfinite(self.gamma1)) and np.all(np.isfinite(self.d))):
            raise DomainError("tilt parameters must be finite")


@dataclass(frozen=True, eq=False)
class ProductTilt:
    """Product of tilts ``prod_j pi_(gamma_j, d_j)`` sharing one prior."""

    prior: PriorSpec
    gamma1: np.ndarray
    d: np.ndarray
    b2_zero: float

    def __post_init__(self):
        self.prior.require_discrete()
        g = np.asarray(self.gamma1, float)
        d = np.broadcast_to(np.asarray(self.d, float), g.shape).copy()
        object.__setattr__(self, "gamma1", g)
        object.__setattr__(self, "d", d)

    @classmethod
    def from_means(cls, prior: PriorSpec, u, d, b2_zero: float) -> "ProductTilt":
        u = np.asarray(u, float)
        return cls(prior, h_inverse(prior, u, d, b2_zero), d, b2_zero)

    @property
    def p(self) -> int:
        return self.gamma1.shape[0]

    def probs(self) -> np.ndarray:
        """(p, K) matrix of per-coordinate tilted pmfs."""
        return tilted_probs(self.prior, self.gamma1, self.d, self.b2_zero)

    def means(self) -> np.ndarray:
        return self.probs() @ self.prior.support


def _log_weights(prior: PriorSpec, gamma1, d, b2_zero) -> np.ndarray:
    prior.require_discrete()
    s = prior.support
    g = np.asarray(gamma1, float)[..., None]
    dd = np.asarray(d, float)[..., None]
    return prior.log_probs + g * s - b2_zero * dd / 2.0 * s * s


def tilted_probs(prior: PriorSpec, gamma1, d, b2_zero: float) -> np.ndarray:
    """Tilted pmf over ``prior.support`` (trailing axis)."""
    lw = _log_weights(prior, gamma1, d, b2_zero)
    lw = lw - lw.max(axis=-1, keepdims=True)
    w = np.exp(lw)
    return w / w.sum(axis=-1, keepdims=True)


def _unpack(tilt: TiltParams):
    return tilt.gamma1, tilt.d, tilt.b2_zero


def c_pi(prior: PriorSpec, tilt: TiltParams):
    """Log-normalizer of the tilt (log-sum-exp over the support)."""
    out = logsumexp(_log_weights(prior, *_unpack(tilt)), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _mean_var(prior: PriorSpec, gamma1, d, b2_zero):
    q = tilted_probs(prior, gamma1, d, b2_zero)
    s = prior.support
    m = q @ s
    var = np.einsum("...k,...k->...", q, (s - m[..., None]) ** 2)
    return m, var


def c_dot(prior: PriorSpec, tilt: TiltParams):
    """Tilted mean."""
    m, _ = _mean_var(prior, *_unpack(tilt))
    return float(m) if np.ndim(m) == 0 else m


def c_ddot(prior: PriorSpec, tilt: TiltParams):
    """Tilted variance."""
    _, v = _mean_var(prior, *_unpack(tilt))
    return float(v) if np.ndim(v) == 0 else v


def clamp_mean(prior: PriorSpec, u):
    """Pull ``u`` into ``[min + 1e-12, max - 1e-12]`` of the support hull."""
    lo, hi = prior.support[0], prior.support[-1]
    return np.clip(u, lo + U_CLAMP, hi - U_CLAMP)


def _check_mean_range(prior: PriorSpec, u) -> None:
    prior.require_discrete()
    lo, hi = prior.support[0], prior.support[-1]
    u = np.asarray(u, float)
    bad = ~np.isfinite(u) | (u < lo) | (u > hi) | (lo == hi)
    if np.any(bad):
        idx = int(np.flatnonzero(np.atleast_1d(bad))[0])
        val = np.atleast_1d(u)[idx]
        raise DomainError(
            f"mean {val!r} at index {idx} is outside the support hull [{lo}, {hi}]", index=idx
        )


def h_inverse(prior: PriorSpec, u, d, b2_zero: float, tol: float = H_TOL):
    """Natural parameter whose tilted mean equals ``u`` at quadratic scale ``d``.

    Safeguarded Newton on ``gamma1`` with the tilted variance as derivative,
    falling back to bisection on a bracket grown by doubling from
    ``[-1, 1]``.  Means on the boundary of the support hull are first
    clamped 1e-12 inside it.

    Raises
    ------
    DomainError
        If ``u`` lies outside the closed support hull.
    NumericError
        If the residual is not below ``tol`` after 200 iterations.
    """
    _check_mean_range(prior, u)
    scalar = np.ndim(u) == 0 and np.ndim(d) == 0
    u = clamp_mean(prior, np.asarray(u, float))
    u, d = np.broadcast_arrays(u, np.asarray(d, float))
    u = u.astype(float).copy()
    d = d.astype(float).copy()
    if np.any(d < 0):
        raise DomainError("quadratic tilt scale d must be non-negative")

    lo = -np.ones_like(u)
    hi = np.ones_like(u)
    for _ in range(200):
        m_lo, _ = _mean_var(prior, lo, d, b2_zero)
        m_hi, _ = _mean_var(prior, hi, d, b2_zero)
        grow_lo = m_lo > u
        grow_hi = m_hi < u
        if not (grow_lo.any() or grow_hi.any()):
            break
        lo = np.where(grow_lo, 2.0 * lo, lo)
        hi = np.where(grow_hi, 2.0 * hi, hi)
    else:
        raise NumericError("could not bracket the inverse mean map")

    x = np.zeros_like(u)
    x = np.clip(x, lo, hi)
    for _ in range(H_MAX_ITER):
        m, v = _mean_var(prior, x, d, b2_zero)
        r = m - u
        done = np.abs(r) < tol
        if done.all():
            return float(x) if scalar else x
        lo = np.where(r < 0, x, lo)
        hi = np.where(r > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = x - r / v
        mid = 0.5 * (lo + hi)
        ok = np.isfinite(step) & (step > lo) & (step < hi)
        x = np.where(done, x, np.where(ok, step, mid))
    raise NumericError(f"inverse mean map did not converge in {H_MAX_ITER} iterations")


def _second_moment(prior: PriorSpec, gamma1, d, b2_zero):
    q = tilted_probs(prior, gamma1, d, b2_zero)
    return q @ (prior.support**2)


def kl_tilt_vs_prior(prior: PriorSpec, u, d, b2_zero: float):
    """``KL(pi_(h(u,d), d) || pi)``.

    Evaluated as ``u h - b''(0) d/2 E[X^2] - c_pi(h, d)``, which is the KL
    of a tilt written in its natural parameters.
    """
    h = h_inverse(prior, u, d, b2_zero)
    u_c = clamp_mean(prior, np.asarray(u, float))
    ex2 = _second_moment(prior, h, d, b2_zero)
    g = u_c * h - b2_zero * np.asarray(d, float) / 2.0 * ex2 - c_pi(prior, TiltParams(h, d, b2_zero))
    # Exact zero at the prior can round to -1e-17.
    g = np.maximum(g, 0.0)
    return float(g) if np.ndim(g) == 0 else g


def kl_tilt_grad_u(prior: PriorSpec, u, d, b2_zero: float):
    """``d/du KL(pi_(h(u,d), d) || pi) = h - b''(0) d/2 Cov(X, X^2) / Var(X)``."""
    h = h_inverse(prior, u, d, b2_zero)
    tilt = TiltParams(h, d, b2_zero)
    cov = tilt_cov(prior, tilt, prior.support**2)
    g = h - b2_zero * np.asarray(d, float) / 2.0 * cov / c_ddot(prior, tilt)
    return float(g) if np.ndim(g) == 0 else g


def product_kl(prior: PriorSpec, u, d, b2_zero: float) -> float:
    """``sum_j KL(pi_(h(u_j,d_j), d_j) || pi)``."""
    u = np.atleast_1d(np.asarray(u, float))
    d = np.broadcast_to(np.asarray(d, float), u.shape)
    return float(np.sum(kl_tilt_vs_prior(prior, u, d, b2_zero)))


def quantile_from_probs(support: np.ndarray, probs: np.ndarray, level: float):
    """Smallest support point whose cumulative mass reaches ``level``."""
    cdf = np.cumsum(probs, axis=-1)
    # Rounding in the cumulative sum must not skip an exact hit.
    idx = np.argmax(cdf >= level - 1e-12, axis=-1)
    return support[idx]


def tilt_quantile(prior: PriorSpec, u, d, level: float, b2_zero: float):
    """Right-continuous inverse CDF of the tilt with mean ``u``."""
    if not 0.0 < level < 1.0:
        raise DomainError(f"quantile level must be in (0, 1), got {level}")
    h = h_inverse(prior, u, d, b2_zero)
    q = tilted_probs(prior, h, d, b2_zero)
    out = quantile_from_probs(prior.support, q, level)
    return float(out) if np.ndim(out) == 0 else out


def tilt_cov(prior: PriorSpec, tilt: TiltParams, f):
    """Exact ``Cov(f(X), X)`` under the tilt.

    ``f`` is either a callable on support points or an array of its values
    on ``prior.support`` (trailing axis, may be batched).
    """
    s = prior.support
    fv = np.asarray(f(s) if callable(f) else f, float)
    q = tilted_probs(prior, *_unpack(tilt))
    m = q @ s
    fbar = np.einsum("...k,...k->...", q, fv)
    cov = np.einsum("...k,...k->...", q, (fv - fbar[..., None]) * (s - m[..., None]))
    return float(cov) if np.ndim(cov) == 0 else cov
