"""Jaakkola-Jordan tangent-bound VI for logistic regression with a Gaussian prior.

The logistic log-normalizer is bounded above by a quadratic in ``theta``
touching at ``+-xi``:

    log(1 + e^t) <= log(1 + e^xi) + (t - xi)/2 + lam(xi) (t^2 - xi^2),
    lam(xi) = (sigmoid(xi) - 1/2) / (2 xi).

Plugging the bound into the likelihood gives a Gaussian-conjugate lower
bound on the evidence; alternating the exact Gaussian posterior of the
surrogate with the optimal ``xi`` is an EM scheme that never decreases it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .errors import DomainError, NumericError, PairingError
from .families import GlmModel, softplus
from .montecarlo import MCConfig, sample_mean_se, standard_normals

_LOG2 = float(np.log(2.0))


def lambda_fn(x):
    """``(sigmoid(x) - 1/2) / (2x)``, with the limit 1/8 at ``x = 0``."""
    x = np.asarray(x, float)
    if np.any(x < 0):
        raise DomainError("lambda_fn is defined for x >= 0")
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    # tanh(x/2)/(4x) = 1/8 - x^2/96 + ...
    out = np.where(small, 0.125 - x * x / 96.0, (expit(xs) - 0.5) / (2.0 * xs))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class JJState:
    u: np.ndarray
    Sigma: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True, eq=False)
class GaussianPrior:
    """``N(u0, Sigma0)`` prior on the coefficient vector."""

    u0: np.ndarray
    Sigma0: np.ndarray

    @classmethod
    def standard(cls, p: int) -> "GaussianPrior":
        return cls(np.zeros(p), np.eye(p))

    def precision(self) -> np.ndarray:
        c = cho_factor(self.Sigma0, lower=True)
        return cho_solve(c, np.eye(self.u0.size))


@dataclass
class JJFit:
    state: JJState
    converged: bool
    iterations: int
    bound: float
    bound_trace: list[float] = field(default_factory=list)


def _require_logistic(model: GlmModel) -> None:
    if model.family.name != "logistic":
        raise PairingError("the Jaakkola-Jordan bound is specific to binary logistic regression")


def _posterior(model: GlmModel, prior: GaussianPrior, xi: np.ndarray):
    X = model.X
    P0 = prior.precision()
    lam = lambda_fn(xi)
    P = P0 + 2.0 * (X.T * lam) @ X
    P = 0.5 * (P + P.T)
    try:
        c = cho_factor(P, lower=True)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"posterior precision is not positive definite: {e}") from e
    rhs = P0 @ prior.u0 + X.T @ (model.y - 0.5)
    u = cho_solve(c, rhs)
    Sigma = cho_solve(c, np.eye(model.p))
    Sigma = 0.5 * (Sigma + Sigma.T)
    logdet_P = 2.0 * np.sum(np.log(np.diag(c[0])))
    return u, Sigma, P, logdet_P, P0


def jj_step(model: GlmModel, state: JJState, prior: GaussianPrior) -> JJState:
    """One sweep: covariance and mean from ``state.xi``, then the new ``xi``."""
    _require_logistic(model)
    u, Sigma, *_ = _posterior(model, prior, state.xi)
    X = model.X
    second = np.einsum("ij,jk,ik->i", X, Sigma, X) + (X @ u) ** 2
    return JJState(u, Sigma, np.sqrt(np.maximum(second, 0.0)))


def jj_bound(model: GlmModel, prior: GaussianPrior, xi) -> float:
    """Closed-form evidence lower bound of the quadratic surrogate at ``xi``.

    Uses the same ``H = sum(y theta - log(1+e^theta) + log 2)`` convention as
    the rest of the package.
    """
    _require_logistic(model)
    xi = np.asarray(xi, float)
    u, _, P, logdet_P, P0 = _posterior(model, prior, xi)
    lam = lambda_fn(xi)
    const = np.sum(-softplus(xi) + xi / 2.0 + lam * xi * xi + _LOG2)
    _, logdet_P0 = np.linalg.slogdet(P0)
    quad = 0.5 * u @ P @ u - 0.5 * prior.u0 @ P0 @ prior.u0
    return float(const + quad + 0.5 * (logdet_P0 - logdet_P))


def fit_jj(
    model: GlmModel,
    prior: GaussianPrior | None = None,
    tol_xi: float = 1e-8,
    max_iter: int = 1000,
    xi0=None,
) -> JJFit:
    """Iterate :func:`jj_step` from ``xi = 1`` until ``max|dxi| < tol_xi``."""
    _require_logistic(model)
    prior = prior or GaussianPrior.standard(model.p)
    xi = np.ones(model.n) if xi0 is None else np.asarray(xi0, float)
    state = JJState(prior.u0.copy(), prior.Sigma0.copy(), xi)
    trace = [jj_bound(model, prior, xi)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = jj_step(model, state, prior)
        trace.append(jj_bound(model, prior, new.xi))
        delta = float(np.max(np.abs(new.xi - state.xi))) if model.n else 0.0
        state = new
        if delta < tol_xi:
            converged = True
            break
    return JJFit(state=state, converged=converged, iterations=it, bound=trace[-1], bound_trace=trace)


def gaussian_kl(u, Sigma, u0, Sigma0) -> float:
    """``KL(N(u, Sigma) || N(u0, Sigma0))``."""
    p = len(u)
    c0 = cho_factor(Sigma0, lower=True)
    diff = np.asarray(u) - np.asarray(u0)
    tr = np.trace(cho_solve(c0, Sigma))
    maha = diff @ cho_solve(c0, diff)
    _, ld = np.linalg.slogdet(Sigma)
    ld0 = 2.0 * np.sum(np.log(np.diag(c0[0])))
    return float(0.5 * (tr + maha - p + ld0 - ld))


def jj_objective_mc(
    model: GlmModel, state: JJState, prior: GaussianPrior, cfg: MCConfig, return_se: bool = False
):
    """``E_{N(u, Sigma)}[H] - KL(N(u, Sigma) || prior)`` with a CRN estimate of ``E[H]``."""
    L = np.linalg.cholesky(state.Sigma)
    z = standard_normals(cfg, model.p, stream="jj-normals")
    theta = (state.u + z @ L.T) @ model.X.T
    H = theta @ model.y - model.family.b(theta).sum(axis=1)
    eh, se = sample_mean_se(H, cfg)
    value = eh - gaussian_kl(state.u, state.Sigma, prior.u0, prior.Sigma0)
    return (value, se) if return_se else value
