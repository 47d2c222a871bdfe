"""Canonical GLM families, datasets, priors and the log-likelihood surface.

A canonical GLM has per-observation density proportional to
``exp(y * theta - b(theta))`` with ``theta = <x, beta>``.  Throughout the
package the Hamiltonian is the log-likelihood,

    H(beta) = sum_i (y_i * theta_i - b(theta_i)),

and every ELBO is ``E_Q[H] - KL(Q || prior)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import expit

from .errors import DomainError, NumericError, ShapeError, UnsupportedPriorError

_LOG2 = float(np.log(2.0))


def softplus(t):
    """``log(1 + exp(t))`` without overflow."""
    t = np.asarray(t, dtype=float)
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


@dataclass(frozen=True)
class GlmFamily:
    """Exponential-family nonlinearity ``b`` and its derivatives.

    Use :func:`linear`, :func:`logistic` or :func:`binomial` to build one.
    ``trials`` is only meaningful for the binomial family (logistic is the
    ``trials == 1`` case).
    """

    name: Literal["linear", "logistic", "binomial"]
    trials: int = 1

    def b(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.name == "linear":
            return 0.5 * theta * theta
        # softplus(0) == log 2 exactly in floating point, so b(0) == 0.
        return self.trials * (softplus(theta) - _LOG2)

    def b1(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.name == "linear":
            return theta.copy()
        return self.trials * expit(theta)

    def b2(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.name == "linear":
            return np.ones_like(theta)
        s = expit(theta)
        return self.trials * s * (1.0 - s)

    @property
    def b2_at_zero(self) -> float:
        return 1.0 if self.name == "linear" else self.trials / 4.0

    @property
    def b2_sup(self) -> float:
        return 1.0 if self.name == "linear" else self.trials / 4.0

    @property
    def domain(self) -> str:
        if self.name == "linear":
            return "real"
        return "binary" if self.trials == 1 and self.name == "logistic" else f"0..{self.trials}"

    def in_domain(self, y) -> np.ndarray:
        """Elementwise membership of ``y`` in the response domain."""
        y = np.asarray(y, dtype=float)
        if self.name == "linear":
            return np.isfinite(y)
        return np.isfinite(y) & (y == np.round(y)) & (y >= 0) & (y <= self.trials)

    def sample(self, theta, rng: np.random.Generator) -> np.ndarray:
        """Draw responses at natural parameters ``theta``."""
        theta = np.asarray(theta, dtype=float)
        if self.name == "linear":
            return theta + rng.standard_normal(theta.shape)
        return rng.binomial(self.trials, expit(theta)).astype(float)

    def to_dict(self) -> dict:
        if self.name == "binomial":
            return {"name": "binomial", "trials": self.trials}
        return {"name": self.name}


def linear() -> GlmFamily:
    """Gaussian linear regression, ``b(t) = t**2 / 2``."""
    return GlmFamily("linear")


def logistic() -> GlmFamily:
    """Binary logistic regression, ``b(t) = log(1 + e^t) - log 2``."""
    return GlmFamily("logistic", 1)


def binomial(trials: int) -> GlmFamily:
    """Binomial logistic regression with ``trials`` trials."""
    if int(trials) < 1:
        raise DomainError(f"binomial trials must be >= 1, got {trials}")
    return GlmFamily("binomial", int(trials))


def family_from_dict(spec: dict | str) -> GlmFamily:
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name")
    if name == "linear":
        return linear()
    if name == "logistic":
        return logistic()
    if name == "binomial":
        return binomial(spec.get("trials", 1))
    raise DomainError(f"unknown family {name!r}")


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Coordinate prior: a discrete law on ``[-1, 1]`` or the standard normal."""

    kind: Literal["discrete", "standard_gaussian"]
    support: np.ndarray | None = None
    probs: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "standard_gaussian":
            return
        if self.kind != "discrete":
            raise DomainError(f"unknown prior kind {self.kind!r}")
        s = np.asarray(self.support, dtype=float).ravel()
        q = np.asarray(self.probs, dtype=float).ravel()
        if s.shape != q.shape or s.size < 1:
            raise ShapeError("support and probs must be non-empty and of equal length")
        if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-12:
            raise DomainError("prior probs must be a probability vector (sum within 1e-12)")
        if np.any(np.abs(s) > 1.0) or np.unique(s).size != s.size:
            raise DomainError("support points must be distinct and lie in [-1, 1]")
        order = np.argsort(s)
        object.__setattr__(self, "support", s[order])
        object.__setattr__(self, "probs", q[order])
        self.support.setflags(write=False)
        self.probs.setflags(write=False)

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    @property
    def mean(self) -> float:
        if not self.is_discrete:
            return 0.0
        return float(self.probs @ self.support)

    @property
    def log_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probs)

    def require_discrete(self) -> None:
        if not self.is_discrete:
            raise UnsupportedPriorError(f"operation requires a discrete prior, got {self.kind}")

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        if self.is_discrete:
            return rng.choice(self.support, size=size, p=self.probs)
        return rng.standard_normal(size)

    def to_dict(self) -> dict:
        if self.is_discrete:
            return {"kind": "discrete", "support": self.support.tolist(), "probs": self.probs.tolist()}
        return {"kind": "standard_gaussian"}


def discrete_prior(support, probs) -> PriorSpec:
    return PriorSpec("discrete", np.asarray(support, float), np.asarray(probs, float))


def standard_gaussian_prior() -> PriorSpec:
    return PriorSpec("standard_gaussian")


def three_point_prior(mass_at_zero: float = 0.6) -> PriorSpec:
    """Symmetric prior on ``{-1, 0, 1}`` with the given mass at zero."""
    side = (1.0 - mass_at_zero) / 2.0
    return discrete_prior([-1.0, 0.0, 1.0], [side, mass_at_zero, side])


def prior_from_dict(spec: dict) -> PriorSpec:
    kind = spec.get("kind")
    if kind == "discrete":
        return discrete_prior(spec["support"], spec["probs"])
    if kind == "standard_gaussian":
        return standard_gaussian_prior()
    raise DomainError(f"unknown prior kind {kind!r}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix ``X`` (n x p) and response vector ``y`` (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ShapeError(f"X must be a non-empty 2-D array, got shape {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise ShapeError(f"y has {y.shape[0]} entries but X has {X.shape[0]} rows")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True, eq=False)
class GlmModel:
    """A family, a dataset and a product prior: everything a solver needs."""

    family: GlmFamily
    data: Dataset
    prior: PriorSpec = field(default_factory=three_point_prior)

    @property
    def X(self) -> np.ndarray:
        return self.data.X

    @property
    def y(self) -> np.ndarray:
        return self.data.y

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def p(self) -> int:
        return self.data.p

    @property
    def xty(self) -> np.ndarray:
        """``X^T y``, the linear part of the Hamiltonian."""
        return self.data.X.T @ self.data.y

    @property
    def gram_diag(self) -> np.ndarray:
        """``d_j = (X^T X)_{jj}``."""
        return np.einsum("ij,ij->j", self.data.X, self.data.X)


def validate(data: Dataset, family: GlmFamily) -> None:
    """Check finiteness and response-domain membership.

    Raises
    ------
    DomainError
        With ``index`` set to the first offending row.
    """
    if not np.all(np.isfinite(data.X)):
        row = int(np.argwhere(~np.isfinite(data.X))[0, 0])
        raise DomainError(f"non-finite entry in X at row {row}", index=row)
    ok = family.in_domain(data.y)
    if not np.all(ok):
        row = int(np.flatnonzero(~ok)[0])
        raise DomainError(
            f"y[{row}] = {data.y[row]!r} is outside the {family.domain} response domain", index=row
        )


def _theta(data: Dataset, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape[-1] != data.p:
        raise ShapeError(f"beta has length {beta.shape[-1]}, expected p = {data.p}")
    if not np.all(np.isfinite(beta)):
        raise NumericError("beta contains non-finite entries")
    return beta @ data.X.T


def hamiltonian(family: GlmFamily, data: Dataset, beta) -> float | np.ndarray:
    """Log-likelihood ``sum_i (y_i theta_i - b(theta_i))`` at ``theta = X beta``.

    ``beta`` may carry leading batch dimensions; the result then has those
    dimensions.
    """
    theta = _theta(data, beta)
    val = theta @ data.y - family.b(theta).sum(axis=-1)
    if not np.all(np.isfinite(val)):
        raise NumericError("Hamiltonian evaluated to a non-finite value")
    return float(val) if np.ndim(val) == 0 else val


def hamiltonian_grad(family: GlmFamily, data: Dataset, beta) -> np.ndarray:
    """Gradient ``X^T (y - b'(X beta))``."""
    theta = _theta(data, beta)
    g = (data.y - family.b1(theta)) @ data.X
    if not np.all(np.isfinite(g)):
        raise NumericError("Hamiltonian gradient is non-finite")
    return g


def simulate_response(
    family: GlmFamily, X: np.ndarray, prior: PriorSpec, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Well-specified simulation: ``beta* ~ prior``, ``y ~ family(X beta*)``."""
    beta_star = prior.sample(X.shape[1], rng)
    y = family.sample(X @ beta_star, rng)
    return y, beta_star
