"""Design-matrix generators and numeric design diagnostics.

The diagnostics are measured scalars for a single matrix (operator norms,
tail sums, off-diagonal Hessian-Gram energy); they say nothing about
asymptotic rates by themselves.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse.linalg import aslinearoperator

from .errors import NumericError, ParameterError
from .families import GlmFamily, GlmModel
from .montecarlo import rng

STREAMING_CAP = 50_000_000


def make_block_design(n: int, p: int, seed: int = 0) -> np.ndarray:
    """Block design with ``p`` rows ``1/p``, ``p`` rows ``(1/p, -1/p)`` halves, rest iid ``N(0, I/n)``."""
    if p < 2 or p % 2:
        raise ParameterError(f"block design needs an even p >= 2, got p = {p}")
    if n < 2 * p:
        raise ParameterError(f"block design needs n >= 2p, got n = {n}, p = {p}")
    X = np.empty((n, p))
    X[:p] = 1.0 / p
    X[p : 2 * p, : p // 2] = 1.0 / p
    X[p : 2 * p, p // 2 :] = -1.0 / p
    X[2 * p :] = rng(seed, "design").standard_normal((n - 2 * p, p)) / np.sqrt(n)
    return X


def make_gaussian_design(n: int, p: int, scale: float | np.ndarray = 1.0, seed: int = 0) -> np.ndarray:
    """Rows iid ``N(0, Sigma_p / n)``.

    ``scale`` is either a scalar ``c`` (``Sigma_p = c I``) or a p x p
    covariance.  ``scale = 0.01`` gives entries iid ``N(0, 0.01/n)``.
    """
    g = rng(seed, "design")
    Z = g.standard_normal((n, p))
    S = np.asarray(scale, float)
    if S.ndim == 0:
        if S < 0:
            raise ParameterError("scale must be non-negative")
        return Z * np.sqrt(S / n)
    if S.shape != (p, p) or not np.allclose(S, S.T):
        raise ParameterError("Sigma_p must be a symmetric p x p matrix")
    w, V = np.linalg.eigh(S)
    if w.min() < -1e-12 * max(1.0, abs(w).max()):
        raise ParameterError("Sigma_p must be positive semi-definite")
    root = V * np.sqrt(np.clip(w, 0, None))
    return Z @ root.T / np.sqrt(n)


def build_A(family: GlmFamily, X: np.ndarray, beta) -> np.ndarray:
    """``X^T D X`` with its diagonal zeroed, ``D = diag(b''(X beta))``."""
    w = family.b2(X @ np.asarray(beta, float))
    A = (X.T * w) @ X
    np.fill_diagonal(A, 0.0)
    return A


def trace_A_sq(family: GlmFamily, X: np.ndarray, beta, memory_cap: int = STREAMING_CAP) -> float:
    """``||A_beta||_F^2``; streams over column blocks when ``n p^2`` exceeds the cap."""
    n, p = X.shape
    if n * p * p <= memory_cap:
        A = build_A(family, X, beta)
        return float(np.sum(A * A))
    return _trace_A_sq_streaming(family, X, beta, block=max(1, memory_cap // (n * p)))


def _trace_A_sq_streaming(family: GlmFamily, X: np.ndarray, beta, block: int) -> float:
    w = family.b2(X @ np.asarray(beta, float))
    WX = X * w[:, None]
    total = 0.0
    p = X.shape[1]
    for start in range(0, p, block):
        stop = min(p, start + block)
        G = WX[:, start:stop].T @ X  # rows start..stop of X^T D X
        G[np.arange(stop - start), np.arange(start, stop)] = 0.0
        total += float(np.sum(G * G))
    return total


@dataclass
class OpNorm:
    value: float
    converged: bool
    iterations: int


def opnorm(M, tol: float = 1e-8, max_iter: int = 1000, seed: int = 0) -> OpNorm:
    """Largest absolute eigenvalue of a symmetric operator by power iteration.

    ``M`` may be a dense array, a sparse matrix or a ``LinearOperator``.
    Stops when ``||M v||`` changes by less than ``tol`` (relative).
    """
    op = aslinearoperator(M)
    v = rng(seed, "power-iteration").standard_normal(op.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = op.matvec(v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return OpNorm(0.0, True, it)
        if abs(nw - lam) <= tol * nw:
            return OpNorm(nw, True, it)
        lam = nw
        v = w / nw
    return OpNorm(lam, False, max_iter)


def opnorm_value(M, **kw) -> float:
    res = opnorm(M, **kw)
    if not res.converged:
        raise NumericError(f"power iteration did not converge; last estimate {res.value}")
    return res.value


def entry_tail(X: np.ndarray, delta: float) -> float:
    """``sum_ij x_ij^2 1(|x_ij| > delta)``."""
    X = np.asarray(X, float)
    return float(np.sum(np.where(np.abs(X) > delta, X * X, 0.0)))


def _top_row_sq_norms(X: np.ndarray, C: float) -> tuple[np.ndarray, int]:
    n, p = X.shape
    m = min(n, int(np.floor(C * p)))
    r = np.einsum("ij,ij->i", X, X)
    order = np.argsort(-r, kind="stable")[:m]
    return order, m


def frob_tail(X: np.ndarray, C: float) -> float:
    """``(1/p) max_{|S| <= Cp} sum_{i in S} ||x_i||^2`` (exact via sorting)."""
    X = np.asarray(X, float)
    order, _ = _top_row_sq_norms(X, C)
    return float(np.einsum("ij,ij->", X[order], X[order]) / X.shape[1])


def subset_gram_opnorm_bound(X: np.ndarray, C: float) -> dict:
    """Upper bound on ``max_{|S| <= Cp} ||sum_{i in S} x_i x_i^T||_op``.

    The bound is the sum of the ``floor(Cp)`` largest squared row norms.  The
    operator norm of the Gram of that greedy subset is reported alongside as
    a lower reference value.
    """
    X = np.asarray(X, float)
    order, _ = _top_row_sq_norms(X, C)
    sub = X[order]
    bound = float(np.einsum("ij,ij->", sub, sub))
    greedy = float(np.linalg.eigvalsh(sub.T @ sub).max()) if sub.size else 0.0
    return {"upper_bound": bound, "greedy_subset_opnorm": greedy, "label": "UPPER BOUND"}


def beta_probes(p: int, n_random: int = 20, seed: int = 0) -> list[np.ndarray]:
    """``0``, the two all-ones corners and uniform draws from ``[-1, 1]^p``."""
    g = rng(seed, "beta-probes")
    return [np.zeros(p), np.ones(p), -np.ones(p)] + [g.uniform(-1, 1, p) for _ in range(n_random)]


@dataclass
class DiagnosticsReport:
    opnorm_xtx: float
    entry_tail: dict
    frob_tail: dict
    subset_gram_bound: dict
    trace_A_sq: list
    trace_A_sq_max_per_p: float
    score_norm: float
    gram_diag_max: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def diagnose(
    model: GlmModel,
    deltas=(0.01, 0.05, 0.1, 0.5),
    Cs=(0.5, 1.0, 2.0),
    n_random_probes: int = 20,
    seed: int = 0,
) -> DiagnosticsReport:
    """Collect the design diagnostics for a model.

    ``score_norm`` is ``||X^T (y - b'(0) 1)||^2 / p``.
    """
    X, fam, p = model.X, model.family, model.p
    gram = X.T @ X
    probes = beta_probes(p, n_random_probes, seed)
    tr = [trace_A_sq(fam, X, b) for b in probes]
    score = X.T @ (model.y - float(fam.b1(0.0)))
    bounds = {str(C): subset_gram_opnorm_bound(X, C) for C in Cs}
    return DiagnosticsReport(
        opnorm_xtx=opnorm_value(gram) if np.any(gram) else 0.0,
        entry_tail={str(d): entry_tail(X, d) for d in deltas},
        frob_tail={str(C): frob_tail(X, C) for C in Cs},
        subset_gram_bound=bounds,
        trace_A_sq=tr,
        trace_A_sq_max_per_p=float(max(tr) / p),
        score_norm=float(score @ score / p),
        gram_diag_max=float(np.max(np.diag(gram))),
    )
