import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmfglm import Dataset, GlmModel, ParameterError, linear, logistic
from nmfglm.diagnostics import (
    _trace_A_sq_streaming,
    build_A,
    diagnose,
    entry_tail,
    frob_tail,
    make_block_design,
    make_gaussian_design,
    opnorm,
    subset_gram_opnorm_bound,
    trace_A_sq,
)


def loop_A(family, X, beta):
    n, p = X.shape
    w = family.b2(X @ beta)
    A = np.zeros((p, p))
    for j in range(p):
        for k in range(p):
            if j != k:
                A[j, k] = sum(w[i] * X[i, j] * X[i, k] for i in range(n))
    return A


def opn(M):
    return np.max(np.abs(np.linalg.eigvalsh(M)))


def test_hessian_gram_construction():
    g = np.random.default_rng(0)
    X = g.standard_normal((6, 3))
    beta = g.uniform(-1, 1, 3)
    A = build_A(logistic(), X, beta)
    assert np.all(np.diag(A) == 0)
    assert np.allclose(A, loop_A(logistic(), X, beta), atol=1e-13)
    G = X.T @ X
    assert np.allclose(build_A(linear(), X, beta), G - np.diag(np.diag(G)))


def test_trace_zero_design_and_dual_paths():
    assert trace_A_sq(logistic(), np.zeros((5, 3)), np.zeros(3)) == 0.0
    X = make_block_design(400, 20, seed=2)
    dense = trace_A_sq(logistic(), X, np.zeros(20))
    streamed = _trace_A_sq_streaming(logistic(), X, np.zeros(20), block=3)
    assert streamed == pytest.approx(dense, abs=1e-9)
    assert trace_A_sq(logistic(), X, np.zeros(20), memory_cap=1000) == pytest.approx(dense, abs=1e-9)


def test_power_iteration_hand_values():
    assert opnorm(np.eye(4)).value == pytest.approx(1.0, abs=1e-12)
    v = np.array([1.0, 2.0, -2.0])
    assert opnorm(np.outer(v, v)).value == pytest.approx(9.0, rel=1e-10)


def test_power_iteration_matches_eigensolver():
    g = np.random.default_rng(3)
    for _ in range(5):
        B = g.standard_normal((5, 5))
        M = B + B.T
        res = opnorm(M, tol=1e-12, max_iter=100_000)
        assert res.value == pytest.approx(opn(M), abs=1e-6)


def test_diagonal_part_is_a_contraction():
    g = np.random.default_rng(4)
    for _ in range(20):
        A, B = g.standard_normal((2, 6, 6))
        M1, M2 = A + A.T, B + B.T
        D = np.diag(np.diag(M1) - np.diag(M2))
        assert opn(D) <= opn(M1 - M2) + 1e-10


def test_weight_perturbation_bound():
    g = np.random.default_rng(5)
    for _ in range(10):
        X = g.standard_normal((30, 5))
        eps = 0.1
        d_bar = g.uniform(0, 1, 30)
        d = d_bar + g.uniform(-eps, eps, 30)
        assert opn(X.T @ ((d - d_bar)[:, None] * X)) <= eps * opn(X.T @ X) + 1e-10


def test_hessian_gram_shrinks_with_perturbation():
    g = np.random.default_rng(6)
    X = g.standard_normal((50, 8)) / np.sqrt(50)
    beta = g.uniform(-1, 1, 8)
    dirn = g.standard_normal(8)
    A0 = build_A(logistic(), X, beta)
    diffs = [np.linalg.norm(build_A(logistic(), X, beta + t * dirn) - A0) for t in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert np.all(np.diff(diffs) < 0)


def test_tails_hand_values():
    X = np.tile([0.3, -0.4], (10, 1))  # rows with ||x||^2 = 0.25, p = 2
    assert frob_tail(X, 1.0) == pytest.approx(2 / 2 * 0.25)
    assert frob_tail(X, 100.0) == pytest.approx(np.trace(X.T @ X) / 2)
    assert entry_tail(X, 0.35) == pytest.approx(10 * 0.16)
    assert entry_tail(np.zeros((3, 3)), 0.0) == 0.0


def test_subset_bound():
    X = np.zeros((6, 3))
    X[2] = [1.0, 2.0, 2.0]
    r = subset_gram_opnorm_bound(X, 1.0)
    assert r["upper_bound"] == pytest.approx(9.0) and r["label"] == "UPPER BOUND"
    assert subset_gram_opnorm_bound(np.zeros((4, 2)), 1.0)["upper_bound"] == 0.0
    X = np.random.default_rng(7).standard_normal((40, 5))
    for C in (0.4, 1.0, 3.0):
        r = subset_gram_opnorm_bound(X, C)
        assert r["upper_bound"] >= r["greedy_subset_opnorm"] - 1e-12


def test_block_design_structure():
    X = make_block_design(40, 10, seed=1)
    assert np.all(X[0] == 0.1)
    assert np.all(X[10, :5] == 0.1) and np.all(X[10, 5:] == -0.1)
    assert X[0] @ X[10] == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ParameterError):
        make_block_design(15, 10)
    with pytest.raises(ParameterError):
        make_block_design(40, 9)


def test_block_design_reference_run():
    assert frob_tail(make_block_design(4000, 100, seed=7), 1.0) == pytest.approx(0.03343330319428503, rel=1e-10)


def test_gaussian_design_covariance_and_determinism():
    S = np.array([[1.0, 0.5, 0.0], [0.5, 2.0, 0.3], [0.0, 0.3, 0.5]])
    n = 100_000
    X = make_gaussian_design(n, 3, S, seed=1)
    emp = X.T @ X / n
    assert np.linalg.norm(emp - S / n) <= 0.02 * np.linalg.norm(S / n)
    assert np.array_equal(make_gaussian_design(10, 3, 0.01, seed=4), make_gaussian_design(10, 3, 0.01, seed=4))
    small = make_gaussian_design(200_000, 2, 0.01, seed=2)
    assert np.var(small) * 200_000 == pytest.approx(0.01, rel=0.02)


def test_report_zero_design_and_regression():
    zero = diagnose(GlmModel(logistic(), Dataset(np.zeros((6, 3)), np.zeros(6))), n_random_probes=2)
    d = zero.to_dict()
    assert d["opnorm_xtx"] == 0 and d["trace_A_sq_max_per_p"] == 0 and d["gram_diag_max"] == 0
    assert all(v == 0 for v in d["entry_tail"].values())
    X = make_block_design(40, 10, seed=1)
    r = diagnose(GlmModel(logistic(), Dataset(X, np.zeros(40))), n_random_probes=3).to_dict()
    assert r["opnorm_xtx"] == pytest.approx(1.8738900709231856, rel=1e-8)
    assert r["trace_A_sq"][0] == pytest.approx(0.20026947214118235, rel=1e-10)
    assert r["frob_tail"]["1.0"] == pytest.approx(0.3283354450492548, rel=1e-10)
    assert r["subset_gram_bound"]["1.0"]["upper_bound"] == pytest.approx(3.2833544504925483, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(0.1, 5.0))
def test_opnorm_scaled_identity(seed, scale):
    assert opnorm(scale * np.eye(3), seed=seed).value == pytest.approx(scale, rel=1e-10)
