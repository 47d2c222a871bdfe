import numpy as np
import pytest

from nmfglm import Dataset, GlmModel, linear, logistic, simulate_response, three_point_prior
from nmfglm.montecarlo import rng


def small_model(n=20, p=3, family=None, seed=0, scale=1.0, prior=None):
    """Well-specified instance with an iid N(0, scale/n) design."""
    family = family or logistic()
    prior = prior or three_point_prior()
    g = np.random.default_rng(seed)
    X = g.standard_normal((n, p)) * np.sqrt(scale / n)
    y, beta = simulate_response(family, X, prior, rng(seed, "test-response"))
    return GlmModel(family, Dataset(X, y), prior)


def zero_model(n=5, p=3, family=None, prior=None):
    family = family or logistic()
    y = np.zeros(n) if family.name != "linear" else np.linspace(-1, 1, n)
    return GlmModel(family, Dataset(np.zeros((n, p)), y), prior or three_point_prior())


@pytest.fixture
def tiny_logistic():
    return small_model(n=30, p=2, seed=1)


@pytest.fixture
def tiny_linear():
    return small_model(n=30, p=2, family=linear(), seed=2)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
