import numpy as np
import pytest

from nmfglm import MCConfig, ParameterError
from nmfglm.montecarlo import rng, sample_mean_se, standard_normals


def test_streams_are_reproducible_and_distinct():
    a = rng(5, "x").random(4)
    assert np.array_equal(a, rng(5, "x").random(4))
    assert not np.array_equal(a, rng(5, "y").random(4))
    assert not np.array_equal(a, rng(6, "x").random(4))


def test_large_seeds_accepted():
    rng(2**64 - 1, "s").random()


def test_config_validation():
    with pytest.raises(ParameterError):
        MCConfig(n_samples=1)
    with pytest.raises(ParameterError):
        MCConfig(n_samples=3, antithetic=True)
    assert MCConfig(10).replace(seed=3).seed == 3


def test_antithetic_draws_are_mirrored():
    z = standard_normals(MCConfig(8, 1, antithetic=True), 3)
    assert np.array_equal(z[1::2], -z[::2]) or np.array_equal(z[4:], -z[:4])


def test_standard_error_plain():
    v = np.arange(10.0)
    m, se = sample_mean_se(v, MCConfig(10))
    assert m == pytest.approx(4.5)
    assert se == pytest.approx(np.std(v, ddof=1) / np.sqrt(10))
