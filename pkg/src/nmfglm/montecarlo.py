"""Seeded, counter-based random streams and Monte Carlo configuration.

Every stream is a Philox generator keyed by ``(seed, stream_id)``, so a
draw depends only on the seed, the stream name and its position.  Reusing
a stream gives common random numbers across function evaluations.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class MCConfig:
    """Sample size, seed and antithetic pairing for Monte Carlo estimates."""

    n_samples: int = 2000
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if int(self.n_samples) < 2:
            raise ParameterError("n_samples must be at least 2")
        if self.antithetic and int(self.n_samples) % 2:
            raise ParameterError("antithetic sampling needs an even n_samples")

    def replace(self, **kw) -> "MCConfig":
        d = {"n_samples": self.n_samples, "seed": self.seed, "antithetic": self.antithetic}
        d.update(kw)
        return MCConfig(**d)


def stream_id(name: str | int) -> int:
    if isinstance(name, int):
        return name & _MASK64
    return zlib.crc32(name.encode())


def rng(seed: int, stream: str | int = 0) -> np.random.Generator:
    """Generator for the named sub-stream of ``seed``."""
    return np.random.Generator(np.random.Philox(key=np.array([int(seed) & _MASK64, stream_id(stream)], dtype=np.uint64)))


def standard_normals(cfg: MCConfig, dim: int, stream: str | int = "normals") -> np.ndarray:
    """(n_samples, dim) standard normals; antithetic halves are ``z, -z``."""
    g = rng(cfg.seed, stream)
    if cfg.antithetic:
        z = g.standard_normal((cfg.n_samples // 2, dim))
        return np.concatenate([z, -z], axis=0)
    return g.standard_normal((cfg.n_samples, dim))


def sample_mean_se(values: np.ndarray, cfg: MCConfig) -> tuple[float, float]:
    """Mean and standard error of per-sample values.

    Antithetic pairs are averaged first so the standard error reflects the
    pair correlation.
    """
    v = np.asarray(values, float)
    if cfg.antithetic:
        half = v.shape[0] // 2
        v = 0.5 * (v[:half] + v[half:])
    mean = float(v.mean())
    se = float(v.std(ddof=1) / np.sqrt(v.shape[0])) if v.shape[0] > 1 else 0.0
    return mean, se
