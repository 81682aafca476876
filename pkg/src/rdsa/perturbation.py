"""
Random perturbation directions and their exact moments.

Four coordinate distributions are supported, all with zero mean:

    uniform        U[-eta, eta]
    asymbernoulli  {-1 w.p. (1+eps)/(2+eps), 1+eps w.p. 1/(2+eps)}
    symbernoulli   {-1, +1} with equal probability (SPSA)
    gaussian       N(0, 1)

Random streams are Philox generators keyed by ``(seed, stream index)`` so each
replication of an experiment owns an independent, reproducible sequence.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ConfigError

__all__ = [
    "Kind",
    "PerturbationDist",
    "make_stream",
    "moments",
    "replication_streams",
    "sample_direction",
]


class Kind(str, enum.Enum):
    UNIFORM = "uniform"
    ASYM_BERNOULLI = "asymbernoulli"
    SYM_BERNOULLI = "symbernoulli"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class PerturbationDist:
    """A zero-mean i.i.d. coordinate distribution for direction vectors.

    ``param`` is the half-width ``eta`` for the uniform kind and the asymmetry
    ``eps`` for the asymmetric Bernoulli kind; it is ignored otherwise.
    """

    kind: Kind
    param: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind in (Kind.UNIFORM, Kind.ASYM_BERNOULLI):
            p = float(self.param)
            if not np.isfinite(p) or p <= 0:
                name = "eta" if self.kind is Kind.UNIFORM else "epsilon"
                raise ConfigError(f"{name} must be positive and finite, got {self.param!r}")
            object.__setattr__(self, "param", p)

    @classmethod
    def uniform(cls, eta: float = 1.0) -> "PerturbationDist":
        return cls(Kind.UNIFORM, eta)

    @classmethod
    def asym_bernoulli(cls, epsilon: float) -> "PerturbationDist":
        return cls(Kind.ASYM_BERNOULLI, epsilon)

    @classmethod
    def sym_bernoulli(cls) -> "PerturbationDist":
        return cls(Kind.SYM_BERNOULLI)

    @classmethod
    def gaussian(cls) -> "PerturbationDist":
        return cls(Kind.GAUSSIAN)

    @property
    def eta(self) -> float:
        if self.kind is not Kind.UNIFORM:
            raise AttributeError("eta is only defined for the uniform kind")
        return self.param

    @property
    def epsilon(self) -> float:
        if self.kind is not Kind.ASYM_BERNOULLI:
            raise AttributeError("epsilon is only defined for the asymmetric Bernoulli kind")
        return self.param

    def support(self) -> Tuple[float, float]:
        """Return the closed interval (or the two atoms) the draws live in."""
        if self.kind is Kind.UNIFORM:
            return (-self.param, self.param)
        if self.kind is Kind.ASYM_BERNOULLI:
            return (-1.0, 1.0 + self.param)
        if self.kind is Kind.SYM_BERNOULLI:
            return (-1.0, 1.0)
        return (-np.inf, np.inf)


def moments(dist: PerturbationDist) -> Tuple[float, float]:
    """Exact second and fourth moments ``(E d^2, E d^4)`` of one coordinate."""
    if dist.kind is Kind.UNIFORM:
        eta = dist.param
        return eta**2 / 3.0, eta**4 / 5.0
    if dist.kind is Kind.ASYM_BERNOULLI:
        e = dist.param
        return 1.0 + e, (1.0 + e) * (1.0 + (1.0 + e) ** 3) / (2.0 + e)
    if dist.kind is Kind.SYM_BERNOULLI:
        return 1.0, 1.0
    return 1.0, 3.0


def make_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent Philox generator for replication ``index`` under ``seed``."""
    if seed < 0 or index < 0:
        raise ConfigError("seed and stream index must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def replication_streams(seed: int, index: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Two independent Philox generators (directions, measurement noise) for one replication.

    Keeping the streams apart means turning the noise off or changing its
    level never alters the sequence of perturbation directions.
    """
    if seed < 0 or index < 0:
        raise ConfigError("seed and stream index must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return tuple(np.random.Generator(np.random.Philox(child)) for child in ss.spawn(2))


def sample_direction(
    dist: PerturbationDist,
    dim: int,
    rng: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Draw a direction vector with i.i.d. coordinates from ``dist``.

    Parameters
    ----------
    dist : PerturbationDist
    dim : int
        Number of coordinates, at least 1.
    rng : numpy.random.Generator
    size : int, optional
        When given, draw ``size`` independent vectors stacked as rows.

    Returns
    -------
    numpy.ndarray
        Shape ``(dim,)`` or ``(size, dim)``.
    """
    if dim < 1:
        raise ConfigError(f"dim must be at least 1, got {dim}")
    shape = (dim,) if size is None else (size, dim)
    if dist.kind is Kind.UNIFORM:
        return rng.uniform(-dist.param, dist.param, shape)
    if dist.kind is Kind.ASYM_BERNOULLI:
        e = dist.param
        u = rng.random(shape)
        return np.where(u < 1.0 / (2.0 + e), 1.0 + e, -1.0)
    if dist.kind is Kind.SYM_BERNOULLI:
        return 2.0 * rng.integers(0, 2, shape) - 1.0
    return rng.standard_normal(shape)
