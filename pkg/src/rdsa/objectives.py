"""Benchmark objectives and the counted noisy measurement oracle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError

__all__ = [
    "NoisyOracle",
    "Objective",
    "fourth_order_objective",
    "quadratic_objective",
    "triangular_matrix",
]


@dataclass(frozen=True)
class Objective:
    """A deterministic function of ``dim`` variables.

    ``func`` may accept a single point of shape ``(dim,)`` or a batch of shape
    ``(..., dim)``; the built-in objectives do both. ``gradient`` and
    ``hessian`` are optional analytic derivatives used by tests and by the
    theory module.
    """

    name: str
    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    x_star: Optional[np.ndarray] = None
    f_star: Optional[float] = None
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def eval(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a point of shape ({self.dim},), got {x.shape}")
        return float(self.func(x))


def triangular_matrix(n: int) -> np.ndarray:
    """Upper triangular matrix of ones scaled by ``1/n``."""
    if n < 1:
        raise ConfigError(f"dimension must be at least 1, got {n}")
    return np.triu(np.ones((n, n))) / n


def quadratic_objective(n: int) -> Objective:
    """``f(x) = x'Ax + b'x`` with ``A`` from :func:`triangular_matrix` and ``b = 1``."""
    A = triangular_matrix(n)
    b = np.ones(n)
    H = A + A.T

    def func(x):
        return np.einsum("...i,ij,...j->...", x, A, x) + x @ b

    x_star = np.linalg.solve(H, -b)
    return Objective(
        name="quadratic",
        dim=n,
        func=func,
        x_star=x_star,
        f_star=float(func(x_star)),
        gradient=lambda x: np.asarray(x, dtype=float) @ H.T + b,
        hessian=lambda x: H.copy(),
    )


def fourth_order_objective(n: int) -> Objective:
    """``f(x) = |Ax|^2 + 0.1 sum (Ax)_j^3 + 0.01 sum (Ax)_j^4``, minimised at 0."""
    A = triangular_matrix(n)

    def func(x):
        v = x @ A.T
        return np.sum(v**2 + 0.1 * v**3 + 0.01 * v**4, axis=-1)

    def gradient(x):
        v = np.asarray(x, dtype=float) @ A.T
        return (2.0 * v + 0.3 * v**2 + 0.04 * v**3) @ A

    def hessian(x):
        v = A @ np.asarray(x, dtype=float)
        return A.T @ np.diag(2.0 + 0.6 * v + 0.12 * v**2) @ A

    return Objective(
        name="fourth_order",
        dim=n,
        func=func,
        x_star=np.zeros(n),
        f_star=0.0,
        gradient=gradient,
        hessian=hessian,
    )


class NoisyOracle:
    """Noisy, counted access to an objective.

    Each call returns ``f(x) + [x, 1] . z`` with ``z ~ N(0, sigma^2 I)`` of
    size ``dim + 1`` drawn fresh from ``rng``, and bumps ``count`` by one.
    Not thread-safe; use one oracle per replication.
    """

    def __init__(self, objective: Objective, sigma: float = 0.0, rng: np.random.Generator | None = None):
        if sigma < 0 or not np.isfinite(sigma):
            raise ConfigError(f"sigma must be non-negative, got {sigma!r}")
        if sigma > 0 and rng is None:
            raise ConfigError("a random stream is required when sigma > 0")
        self.objective = objective
        self.sigma = float(sigma)
        self.rng = rng
        self.count = 0

    @property
    def dim(self) -> int:
        return self.objective.dim

    def measure(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a point of shape ({self.dim},), got {x.shape}")
        self.count += 1
        y = float(self.objective.func(x))
        if self.sigma > 0:
            z = self.rng.standard_normal(self.dim + 1)
            y += self.sigma * (x @ z[:-1] + z[-1])
        return y

    __call__ = measure

    def measure_batch(self, X) -> np.ndarray:
        """Measure every row of ``X`` (shape ``(m, dim)``); counts ``m`` calls."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected points of shape (m, {self.dim}), got {X.shape}")
        try:
            y = np.asarray(self.objective.func(X), dtype=float)
            if y.shape != (X.shape[0],):
                raise ValueError
        except (ValueError, TypeError):
            y = np.array([float(self.objective.func(row)) for row in X])
        self.count += X.shape[0]
        if self.sigma > 0:
            z = self.rng.standard_normal((X.shape[0], self.dim + 1))
            y = y + self.sigma * (np.einsum("ij,ij->i", X, z[:, :-1]) + z[:, -1])
        return y
