"""
First-order (gradient) and second-order (Newton) stochastic approximation loops.

First order::

    x <- box(x - a_n g_n)

Second order, after a first-order warm start::

    H_bar_n = n/(n+1) H_bar_{n-1} + 1/(n+1) H_hat_n,    H_bar_0 = I
    x <- box(x - a_n solve(project_pd(H_bar_n, c delta_n), g_n))

The positive-definite projection keeps the eigenvectors of ``H_bar_n`` and
bounds its eigenvalues below by ``c delta_n``. By default (``pd_rule="clip"``,
``c = 0.15``) eigenvalues under the floor are raised to it and the rest are
kept; ``pd_rule="shift", pd_floor_scale=1`` instead clips negatives to zero
and adds ``delta_n`` to the whole spectrum.

with step sizes ``a_n = a0 / (n + A)^alpha`` and perturbation sizes
``delta_n = delta0 / n^gamma``, ``n = 1, 2, ...``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

from . import estimators as est
from .errors import ConfigError, NumericalError
from .linalg import PD_RULES, project_pd, smooth_hessian, solve_pd
from .objectives import NoisyOracle
from .perturbation import Kind, PerturbationDist, sample_direction

__all__ = [
    "Algorithm",
    "AlgorithmConfig",
    "DEFAULT_BOX",
    "DEFAULT_PD_FLOOR_SCALE",
    "DEFAULT_PD_RULE",
    "FIRST_ORDER_SCHEDULE",
    "IterateState",
    "SECOND_ORDER_SCHEDULE",
    "Schedule",
    "optimize",
    "project_box",
    "run_first_order",
    "run_second_order",
]

logger = logging.getLogger(__name__)

DEFAULT_BOX = (-2.048, 2.047)
DEFAULT_PD_RULE = "clip"
DEFAULT_PD_FLOOR_SCALE = 0.15


class Algorithm(str, enum.Enum):
    SPSA1 = "1SPSA"
    RDSA1_UNIF = "1RDSA-Unif"
    RDSA1_ASYMBER = "1RDSA-AsymBer"
    RDSA1_GAUSS = "1RDSA-Gauss"
    SPSA2 = "2SPSA"
    RDSA2_UNIF = "2RDSA-Unif"
    RDSA2_ASYMBER = "2RDSA-AsymBer"

    @classmethod
    def parse(cls, name) -> "Algorithm":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        for alg in cls:
            if alg.value.lower() == key:
                return alg
        known = ", ".join(a.value for a in cls)
        raise ConfigError(f"unknown algorithm {name!r} (known: {known})")

    @property
    def order(self) -> int:
        return int(self.value[0])

    @property
    def measurements_per_iteration(self) -> int:
        if self is Algorithm.SPSA2:
            return 4
        return 2 if self.order == 1 else 3

    @property
    def kind(self) -> Kind:
        if self in (Algorithm.SPSA1, Algorithm.SPSA2):
            return Kind.SYM_BERNOULLI
        if self in (Algorithm.RDSA1_UNIF, Algorithm.RDSA2_UNIF):
            return Kind.UNIFORM
        if self in (Algorithm.RDSA1_ASYMBER, Algorithm.RDSA2_ASYMBER):
            return Kind.ASYM_BERNOULLI
        return Kind.GAUSSIAN

    @property
    def warm_start(self) -> "Algorithm":
        """First-order method that initialises this one (itself for first order)."""
        return {
            Algorithm.SPSA2: Algorithm.SPSA1,
            Algorithm.RDSA2_UNIF: Algorithm.RDSA1_UNIF,
            Algorithm.RDSA2_ASYMBER: Algorithm.RDSA1_ASYMBER,
        }.get(self, self)


@dataclass(frozen=True)
class Schedule:
    a0: float
    A: float
    alpha: float
    delta0: float
    gamma: float

    def __post_init__(self):
        if self.a0 < 0:
            raise ConfigError(f"a0 must be non-negative, got {self.a0}")
        if self.A < 0:
            raise ConfigError(f"A must be non-negative, got {self.A}")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.delta0 <= 0:
            raise ConfigError(f"delta0 must be positive, got {self.delta0}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be non-negative, got {self.gamma}")

    def step(self, n: int) -> float:
        return self.a0 / (n + self.A) ** self.alpha

    def perturbation(self, n: int) -> float:
        return self.delta0 / n**self.gamma


FIRST_ORDER_SCHEDULE = Schedule(a0=1.0, A=50.0, alpha=1.0, delta0=1.9, gamma=0.101)
SECOND_ORDER_SCHEDULE = Schedule(a0=1.0, A=0.0, alpha=0.6, delta0=3.8, gamma=0.101)


@dataclass
class AlgorithmConfig:
    """Everything needed to run one optimizer replication.

    ``schedule`` defaults to the first- or second-order constants by algorithm
    order; ``warm_schedule`` drives the first-order warm start of second-order
    methods. ``epsilon`` defaults to 1e-4 for first-order and 1 for
    second-order asymmetric Bernoulli variants. ``box=None`` disables the
    iterate projection. ``pd_rule`` and ``pd_floor_scale`` select the
    positive-definite projection of the smoothed Hessian (see
    :func:`rdsa.linalg.project_pd`); the floor at iteration ``n`` is
    ``pd_floor_scale * delta_n``.
    """

    algorithm: Algorithm
    x0: np.ndarray
    budget: int
    schedule: Optional[Schedule] = None
    warm_schedule: Schedule = FIRST_ORDER_SCHEDULE
    eta: float = 1.0
    epsilon: Optional[float] = None
    box: Optional[Tuple[float, float]] = DEFAULT_BOX
    warm_start_fraction: float = 0.2
    iterate_averaging: bool = False
    pd_rule: str = DEFAULT_PD_RULE
    pd_floor_scale: float = DEFAULT_PD_FLOOR_SCALE

    def __post_init__(self):
        self.algorithm = Algorithm.parse(self.algorithm)
        self.x0 = np.array(self.x0, dtype=float)
        if self.x0.ndim != 1 or self.x0.size == 0:
            raise ConfigError("x0 must be a non-empty vector")
        if self.schedule is None:
            self.schedule = FIRST_ORDER_SCHEDULE if self.algorithm.order == 1 else SECOND_ORDER_SCHEDULE
        if self.epsilon is None:
            self.epsilon = 1e-4 if self.algorithm.order == 1 else 1.0
        if self.box is not None:
            lo, hi = self.box
            if not lo < hi:
                raise ConfigError(f"box must satisfy lo < hi, got {self.box}")
            self.box = (float(lo), float(hi))
        if not 0 <= self.warm_start_fraction < 1:
            raise ConfigError(f"warm_start_fraction must lie in [0, 1), got {self.warm_start_fraction}")
        if self.pd_rule not in PD_RULES:
            raise ConfigError(f"pd_rule must be one of {PD_RULES}, got {self.pd_rule!r}")
        if not (np.isfinite(self.pd_floor_scale) and self.pd_floor_scale > 0):
            raise ConfigError(f"pd_floor_scale must be positive, got {self.pd_floor_scale!r}")
        self.distribution()  # validates eta / epsilon
        self.iteration_plan()  # validates the budget

    def distribution(self) -> PerturbationDist:
        kind = self.algorithm.kind
        if kind is Kind.UNIFORM:
            return PerturbationDist.uniform(self.eta)
        if kind is Kind.ASYM_BERNOULLI:
            return PerturbationDist.asym_bernoulli(self.epsilon)
        return PerturbationDist(kind)

    def iteration_plan(self) -> Tuple[int, int]:
        """Return ``(warm-start iterations, main iterations)`` for the budget."""
        per_iter = self.algorithm.measurements_per_iteration
        budget = int(self.budget)
        if self.algorithm.order == 1:
            if budget < 2:
                raise ConfigError(f"budget must be at least 2 for {self.algorithm.value}, got {budget}")
            return 0, budget // 2
        warm = int(self.warm_start_fraction * budget) // 2
        n_end = (budget - 2 * warm) // per_iter
        if n_end < 1:
            raise ConfigError(
                f"budget {budget} leaves no {self.algorithm.value} iteration after the warm start"
            )
        return warm, n_end

    def expected_measurements(self) -> int:
        warm, n_end = self.iteration_plan()
        return 2 * warm + self.algorithm.measurements_per_iteration * n_end


@dataclass
class IterateState:
    x: np.ndarray
    n: int = 0
    measurements_spent: int = 0
    H_bar: Optional[np.ndarray] = None
    x_sum: Optional[np.ndarray] = None
    n_averaged: int = 0
    warm_start_measurements: int = 0
    fallbacks: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def x_avg(self) -> Optional[np.ndarray]:
        if self.x_sum is None or self.n_averaged == 0:
            return None
        return self.x_sum / self.n_averaged

    @property
    def x_final(self) -> np.ndarray:
        """The reported iterate: the running average when averaging is on."""
        avg = self.x_avg
        return self.x if avg is None else avg


def project_box(x, box) -> np.ndarray:
    """Clamp every coordinate of ``x`` to ``[lo, hi]``; ``box=None`` is a no-op."""
    x = np.asarray(x, dtype=float)
    if box is None:
        return x.copy()
    lo, hi = box
    if not lo < hi:
        raise ConfigError(f"box must satisfy lo < hi, got {box}")
    return np.clip(x, lo, hi)


Callback = Callable[[int, np.ndarray], None]


def _gradient_step(alg, dist, x, delta, oracle, rng):
    dim = x.size
    if alg.kind is Kind.SYM_BERNOULLI:
        D = sample_direction(dist, dim, rng)
        y_plus = oracle.measure(x + delta * D)
        y_minus = oracle.measure(x - delta * D)
        return est.grad_spsa(y_plus, y_minus, D, delta).g
    d = sample_direction(dist, dim, rng)
    y_plus = oracle.measure(x + delta * d)
    y_minus = oracle.measure(x - delta * d)
    return est.grad_rdsa(y_plus, y_minus, d, delta, dist).g


def _record(state, x, averaging, callback):
    state.x = x
    if averaging:
        state.x_sum = x.copy() if state.x_sum is None else state.x_sum + x
        state.n_averaged += 1
    if callback is not None:
        callback(state.n, x)


def _first_order_loop(state, alg, dist, schedule, n_iters, oracle, rng, box, averaging, callback):
    x = state.x
    for n in range(1, n_iters + 1):
        g = _gradient_step(alg, dist, x, schedule.perturbation(n), oracle, rng)
        x = project_box(x - schedule.step(n) * g, box)
        state.n = n
        state.measurements_spent += 2
        _record(state, x, averaging, callback)
    return state


def run_first_order(
    config: AlgorithmConfig,
    oracle: NoisyOracle,
    rng: np.random.Generator,
    callback: Optional[Callback] = None,
) -> IterateState:
    """Run a first-order method for ``budget // 2`` iterations.

    ``rng`` supplies the perturbation directions; measurement noise comes from
    the oracle's own stream.
    """
    alg = config.algorithm
    if alg.order != 1:
        raise ConfigError(f"{alg.value} is not a first-order algorithm")
    if oracle.dim != config.x0.size:
        raise ConfigError(f"x0 has {config.x0.size} coordinates but the objective has {oracle.dim}")
    _, n_end = config.iteration_plan()
    state = IterateState(x=project_box(config.x0, config.box))
    return _first_order_loop(
        state, alg, config.distribution(), config.schedule, n_end, oracle, rng,
        config.box, config.iterate_averaging, callback,
    )


def _newton_step(alg, dist, x, delta, oracle, rng):
    """Return ``(gradient estimate, Hessian estimate)`` for one Newton iteration."""
    dim = x.size
    if alg is Algorithm.SPSA2:
        D = sample_direction(dist, dim, rng)
        Dt = sample_direction(dist, dim, rng)
        y_plus = oracle.measure(x + delta * D)
        y_minus = oracle.measure(x - delta * D)
        y_plus_t = oracle.measure(x + delta * D + delta * Dt)
        y_minus_t = oracle.measure(x - delta * D + delta * Dt)
        g, H = est.hess_2spsa(y_plus, y_minus, y_plus_t, y_minus_t, D, Dt, delta, delta)
        return g.g, H.H
    d = sample_direction(dist, dim, rng)
    y_plus = oracle.measure(x + delta * d)
    y_minus = oracle.measure(x - delta * d)
    y_center = oracle.measure(x)
    g = est.grad_rdsa(y_plus, y_minus, d, delta, dist).g
    H = est.hess_rdsa(y_plus, y_minus, y_center, d, delta, dist).H
    return g, H


def run_second_order(
    config: AlgorithmConfig,
    oracle: NoisyOracle,
    rng: np.random.Generator,
    callback: Optional[Callback] = None,
) -> IterateState:
    """Warm-start with the matching first-order method, then run the Newton loop.

    Only the iterate is handed over from the warm start; the iteration counter
    restarts at 1 and the smoothed Hessian starts from the identity.
    """
    alg = config.algorithm
    if alg.order != 2:
        raise ConfigError(f"{alg.value} is not a second-order algorithm")
    if oracle.dim != config.x0.size:
        raise ConfigError(f"x0 has {config.x0.size} coordinates but the objective has {oracle.dim}")
    dist = config.distribution()
    if dist.kind is Kind.GAUSSIAN:
        raise ConfigError("Gaussian directions cannot drive the Hessian estimate")
    warm_iters, n_end = config.iteration_plan()

    state = IterateState(x=project_box(config.x0, config.box))
    if warm_iters:
        _first_order_loop(
            state, alg.warm_start, dist, config.warm_schedule, warm_iters, oracle, rng,
            config.box, False, None,
        )
    state.warm_start_measurements = state.measurements_spent
    state.n = 0

    schedule = config.schedule
    x = state.x
    H_bar = np.eye(x.size)
    for n in range(1, n_end + 1):
        delta = schedule.perturbation(n)
        g, H_hat = _newton_step(alg, dist, x, delta, oracle, rng)
        H_bar = smooth_hessian(H_bar, H_hat, n)
        try:
            H_pd = project_pd(H_bar, config.pd_floor_scale * delta, config.pd_rule)
            direction = solve_pd(H_pd, g)
        except NumericalError as exc:
            logger.warning("iteration %d: Newton solve failed (%s); taking a gradient step", n, exc)
            state.fallbacks += 1
            direction = g
        x = project_box(x - schedule.step(n) * direction, config.box)
        state.n = n
        state.measurements_spent += alg.measurements_per_iteration
        state.H_bar = H_bar
        _record(state, x, config.iterate_averaging, callback)
    return state


def optimize(
    config: AlgorithmConfig,
    oracle: NoisyOracle,
    rng: np.random.Generator,
    callback: Optional[Callback] = None,
) -> IterateState:
    """Run ``config.algorithm`` to the end of its measurement budget."""
    if config.algorithm.order == 1:
        return run_first_order(config, oracle, rng, callback)
    return run_second_order(config, oracle, rng, callback)


def with_overrides(config: AlgorithmConfig, **changes) -> AlgorithmConfig:
    """Copy of ``config`` with fields replaced (re-validated)."""
    return replace(config, **changes)
