"""Random directions stochastic approximation (RDSA) with SPSA baselines.

First-order (gradient) and second-order (Newton) zeroth-order optimizers that
estimate derivatives from noisy function values along random directions,
plus benchmark objectives, a replicated-experiment harness and closed-form
asymptotic constants.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, NumericalError
from .estimators import (
    GradEstimate,
    HessEstimate,
    grad_rdsa,
    grad_rdsa_asymber,
    grad_rdsa_gauss,
    grad_rdsa_unif,
    grad_spsa,
    hess_2spsa,
    hess_rdsa,
    hess_rdsa_asymber,
    hess_rdsa_unif,
    kappa,
)
from .linalg import eigen_sym, project_pd, smooth_hessian, solve_pd
from .objectives import NoisyOracle, Objective, fourth_order_objective, quadratic_objective
from .optimizer import (
    Algorithm,
    AlgorithmConfig,
    IterateState,
    Schedule,
    optimize,
    project_box,
    run_first_order,
    run_second_order,
)
from .perturbation import Kind, PerturbationDist, make_stream, moments, replication_streams, sample_direction

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "AlgorithmConfig",
    "ConfigError",
    "GradEstimate",
    "HessEstimate",
    "IterateState",
    "Kind",
    "NoisyOracle",
    "NumericalError",
    "Objective",
    "PerturbationDist",
    "Schedule",
    "eigen_sym",
    "fourth_order_objective",
    "grad_rdsa",
    "grad_rdsa_asymber",
    "grad_rdsa_gauss",
    "grad_rdsa_unif",
    "grad_spsa",
    "hess_2spsa",
    "hess_rdsa",
    "hess_rdsa_asymber",
    "hess_rdsa_unif",
    "kappa",
    "make_stream",
    "minimize",
    "moments",
    "optimize",
    "project_box",
    "project_pd",
    "quadratic_objective",
    "replication_streams",
    "run_first_order",
    "run_second_order",
    "sample_direction",
    "smooth_hessian",
    "solve_pd",
]


def minimize(
    func: Callable[[np.ndarray], float],
    x0,
    budget: int,
    algorithm: str = "2RDSA-AsymBer",
    seed: int = 0,
    box: Optional[tuple] = None,
    **config,
) -> IterateState:
    """Minimise a (possibly noisy) black-box function with ``budget`` evaluations.

    ``func`` is called once per measurement on a point of shape ``(N,)``; any
    noise must come from ``func`` itself. Extra keyword arguments are passed to
    :class:`AlgorithmConfig`. Returns the final :class:`IterateState`.

    Examples
    --------
    >>> state = minimize(lambda x: float(x @ x), [1.0, -1.0], budget=600, algorithm="1SPSA")
    >>> bool(state.x @ state.x < 1e-2)
    True
    """
    x0 = np.asarray(x0, dtype=float)
    objective = Objective(name=getattr(func, "__name__", "user"), dim=x0.size, func=func)
    cfg = AlgorithmConfig(algorithm=algorithm, x0=x0, budget=budget, box=box, **config)
    dir_rng, _ = replication_streams(seed, 0)
    return optimize(cfg, NoisyOracle(objective), dir_rng)
