"""
Closed-form asymptotic constants for RDSA and SPSA.

Notation follows the optimizer: ``a_n = a0 / n^alpha``, ``delta_n = delta0 /
n^gamma``, ``beta = alpha - 2 gamma`` and ``beta_plus = beta`` when ``alpha ==
1`` and ``0`` otherwise. ``H`` is the Hessian at the optimum and ``T`` the
third-derivative contraction

    T_l = -1/6 [ f_lll + 3 sum_{i != l} f_iil ]

evaluated at the optimum. Measurement noise enters through ``S = sigma^2/4 I``.

Every direction distribution is summarised by its normalised fourth moment
``m4 / m2^2``; the bias constant is ``k_mu = 2 m4 / m2^2`` (3.6 for uniform
directions, 2 for symmetric Bernoulli, i.e. SPSA). Second-order AMSEs share
the two problem-dependent pieces

    (A) = (2 delta0^2 / (2 - beta) * |H^-1 T|)^2
    (B) = trace(H^-1 S H^-1) / (delta0^2 (2 - beta))

and differ only in the factor ``(k_mu / 2)^2`` multiplying ``(A)``; that
factor is 1 for 2SPSA.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError
from .objectives import Objective
from .perturbation import Kind, PerturbationDist, moments

__all__ = [
    "AsymptoticInputs",
    "amse_first_order",
    "amse_iterate_averaging",
    "amse_second_order",
    "amse_terms",
    "bias_multiplier",
    "covariance_first_order",
    "fourth_moment_ratio",
    "k_mu",
    "mean_first_order",
    "measurement_ratio",
    "omega_second_order",
    "simulation_ratio_vs_2spsa",
    "third_deriv_T",
]


def fourth_moment_ratio(dist: PerturbationDist) -> float:
    """``E d^4 / (E d^2)^2`` for one coordinate (1.8 for uniform directions)."""
    if dist.kind is Kind.UNIFORM:
        # (eta^4/5) / (eta^2/3)^2 = 9/5 for every eta; avoid the rounding of the quotient.
        return 1.8
    m2, m4 = moments(dist)
    return m4 / m2**2


def k_mu(dist: PerturbationDist) -> float:
    """Asymptotic bias constant ``2 E d^4 / (E d^2)^2``.

    Examples
    --------
    >>> k_mu(PerturbationDist.uniform(1.0))
    3.6
    >>> round(k_mu(PerturbationDist.asym_bernoulli(1.0)), 12)
    3.0
    """
    return 2.0 * fourth_moment_ratio(dist)


def bias_multiplier(dist: PerturbationDist) -> float:
    """Factor ``(k_mu / 2)^2`` multiplying the bias term (A) relative to SPSA."""
    return fourth_moment_ratio(dist) ** 2


def measurement_ratio(epsilon: float) -> Tuple[float, float, float, float]:
    """Relative measurement cost of first-order estimators at known objective.

    Returns the normalised fourth moments for (uniform RDSA, asymmetric
    Bernoulli RDSA, Gaussian RDSA, SPSA), in the form ``(1.8, 1 + eps, 3, 1)``.
    The asymmetric Bernoulli entry is the first-order expansion of the exact
    ratio ``fourth_moment_ratio(asym_bernoulli(eps))`` for small ``eps``.
    """
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon!r}")
    return (
        fourth_moment_ratio(PerturbationDist.uniform(1.0)),
        1.0 + float(epsilon),
        fourth_moment_ratio(PerturbationDist.gaussian()),
        fourth_moment_ratio(PerturbationDist.sym_bernoulli()),
    )


@dataclass(frozen=True)
class AsymptoticInputs:
    """Problem and schedule constants entering the asymptotic formulas.

    Attributes
    ----------
    hessian : ndarray
        Hessian at the optimum, symmetric positive definite.
    T : ndarray
        Third-derivative contraction at the optimum (see :func:`third_deriv_T`).
    sigma2 : float
        Limiting variance of the measurement-noise difference.
    a0, delta0, alpha, gamma : float
        Schedule constants. Defaults give ``beta = 2/3``.
    """

    hessian: np.ndarray
    T: np.ndarray
    sigma2: float
    a0: float = 1.0
    delta0: float = 1.0
    alpha: float = 1.0
    gamma: float = 1.0 / 6.0

    def __post_init__(self):
        H = np.array(self.hessian, dtype=float)
        T = np.array(self.T, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ConfigError(f"hessian must be square, got shape {H.shape}")
        if T.shape != (H.shape[0],):
            raise ConfigError(f"T must have shape ({H.shape[0]},), got {T.shape}")
        H = 0.5 * (H + H.T)
        if np.linalg.eigvalsh(H)[0] <= 0:
            raise ConfigError("hessian must be positive definite")
        if self.sigma2 < 0:
            raise ConfigError(f"sigma2 must be non-negative, got {self.sigma2}")
        if self.a0 <= 0 or self.delta0 <= 0:
            raise ConfigError("a0 and delta0 must be positive")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.beta > 0:
            raise ConfigError(f"beta = alpha - 2 gamma must be positive, got {self.beta}")
        object.__setattr__(self, "hessian", H)
        object.__setattr__(self, "T", T)

    @property
    def beta(self) -> float:
        return self.alpha - 2.0 * self.gamma

    @property
    def beta_plus(self) -> float:
        return self.beta if self.alpha == 1 else 0.0

    @property
    def biased(self) -> bool:
        """Whether the limit has a non-zero mean (``gamma == alpha / 6``)."""
        return bool(np.isclose(self.gamma, self.alpha / 6.0, rtol=0, atol=1e-12))

    @property
    def S(self) -> np.ndarray:
        return self.sigma2 / 4.0 * np.eye(self.hessian.shape[0])


def mean_first_order(inputs: AsymptoticInputs, dist: PerturbationDist) -> np.ndarray:
    """Limiting mean of ``n^(beta/2) (x_n - x*)`` for first-order RDSA."""
    if not inputs.biased:
        return np.zeros_like(inputs.T)
    N = inputs.T.size
    K = 2.0 * inputs.a0 * inputs.hessian - inputs.beta_plus * np.eye(N)
    return k_mu(dist) * inputs.a0 * inputs.delta0**2 * np.linalg.solve(K, inputs.T)


def covariance_first_order(inputs: AsymptoticInputs) -> np.ndarray:
    """Limiting covariance ``P M P'`` of ``n^(beta/2) (x_n - x*)`` for first-order RDSA.

    ``M = a0^2 sigma^2 / (4 delta0^2) diag(1 / (2 lam_i - beta_plus))`` where
    ``lam_i`` are the eigenvalues of ``a0 H``.
    """
    lam, P = np.linalg.eigh(inputs.hessian)
    lam = inputs.a0 * lam
    denom = 2.0 * lam - inputs.beta_plus
    if np.any(denom <= 0):
        raise ConfigError("the step constant is too small: need 2 a0 lambda_min > beta_plus")
    scale = inputs.a0**2 * inputs.sigma2 / (4.0 * inputs.delta0**2)
    return (P * (scale / denom)) @ P.T


def amse_first_order(inputs: AsymptoticInputs, dist: PerturbationDist) -> float:
    """``mu'mu + trace(P M P')`` for first-order RDSA with directions ``dist``."""
    mu = mean_first_order(inputs, dist)
    return float(mu @ mu + np.trace(covariance_first_order(inputs)))


def amse_terms(inputs: AsymptoticInputs) -> Tuple[float, float]:
    """The shared bias and variance pieces ``((A), (B))`` of second-order AMSEs."""
    H_inv_T = np.linalg.solve(inputs.hessian, inputs.T)
    H_inv = np.linalg.inv(inputs.hessian)
    two_minus_beta = 2.0 - inputs.beta
    A = (2.0 * inputs.delta0**2 / two_minus_beta * np.linalg.norm(H_inv_T)) ** 2
    B = np.trace(H_inv @ inputs.S @ H_inv) / (inputs.delta0**2 * two_minus_beta)
    return float(A), float(B)


def amse_second_order(inputs: AsymptoticInputs, dist: PerturbationDist) -> float:
    """AMSE of the Newton-type iteration with gradient directions ``dist``.

    ``(k_mu delta0^2 a0 / (2 a0 - beta) |H^-1 T|)^2
    + a0^2 / (delta0^2 (2 a0 - beta)) trace(H^-1 S H^-1)``.
    Pass ``PerturbationDist.sym_bernoulli()`` for 2SPSA; at ``a0 = 1`` the
    result equals ``bias_multiplier(dist) * (A) + (B)``.
    """
    a0, beta = inputs.a0, inputs.beta
    if not 2.0 * a0 - beta > 0:
        raise ConfigError("need 2 a0 > beta for a finite second-order AMSE")
    H_inv_T = np.linalg.solve(inputs.hessian, inputs.T)
    H_inv = np.linalg.inv(inputs.hessian)
    bias = 0.0
    if inputs.biased:
        bias = (k_mu(dist) * inputs.delta0**2 * a0 / (2.0 * a0 - beta) * np.linalg.norm(H_inv_T)) ** 2
    var = a0**2 / (inputs.delta0**2 * (2.0 * a0 - beta)) * np.trace(H_inv @ inputs.S @ H_inv)
    return float(bias + var)


def amse_iterate_averaging(inputs: AsymptoticInputs, dist: Optional[PerturbationDist] = None) -> float:
    """AMSE of first-order RDSA with Polyak-Ruppert averaging (uniform directions by default).

    Identical in form to :func:`amse_second_order` with ``a0 = 1``.
    """
    dist = PerturbationDist.uniform(1.0) if dist is None else dist
    unit = AsymptoticInputs(
        inputs.hessian, inputs.T, inputs.sigma2, 1.0, inputs.delta0, inputs.alpha, inputs.gamma
    )
    return amse_second_order(unit, dist)


def simulation_ratio_vs_2spsa(dist: PerturbationDist, A: float, B: float) -> float:
    """Measurements a 3-measurement 2RDSA needs relative to 2SPSA for equal AMSE.

    ``(3/4) (m A + B) / (A + B)`` with ``m = bias_multiplier(dist)``; values
    below 1 favour 2RDSA.
    """
    if A < 0 or B < 0 or A + B <= 0:
        raise ConfigError("A and B must be non-negative and not both zero")
    m = bias_multiplier(dist)
    return 0.75 * (m * A + B) / (A + B)


def omega_second_order(inputs: AsymptoticInputs, rho: float) -> np.ndarray:
    """Limiting covariance ``a0^2 sigma^2 / (4 delta0^2 rho^2 (8 a0 - 4 beta_plus)) H^-2``.

    ``rho`` is the problem-dependent constant of the stability condition on
    the preconditioned gradient field; it is not estimated here.
    """
    if not rho > 0:
        raise ConfigError(f"rho must be positive, got {rho!r}")
    denom = 8.0 * inputs.a0 - 4.0 * inputs.beta_plus
    if denom <= 0:
        raise ConfigError("need 8 a0 > 4 beta_plus")
    H_inv = np.linalg.inv(inputs.hessian)
    scale = inputs.a0**2 * inputs.sigma2 / (4.0 * inputs.delta0**2 * rho**2 * denom)
    return scale * (H_inv @ H_inv)


def _third_partials(f, x, h):
    """Central differences for ``f_lll`` (vector) and ``f_iil`` (matrix, [i, l]); error O(h^2)."""
    n = x.size
    E = np.eye(n) * h
    f_lll = np.empty(n)
    for l in range(n):
        e = E[l]
        f_lll[l] = (f(x + 2 * e) - 2 * f(x + e) + 2 * f(x - e) - f(x - 2 * e)) / (2 * h**3)
    f_iil = np.zeros((n, n))
    for i in range(n):
        for l in range(n):
            if i == l:
                continue
            ei, el = E[i], E[l]
            up = f(x + ei + el) - 2 * f(x + el) + f(x - ei + el)
            dn = f(x + ei - el) - 2 * f(x - el) + f(x - ei - el)
            f_iil[i, l] = (up - dn) / (2 * h**3)
    return f_lll, f_iil


def third_deriv_T(objective: Objective, x: Optional[np.ndarray] = None, step: Optional[float] = None) -> np.ndarray:
    """Third-derivative contraction ``T`` by finite differences.

    Uses the standard five-point (pure) and eight-point (mixed) central
    stencils, each O(h^2), combined by one Richardson step over ``h`` and
    ``h/2`` for O(h^4) accuracy.

    Parameters
    ----------
    objective : Objective
        Three times differentiable near ``x``.
    x : ndarray, optional
        Evaluation point; defaults to ``objective.x_star``.
    step : float, optional
        Base step ``h``; defaults to ``1e-2 * (1 + |x|)``.

    Raises
    ------
    ConfigError
        If no point is given and the objective has no known optimum.
    """
    if x is None:
        if objective.x_star is None:
            raise ConfigError(f"objective {objective.name!r} has no known optimum; pass x explicitly")
        x = objective.x_star
    x = np.asarray(x, dtype=float)
    h = 1e-2 * (1.0 + np.linalg.norm(x)) if step is None else float(step)
    f = objective.eval

    def contraction(hh):
        f_lll, f_iil = _third_partials(f, x, hh)
        return -(f_lll + 3.0 * f_iil.sum(axis=0)) / 6.0

    return (4.0 * contraction(h / 2) - contraction(h)) / 3.0
