"""
One-iteration gradient and Hessian estimates from noisy function values.

All estimators are pure: they take the measurements, the direction(s) the
measurements were taken along, and the perturbation constant, and never draw
random numbers themselves. Every function broadcasts over leading batch axes:
``d`` may have shape ``(..., N)`` with matching measurement arrays of shape
``(...)``, which keeps Monte-Carlo checks vectorized.

Measurement layout per estimator::

    gradient (RDSA, SPSA)   y+ = f(x + delta d),  y- = f(x - delta d)
    Hessian (RDSA)          y+, y-, and y = f(x)
    2SPSA                   y+, y-, y+~ = f(x + delta D + delta~ D~),
                            y-~ = f(x - delta D + delta~ D~)
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .perturbation import Kind, PerturbationDist, moments

__all__ = [
    "GradEstimate",
    "HessEstimate",
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
]


class GradEstimate(NamedTuple):
    g: np.ndarray
    measurements_used: int = 2


class HessEstimate(NamedTuple):
    H: np.ndarray
    measurements_used: int = 3


def _positive(name, value):
    if np.any(np.asarray(value) <= 0):
        raise ValueError(f"{name} must be positive, got {value!r}")


def _scaled_direction(y_plus, y_minus, d, delta, scale):
    _positive("delta", delta)
    d = np.asarray(d, dtype=float)
    diff = (np.asarray(y_plus, dtype=float) - np.asarray(y_minus, dtype=float)) / (2.0 * delta)
    return scale * d * diff[..., None]


def grad_rdsa_unif(y_plus, y_minus, d, delta, eta) -> GradEstimate:
    """RDSA gradient for ``U[-eta, eta]`` directions: ``(3/eta^2) d (y+ - y-)/(2 delta)``."""
    _positive("eta", eta)
    return GradEstimate(_scaled_direction(y_plus, y_minus, d, delta, 3.0 / eta**2))


def grad_rdsa_asymber(y_plus, y_minus, d, delta, epsilon) -> GradEstimate:
    """RDSA gradient for asymmetric Bernoulli directions: ``d (y+ - y-) / (2 delta (1+eps))``."""
    _positive("epsilon", epsilon)
    return GradEstimate(_scaled_direction(y_plus, y_minus, d, delta, 1.0 / (1.0 + epsilon)))


def grad_rdsa_gauss(y_plus, y_minus, d, delta) -> GradEstimate:
    return GradEstimate(_scaled_direction(y_plus, y_minus, d, delta, 1.0))


def grad_rdsa(y_plus, y_minus, d, delta, dist: PerturbationDist) -> GradEstimate:
    """Dispatch to the RDSA gradient matching ``dist``."""
    if dist.kind is Kind.UNIFORM:
        return grad_rdsa_unif(y_plus, y_minus, d, delta, dist.param)
    if dist.kind is Kind.ASYM_BERNOULLI:
        return grad_rdsa_asymber(y_plus, y_minus, d, delta, dist.param)
    if dist.kind is Kind.GAUSSIAN:
        return grad_rdsa_gauss(y_plus, y_minus, d, delta)
    raise ValueError(f"no RDSA gradient for {dist.kind.value} directions; use grad_spsa")


def grad_spsa(y_plus, y_minus, delta_vec, delta) -> GradEstimate:
    """SPSA gradient ``(y+ - y-) / (2 delta Delta_i)`` for a +/-1 vector ``Delta``."""
    delta_vec = np.asarray(delta_vec, dtype=float)
    if np.any(delta_vec == 0):
        raise ValueError("SPSA perturbation entries must be nonzero")
    return GradEstimate(_scaled_direction(y_plus, y_minus, 1.0 / delta_vec, delta, 1.0))


def kappa(epsilon: float) -> float:
    """Diagonal normaliser of the asymmetric Bernoulli Hessian estimate.

    ``E d^4 - (E d^2)^2``, i.e. the variance of ``d^2``; strictly positive for
    ``epsilon > 0``.
    """
    m2, m4 = moments(PerturbationDist.asym_bernoulli(epsilon))
    return m4 - m2**2


def _second_difference(y_plus, y_minus, y_center, delta):
    _positive("delta", delta)
    y_plus, y_minus, y_center = (np.asarray(v, dtype=float) for v in (y_plus, y_minus, y_center))
    return (y_plus + y_minus - 2.0 * y_center) / delta**2


def _direction_matrix(d, diag_scale, diag_shift, off_scale):
    d = np.asarray(d, dtype=float)
    M = off_scale * d[..., :, None] * d[..., None, :]
    idx = np.arange(d.shape[-1])
    M[..., idx, idx] = diag_scale * (d**2 - diag_shift)
    return M


def hess_rdsa_unif(y_plus, y_minus, y_center, d, delta, eta) -> HessEstimate:
    """Three-measurement Hessian for ``U[-eta, eta]`` directions.

    ``(9 / (2 eta^4)) M (y+ + y- - 2y) / delta^2`` where ``M`` has
    ``(5/2)(d_i^2 - eta^2/3)`` on the diagonal and ``d_i d_j`` elsewhere.
    """
    _positive("eta", eta)
    sd = _second_difference(y_plus, y_minus, y_center, delta)
    M = _direction_matrix(d, 2.5, eta**2 / 3.0, 1.0)
    return HessEstimate(9.0 / (2.0 * eta**4) * M * sd[..., None, None])


def hess_rdsa_asymber(y_plus, y_minus, y_center, d, delta, epsilon) -> HessEstimate:
    """Three-measurement Hessian for asymmetric Bernoulli directions.

    ``M (y+ + y- - 2y) / delta^2`` where ``M`` has ``(d_i^2 - (1+eps)) / kappa``
    on the diagonal and ``d_i d_j / (2 (1+eps)^2)`` elsewhere.
    """
    _positive("epsilon", epsilon)
    sd = _second_difference(y_plus, y_minus, y_center, delta)
    M = _direction_matrix(d, 1.0 / kappa(epsilon), 1.0 + epsilon, 0.5 / (1.0 + epsilon) ** 2)
    return HessEstimate(M * sd[..., None, None])


def hess_rdsa(y_plus, y_minus, y_center, d, delta, dist: PerturbationDist) -> HessEstimate:
    if dist.kind is Kind.UNIFORM:
        return hess_rdsa_unif(y_plus, y_minus, y_center, d, delta, dist.param)
    if dist.kind is Kind.ASYM_BERNOULLI:
        return hess_rdsa_asymber(y_plus, y_minus, y_center, d, delta, dist.param)
    raise ValueError(f"the RDSA Hessian estimate is undefined for {dist.kind.value} directions")


def hess_2spsa(
    y_plus,
    y_minus,
    y_plus_tilde,
    y_minus_tilde,
    delta_vec,
    delta_vec_tilde,
    delta,
    delta_tilde,
):
    """Four-measurement simultaneous-perturbation gradient and Hessian.

    One-sided gradients are taken at ``x + delta D`` and ``x - delta D`` along
    the second perturbation ``delta_tilde D~``; their difference is divided by
    ``2 delta D`` and symmetrised.

    Returns
    -------
    (GradEstimate, HessEstimate)
        The gradient uses only ``y_plus`` and ``y_minus`` as in :func:`grad_spsa`.
    """
    D = np.asarray(delta_vec, dtype=float)
    Dt = np.asarray(delta_vec_tilde, dtype=float)
    if np.any(D == 0) or np.any(Dt == 0):
        raise ValueError("SPSA perturbation entries must be nonzero")
    _positive("delta", delta)
    _positive("delta_tilde", delta_tilde)
    y_plus, y_minus, y_plus_tilde, y_minus_tilde = (
        np.asarray(v, dtype=float) for v in (y_plus, y_minus, y_plus_tilde, y_minus_tilde)
    )
    grad = grad_spsa(y_plus, y_minus, D, delta)
    g_plus = (y_plus_tilde - y_plus)[..., None] / (delta_tilde * Dt)
    g_minus = (y_minus_tilde - y_minus)[..., None] / (delta_tilde * Dt)
    half = (g_plus - g_minus)[..., :, None] / (2.0 * delta * D[..., None, :])
    H = 0.5 * (half + np.swapaxes(half, -1, -2))
    return GradEstimate(grad.g, 4), HessEstimate(H, 4)
