"""Dense symmetric helpers for the Newton step: eigendecomposition, PD projection, solves, smoothing."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NumericalError

__all__ = ["PD_RULES", "eigen_sym", "project_pd", "smooth_hessian", "solve_pd", "symmetrize"]


def symmetrize(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return 0.5 * (M + M.T)


def eigen_sym(M):
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a symmetric matrix."""
    M = symmetrize(M)
    if not np.all(np.isfinite(M)):
        raise NumericalError("matrix has non-finite entries")
    try:
        return np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc


PD_RULES = ("shift", "clip")


def project_pd(M, floor: float, rule: str = "shift") -> np.ndarray:
    """Map a symmetric matrix to a positive definite one via its spectrum.

    Parameters
    ----------
    M : array_like
        Symmetric ``(N, N)`` matrix.
    floor : float
        Positive lower bound for the output eigenvalues.
    rule : {"shift", "clip"}
        ``"shift"`` clips negative eigenvalues to zero and then adds ``floor``
        to every eigenvalue (``max(lam, 0) + floor``). ``"clip"`` only raises
        eigenvalues below ``floor`` up to it (``max(lam, floor)``) and leaves
        the rest of the spectrum untouched.

    Returns
    -------
    numpy.ndarray
        Symmetric matrix with the same eigenvectors and minimum eigenvalue at
        least ``floor``. Both rules reduce to the identity map as ``floor -> 0``
        on positive definite input.
    """
    if not floor > 0:
        raise ValueError(f"floor must be positive, got {floor!r}")
    if rule not in PD_RULES:
        raise ValueError(f"unknown projection rule {rule!r}; expected one of {PD_RULES}")
    lam, V = eigen_sym(M)
    if rule == "shift":
        lam = np.maximum(lam, 0.0) + floor
    else:
        lam = np.maximum(lam, floor)
    return symmetrize((V * lam) @ V.T)


def solve_pd(M, v) -> np.ndarray:
    """Solve ``M w = v`` for symmetric positive definite ``M`` via Cholesky."""
    try:
        factor = scipy.linalg.cho_factor(symmetrize(M), check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"matrix is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, np.asarray(v, dtype=float))


def smooth_hessian(H_bar_prev, H_hat, n: int) -> np.ndarray:
    """Running-mean update ``n/(n+1) H_bar_prev + 1/(n+1) H_hat``.

    At ``n = 0`` the previous value carries zero weight and may be ``None``.
    """
    if n < 0:
        raise ValueError(f"iteration index must be non-negative, got {n}")
    H_hat = np.asarray(H_hat, dtype=float)
    if n == 0:
        return H_hat.copy()
    return (n * np.asarray(H_bar_prev, dtype=float) + H_hat) / (n + 1)
