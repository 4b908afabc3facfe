"""
Dense complex linear algebra used throughout the simulator.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128`` with
exactly two dimensions. Column vectors are ``(n, 1)`` arrays. Every function
here is pure: inputs are never modified.
"""

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, NumericalFailureError, SingularChannelError

__all__ = [
    "as_matrix",
    "hermitian",
    "singular_values",
    "pseudo_inverse",
    "hpd_inverse",
    "RANK_TOLERANCE",
]

# sigma_k counts as zero when below max(rows, cols) * sigma_max * RANK_TOLERANCE
RANK_TOLERANCE = 1e-12


def as_matrix(m) -> np.ndarray:
    """Return `m` as a finite 2-D complex128 array.

    Scalars become ``1x1`` and 1-D input becomes a column.
    """
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise InvalidArgumentError(f"expected a matrix, got an array with {a.ndim} dimensions")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise InvalidArgumentError(f"matrix dimensions must be positive, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError("matrix contains NaN or Inf entries")
    return a


def hermitian(m) -> np.ndarray:
    """Conjugate transpose."""
    return as_matrix(m).conj().T


def singular_values(m) -> np.ndarray:
    """Singular values of `m`, sorted in descending order.

    Returns ``min(rows, cols)`` non-negative values.

    Raises
    ------
    NumericalFailureError
        If the underlying LAPACK SVD does not converge.
    """
    a = as_matrix(m)
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"SVD did not converge: {exc}") from exc
    return np.sort(np.abs(s))[::-1]


def _check_rank(s: np.ndarray, shape) -> None:
    threshold = max(shape) * s[0] * RANK_TOLERANCE
    if s[0] == 0.0 or s[-1] < threshold:
        ratio = 0.0 if s[0] == 0.0 else s[-1] / s[0]
        raise SingularChannelError(
            f"matrix of shape {shape} is rank deficient (sigma_min/sigma_max = {ratio:.3e})"
        )


def pseudo_inverse(m) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a full-column-rank matrix.

    Mathematically this is ``(M^H M)^{-1} M^H``. It is evaluated through the
    thin SVD ``M = U S V^H`` as ``V S^{-1} U^H``, which keeps the error of
    ``pinv(M) @ M - I`` proportional to cond(M) rather than cond(M)**2.

    Parameters
    ----------
    m : array_like
        Tall or square matrix with full column rank.

    Returns
    -------
    numpy.ndarray
        ``cols x rows`` matrix.

    Raises
    ------
    InvalidArgumentError
        If `m` is wide (more columns than rows).
    SingularChannelError
        If `m` is numerically rank deficient.
    """
    a = as_matrix(m)
    rows, cols = a.shape
    if cols > rows:
        raise InvalidArgumentError(f"pseudo_inverse needs rows >= cols, got {a.shape}")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"SVD did not converge: {exc}") from exc
    _check_rank(s, a.shape)
    return (vh.conj().T / s) @ u.conj().T


def hpd_inverse(m) -> np.ndarray:
    """Inverse of a Hermitian positive-definite matrix via Cholesky.

    The result is symmetrized so it is exactly Hermitian.

    Raises
    ------
    SingularChannelError
        If the Cholesky factorization fails (matrix not positive definite).
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"hpd_inverse needs a square matrix, got {a.shape}")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularChannelError(f"matrix is not positive definite: {exc}") from exc
    inv = scipy.linalg.cho_solve(factor, np.eye(a.shape[0], dtype=np.complex128), check_finite=False)
    return 0.5 * (inv + inv.conj().T)
