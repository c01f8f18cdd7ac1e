"""Dense complex matrix primitives.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Vectorization
uses column stacking, so that ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.
"""
import numpy as np
import scipy.linalg

__all__ = [
    "DimensionError",
    "as_matrix",
    "as_square",
    "as_hermitian",
    "mat_exp",
    "kron",
    "vec",
    "unvec",
    "herm_eig",
    "spectral_norm",
]

HERMITIAN_RTOL = 1e-12


class DimensionError(ValueError):
    """Raised when an operand has the wrong shape."""


def as_matrix(a):
    """Return ``a`` as a finite 2-D complex array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.size == 0:
        raise DimensionError(f"expected a non-empty matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def as_square(a):
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def as_hermitian(a, rtol=HERMITIAN_RTOL):
    """Validate Hermiticity relative to ``max(1, ||a||_F)`` and return ``a``.

    The returned array is exactly Hermitian (the anti-Hermitian residue
    below tolerance is dropped).
    """
    m = as_square(a)
    residual = np.linalg.norm(m - m.conj().T)
    if residual > rtol * max(1.0, np.linalg.norm(m)):
        raise ValueError(f"matrix is not Hermitian (residual {residual:.3e})")
    return 0.5 * (m + m.conj().T)


def mat_exp(a):
    """Matrix exponential by scaling and squaring with a Pade approximant."""
    return scipy.linalg.expm(as_square(a))


def kron(a, b):
    return np.kron(as_matrix(a), as_matrix(b))


def vec(x):
    """Column-stack a square matrix into a vector of length ``N**2``."""
    return as_square(x).reshape(-1, order="F")


def unvec(v):
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {v.shape}")
    n = int(round(np.sqrt(v.size)))
    if n * n != v.size or n == 0:
        raise DimensionError(f"vector length {v.size} is not a perfect square")
    return v.reshape((n, n), order="F")


def herm_eig(h):
    """Eigen-decomposition of a Hermitian matrix.

    Returns
    -------
    eigenvalues : ndarray
        Real, ascending.
    eigenvectors : ndarray
        Unitary matrix whose columns are the eigenvectors.
    """
    return np.linalg.eigh(as_hermitian(h))


def spectral_norm(a):
    """Largest singular value, as the root of the top eigenvalue of ``a^dagger a``."""
    m = as_matrix(a)
    gram = m.conj().T @ m
    top = np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))[-1]
    return float(np.sqrt(max(top, 0.0)))
