"""Dense complex-matrix primitives.

Matrices are plain ``complex128`` numpy arrays. Everything here is a pure
function of its inputs; random sampling takes an explicit seed (or a
``numpy.random.Generator``).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = [
    "DimensionError",
    "DomainError",
    "DecompositionError",
    "NotUnitaryError",
    "SvdResult",
    "as_matrix",
    "dagger",
    "kron",
    "svd",
    "trace_norm",
    "spectral_norm",
    "frobenius_norm",
    "unitarity_residual",
    "is_unitary",
    "default_unitary_tol",
    "check_unitary",
    "haar_random_unitary",
    "haar_random_state",
    "herm_eig",
]

INTERNAL_TOL = 1e-10


class DimensionError(ValueError):
    """Matrix shapes are incompatible with the requested operation."""


class DomainError(ValueError):
    """Input lies outside the operation's domain (e.g. not Hermitian)."""


class DecompositionError(np.linalg.LinAlgError):
    """A matrix decomposition failed to converge."""


class NotUnitaryError(ValueError):
    """A matrix required to be unitary is not, within tolerance."""

    def __init__(self, name: str, residual: float, tol: float):
        super().__init__(
            f"{name} is not unitary: ||M^dag M - I||_F = {residual:.3e} > tol {tol:.3e}"
        )
        self.residual = residual
        self.tol = tol


class SvdResult(NamedTuple):
    """``m = left @ diag(singulars) @ right.conj().T`` with singulars non-increasing."""

    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singulars) @ self.right.conj().T


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce ``m`` to a finite 2-D complex array."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size == 0:
        raise DimensionError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains NaN or Inf entries")
    return a


def _square(m, name: str = "matrix") -> np.ndarray:
    a = as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def kron(a, b) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    return np.kron(a, b)


def svd(m) -> SvdResult:
    """Full singular value decomposition with non-increasing singular values.

    Raises
    ------
    DecompositionError
        If LAPACK fails to converge.
    """
    a = as_matrix(m)
    try:
        w, s, vh = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD did not converge: {exc}") from exc
    return SvdResult(w, s, vh.conj().T)


def _singulars(m) -> np.ndarray:
    a = as_matrix(m)
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD did not converge: {exc}") from exc


def trace_norm(m) -> float:
    """Sum of singular values (nuclear norm)."""
    return float(np.sum(_singulars(m)))


def spectral_norm(m) -> float:
    """Largest singular value."""
    return float(_singulars(m)[0])


def frobenius_norm(m) -> float:
    return float(np.linalg.norm(as_matrix(m), "fro"))


def unitarity_residual(m) -> float:
    """``||m^dag m - I||_F``."""
    a = _square(m)
    return float(np.linalg.norm(dagger(a) @ a - np.eye(a.shape[0]), "fro"))


def is_unitary(m, tol: float = INTERNAL_TOL) -> bool:
    return unitarity_residual(m) <= tol


def default_unitary_tol(dim: int) -> float:
    """Tolerance applied to user-supplied (measured) unitaries."""
    return 1e-8 * np.sqrt(dim)


def check_unitary(m, name: str = "matrix", tol: float | None = None) -> np.ndarray:
    """Return ``m`` as an array, raising :class:`NotUnitaryError` if it is not unitary."""
    a = _square(m, name)
    if tol is None:
        tol = default_unitary_tol(a.shape[0])
    res = unitarity_residual(a)
    if res > tol:
        raise NotUnitaryError(name, res, tol)
    return a


def haar_random_unitary(n: int, seed=None) -> np.ndarray:
    """Sample an ``n x n`` unitary from the Haar measure.

    QR of a complex Ginibre matrix, with the phases of ``diag(R)`` moved
    into ``Q`` so the distribution is exactly Haar.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_random_state(n: int, seed=None) -> np.ndarray:
    """Uniformly random unit vector in C^n (a column of a Haar unitary)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def herm_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix (or a stack of them).

    Returns ascending real eigenvalues and a unitary matrix of eigenvectors
    (as columns). Stacked input of shape ``(..., n, n)`` is decomposed
    matrix by matrix.

    Raises
    ------
    DomainError
        If any matrix deviates from Hermitian by more than ``1e-10 * ||m||_F``.
    """
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim == 2:
        a = _square(a)
    elif a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"expected square matrices, got shape {a.shape}")
    ah = np.conj(np.swapaxes(a, -1, -2))
    scale = np.linalg.norm(a, axis=(-2, -1))
    skew = np.linalg.norm(a - ah, axis=(-2, -1))
    if np.any(skew > INTERNAL_TOL * scale):
        raise DomainError("matrix is not Hermitian")
    try:
        vals, vecs = np.linalg.eigh(0.5 * (a + ah))
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"eigh did not converge: {exc}") from exc
    return vals, vecs
