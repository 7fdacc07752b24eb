"""Frobenius-norm distance between a bipartite propagator and a smaller gate.

For ``U`` acting on system (dimension ``n_s``) and bath (dimension ``n_b``)
and an ideal system gate ``G``, the distance

    d_F(U, G) = min_{Phi unitary} ||U - G (x) Phi||_F / sqrt(2 n_s n_b)

has the closed form ``sqrt(1 - ||Gamma||_tr / (n_s n_b))`` where ``Gamma``
is the ``n_b x n_b`` contraction of the blocks of ``U`` against ``conj(G)``.
The optimal ``Phi`` is the unitary polar factor of ``Gamma``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .matcore import (
    DimensionError,
    SvdResult,
    as_matrix,
    check_unitary,
    svd,
)

__all__ = [
    "Ordering",
    "BipartiteUnitary",
    "GammaMatrix",
    "FrobDistanceReport",
    "block",
    "contract",
    "gamma",
    "embed",
    "swap_factors",
    "frob_distance",
    "frob_distance_exact_tensor",
    "frob_objective",
]


class Ordering(str, enum.Enum):
    """Which tensor factor comes first in the joint Hilbert space."""

    SYSTEM_FIRST = "system_first"  # U ~ G (x) Phi
    BATH_FIRST = "bath_first"  # U ~ Phi (x) G

    @classmethod
    def parse(cls, value) -> "Ordering":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"system": cls.SYSTEM_FIRST, "bath": cls.BATH_FIRST}
        if key in aliases:
            return aliases[key]
        return cls(key)


@dataclass(frozen=True)
class BipartiteUnitary:
    """A unitary on the joint system/bath space with its declared split.

    Construction validates shape and unitarity (default tolerance
    ``1e-8 * sqrt(n_s * n_b)``; pass ``tol=float('inf')`` to skip).
    """

    matrix: np.ndarray
    n_s: int
    n_b: int
    ordering: Ordering = Ordering.SYSTEM_FIRST
    tol: float | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n_s < 1 or self.n_b < 1:
            raise DimensionError(f"n_s and n_b must be positive, got {self.n_s}, {self.n_b}")
        m = as_matrix(self.matrix, "U")
        dim = self.n_s * self.n_b
        if m.shape != (dim, dim):
            raise DimensionError(
                f"U has shape {m.shape}, expected ({dim}, {dim}) for n_s={self.n_s}, n_b={self.n_b}"
            )
        if self.tol != float("inf"):
            check_unitary(m, "U", self.tol)
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "ordering", Ordering.parse(self.ordering))

    @property
    def dim(self) -> int:
        return self.n_s * self.n_b

    def block_grid(self) -> tuple[int, int]:
        """``(number of blocks per side, block size)`` for this ordering."""
        if self.ordering is Ordering.SYSTEM_FIRST:
            return self.n_s, self.n_b
        return self.n_b, self.n_s

    def blocks(self) -> np.ndarray:
        """4-index view ``T[i, a, j, b] = U[i*size + a, j*size + b]``."""
        count, size = self.block_grid()
        return self.matrix.reshape(count, size, count, size)

    def reordered(self) -> "BipartiteUnitary":
        """The same physical operator expressed in the other channel ordering."""
        other = (
            Ordering.BATH_FIRST
            if self.ordering is Ordering.SYSTEM_FIRST
            else Ordering.SYSTEM_FIRST
        )
        first, second = self.block_grid()
        return BipartiteUnitary(
            swap_factors(self.matrix, first, second), self.n_s, self.n_b, other, tol=float("inf")
        )


def swap_factors(m: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """Conjugate ``m`` on ``C^d1 (x) C^d2`` by the swap, giving an operator on ``C^d2 (x) C^d1``.

    ``swap_factors(kron(A, B), dA, dB) == kron(B, A)``.
    """
    m = np.asarray(m)
    return m.reshape(d1, d2, d1, d2).transpose(1, 0, 3, 2).reshape(d1 * d2, d1 * d2)


def block(u: BipartiteUnitary, i: int, j: int) -> np.ndarray:
    """The ``(i, j)`` contiguous sub-block of ``u``.

    System-first blocks are ``n_b x n_b`` and indexed by system indices;
    bath-first blocks are ``n_s x n_s`` and indexed by bath indices.
    """
    count, size = u.block_grid()
    if not (0 <= i < count and 0 <= j < count):
        raise IndexError(f"block index ({i}, {j}) outside {count}x{count} grid")
    return u.matrix[i * size:(i + 1) * size, j * size:(j + 1) * size].copy()


def contract(m: np.ndarray, g: np.ndarray, n_s: int, n_b: int, ordering: Ordering) -> np.ndarray:
    """Contract the blocks of ``m`` against ``conj(g)``.

    System first: ``sum_ij conj(g[i, j]) * M_(ij)``.
    Bath first: ``[tr(g^dag M_(ij))]_ij``.

    Either way the result ``C`` satisfies ``tr((g (x) X)^dag m) = tr(X^dag C)``
    (with the kron order matching ``ordering``).
    """
    gc = np.conj(g)
    if ordering is Ordering.SYSTEM_FIRST:
        t = m.reshape(n_s, n_b, n_s, n_b)
        return np.einsum("ij,iajb->ab", gc, t)
    t = m.reshape(n_b, n_s, n_b, n_s)
    return np.einsum("ab,iajb->ij", gc, t)


def embed(g: np.ndarray, phi: np.ndarray, ordering: Ordering) -> np.ndarray:
    """``g (x) phi`` or ``phi (x) g`` according to ``ordering``."""
    if Ordering.parse(ordering) is Ordering.SYSTEM_FIRST:
        return np.kron(g, phi)
    return np.kron(phi, g)


def check_gate(u: BipartiteUnitary, g, tol: float | None = None) -> np.ndarray:
    g = as_matrix(g, "G")
    if g.shape != (u.n_s, u.n_s):
        raise DimensionError(f"G has shape {g.shape}, expected ({u.n_s}, {u.n_s})")
    return check_unitary(g, "G", tol)


@dataclass(frozen=True)
class GammaMatrix:
    """The ``n_b x n_b`` contraction of ``U`` against ``G``, with its SVD."""

    gamma: np.ndarray
    ordering: Ordering
    n_s: int
    svd: SvdResult

    @property
    def trace_norm(self) -> float:
        return float(np.sum(self.svd.singulars))

    @property
    def spectral_norm(self) -> float:
        return float(self.svd.singulars[0])

    @property
    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(self.svd.singulars**2)))

    def polar_unitary(self) -> np.ndarray:
        """``W V^dag`` from ``Gamma = W S V^dag``; identity when ``Gamma`` vanishes."""
        if self.spectral_norm == 0.0:
            return np.eye(self.gamma.shape[0], dtype=np.complex128)
        return self.svd.left @ self.svd.right.conj().T


def gamma(u: BipartiteUnitary, g) -> GammaMatrix:
    g = check_gate(u, g)
    gam = contract(u.matrix, g, u.n_s, u.n_b, u.ordering)
    return GammaMatrix(gam, u.ordering, u.n_s, svd(gam))


@dataclass(frozen=True)
class FrobDistanceReport:
    distance: float
    gamma_trace_norm: float
    phi_opt: np.ndarray
    gamma: GammaMatrix


def frob_objective(u: BipartiteUnitary, g: np.ndarray, phi: np.ndarray) -> float:
    """``||U - G (x) phi||_F / sqrt(2 n_s n_b)`` for an arbitrary ``phi``."""
    r = u.matrix - embed(g, phi, u.ordering)
    return float(np.linalg.norm(r, "fro") / np.sqrt(2 * u.dim))


def frob_distance(u: BipartiteUnitary, g) -> FrobDistanceReport:
    """Closed-form Frobenius distance and its optimal bath unitary.

    Examples
    --------
    >>> import numpy as np
    >>> u = BipartiteUnitary(np.diag([1, 1j]), n_s=2, n_b=1)
    >>> round(frob_distance(u, np.eye(2)).distance, 6)
    0.541196
    """
    gm = gamma(u, g)
    phi = gm.polar_unitary()
    # The residual at the optimum equals sqrt(1 - ||Gamma||_tr / n) exactly but
    # avoids the cancellation that formula suffers near zero distance.
    d = min(1.0, frob_objective(u, g, phi))
    return FrobDistanceReport(d, gm.trace_norm, phi, gm)


def frob_distance_exact_tensor(u_s, g) -> float:
    """Distance of ``U_S (x) U_B`` from ``G``; independent of ``U_B``.

    Evaluates ``sqrt(1 - |tr(G^dag U_S)| / n_s)`` as the residual
    ``||U_S - e^{i a} G||_F / sqrt(2 n_s)`` with ``a = arg tr(G^dag U_S)``.
    """
    u_s = check_unitary(u_s, "U_S")
    g = check_unitary(g, "G")
    if u_s.shape != g.shape:
        raise DimensionError(f"U_S has shape {u_s.shape} but G has shape {g.shape}")
    overlap = np.trace(g.conj().T @ u_s)
    if overlap == 0:
        return 1.0
    phase = overlap / abs(overlap)
    return float(min(1.0, np.linalg.norm(u_s - phase * g) / np.sqrt(2 * g.shape[0])))
