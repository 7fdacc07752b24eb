"""Channel fidelity bounds built from the bipartite propagator.

With the bath prepared in a pure state ``psi_B`` and the joint unitary in
bath-first ordering, the reduced dynamics on the system has Kraus elements
``S_k = sum_i psi_B[i] U_(k, i)``. For an ideal gate ``G`` the worst-case
pure-state fidelity is bracketed by

    f_lower = min_rho sum_k |tr(G^dag S_k rho)|^2     (convex, over densities)
    f_upper = sum_k |tr(G^dag S_k)|^2 / n_s^2

and averaging ``f_upper`` over bath states with ``E[psi psi^dag] = I/n_b``
gives ``||Gamma||_F^2 / (n_s^2 n_b)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SolverConfig
from .frobenius import BipartiteUnitary, Ordering, check_gate, frob_distance, gamma
from .matcore import DimensionError, DomainError, as_matrix, dagger

__all__ = [
    "EnvNormalizationError",
    "EnvState",
    "KrausSet",
    "LowerBound",
    "FidelityReport",
    "SandwichCheck",
    "kraus_from_unitary",
    "apply_channel",
    "f_upper",
    "f_upper_from_gamma",
    "lower_objective",
    "lower_gradient",
    "project_simplex",
    "project_density",
    "f_lower",
    "fidelity_report",
    "f_avg_upper",
    "check_sandwich",
]

NEAR_RANK_ONE = 0.99
SANDWICH_SLACK = 1e-9


class EnvNormalizationError(ValueError):
    """Bath state amplitudes are not normalized."""


@dataclass(frozen=True)
class EnvState:
    """Pure bath state; amplitudes must have unit norm within ``1e-10``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=np.complex128).ravel()
        if a.size == 0 or not np.all(np.isfinite(a)):
            raise DomainError("bath state must be a non-empty finite vector")
        norm2 = float(np.sum(np.abs(a) ** 2))
        if abs(norm2 - 1.0) > 1e-10:
            raise EnvNormalizationError(f"bath state has squared norm {norm2!r}, expected 1")
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def basis(cls, n: int, k: int = 0) -> "EnvState":
        v = np.zeros(n, dtype=np.complex128)
        v[k] = 1.0
        return cls(v)


@dataclass(frozen=True)
class KrausSet:
    """Operation elements ``S_k`` (stacked as ``elements[k]``)."""

    elements: np.ndarray
    completeness_residual: float

    @classmethod
    def from_elements(cls, elements, tol: float = 1e-8) -> "KrausSet":
        """Validate completeness ``sum_k S_k^dag S_k = I`` to within ``tol``."""
        s = np.asarray(elements, dtype=np.complex128)
        if s.ndim == 2:
            s = s[None]
        if s.ndim != 3 or s.shape[1] != s.shape[2]:
            raise DimensionError(f"Kraus elements must be square matrices, got shape {s.shape}")
        total = np.einsum("kba,kbc->ac", s.conj(), s)
        res = float(np.linalg.norm(total - np.eye(s.shape[1]), "fro"))
        if res > tol:
            raise DomainError(f"Kraus set is not trace preserving: residual {res:.3e}")
        return cls(s, res)

    @property
    def n_s(self) -> int:
        return self.elements.shape[1]

    def __len__(self) -> int:
        return self.elements.shape[0]


def kraus_from_unitary(u: BipartiteUnitary, env: EnvState) -> KrausSet:
    """Kraus elements of the system channel induced by ``u`` and a pure bath state.

    System-first inputs are converted to bath-first with the tensor swap
    before the blocks are read off.
    """
    if u.ordering is Ordering.SYSTEM_FIRST:
        u = u.reordered()
    if env.dim != u.n_b:
        raise DimensionError(f"bath state has dimension {env.dim}, expected {u.n_b}")
    t = u.blocks()  # t[k, a, i, b] = (U_(k, i))[a, b]
    s = np.einsum("i,kaib->kab", env.amplitudes, t)
    return KrausSet.from_elements(s)


def apply_channel(kraus: KrausSet, rho: np.ndarray) -> np.ndarray:
    s = kraus.elements
    return np.einsum("kab,bc,kdc->ad", s, rho, s.conj())


def _gate_products(kraus: KrausSet, g) -> np.ndarray:
    g = as_matrix(g, "G")
    if g.shape != (kraus.n_s, kraus.n_s):
        raise DimensionError(f"G has shape {g.shape}, Kraus elements are {kraus.n_s}x{kraus.n_s}")
    return np.einsum("ba,kbc->kac", g.conj(), kraus.elements)  # G^dag S_k


def f_upper(kraus: KrausSet, g) -> float:
    a = _gate_products(kraus, g)
    overlaps = np.trace(a, axis1=1, axis2=2)
    return float(np.sum(np.abs(overlaps) ** 2) / kraus.n_s**2)


def f_upper_from_gamma(gam: np.ndarray, env: EnvState, n_s: int) -> float:
    """``<psi_B| Gamma^dag Gamma |psi_B> / n_s^2`` with bath-first ``Gamma``."""
    v = gam @ env.amplitudes
    return float(np.real(np.vdot(v, v)) / n_s**2)


def lower_objective(products: np.ndarray, rho: np.ndarray) -> float:
    """``q(rho) = sum_k |tr(A_k rho)|^2`` for ``A_k = G^dag S_k``."""
    c = np.einsum("kab,ba->k", products, rho)
    return float(np.sum(np.abs(c) ** 2))


def lower_gradient(products: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Hermitian gradient of ``q`` w.r.t. the inner product ``Re tr(X^dag Y)``.

    ``grad = sum_k conj(c_k) A_k + c_k A_k^dag`` with ``c_k = tr(A_k rho)``.
    """
    c = np.einsum("kab,ba->k", products, rho)
    g = np.einsum("k,kab->ab", c.conj(), products)
    return g + dagger(g)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def project_density(m: np.ndarray) -> np.ndarray:
    """Nearest density matrix (Frobenius) to ``m``."""
    h = 0.5 * (m + dagger(m))
    vals, vecs = np.linalg.eigh(h)
    p = project_simplex(vals)
    return (vecs * p) @ dagger(vecs)


@dataclass(frozen=True)
class LowerBound:
    value: float
    worst_density: np.ndarray
    iterations: int
    converged: bool

    @property
    def top_eig_share(self) -> float:
        return float(np.linalg.eigvalsh(self.worst_density)[-1])


def f_lower(kraus: KrausSet, g, cfg: SolverConfig | None = None) -> LowerBound:
    """Minimize ``sum_k |tr(G^dag S_k rho)|^2`` over density matrices.

    Projected gradient from ``rho = I / n_s`` with Armijo backtracking
    (shrink 0.5, sufficient-decrease 1e-4); each iteration first tries
    twice the last accepted step. Stops once the objective drops by less
    than ``tol`` (1e-10) over ``window`` (50) iterations or after
    ``max_iters`` (2000).
    """
    cfg = cfg or SolverConfig()
    max_iters = cfg.get("max_iters", 2000)
    tol = cfg.get("tol", 1e-10)
    window = cfg.get("window", 50)
    beta, armijo = 0.5, 1e-4

    a = _gate_products(kraus, g)
    n = kraus.n_s
    rho = np.eye(n, dtype=np.complex128) / n
    q = lower_objective(a, rho)
    step = 1.0
    history = [q]
    for k in range(1, max_iters + 1):
        grad = lower_gradient(a, rho)
        t = 2.0 * step
        for _ in range(60):
            cand = project_density(rho - t * grad)
            q_cand = lower_objective(a, cand)
            decrease = np.real(np.vdot(grad, cand - rho))
            if q_cand <= q + armijo * decrease:
                break
            t *= beta
        else:
            history.append(q)
            return LowerBound(q, rho, k, True)
        if q_cand <= q:
            rho, q, step = cand, q_cand, t
        history.append(q)
        if k >= window and history[-window - 1] - q < tol:
            return LowerBound(q, rho, k, True)
    return LowerBound(q, rho, max_iters, False)


@dataclass(frozen=True)
class FidelityReport:
    f_upper: float
    f_lower: float
    worst_density: np.ndarray
    worst_density_top_eig_share: float
    converged: bool

    @property
    def near_rank_one(self) -> bool:
        """Worst-case density is essentially pure, so ``f_lower`` tracks the pure-state fidelity."""
        return self.worst_density_top_eig_share >= NEAR_RANK_ONE


def fidelity_report(kraus: KrausSet, g, cfg: SolverConfig | None = None) -> FidelityReport:
    lb = f_lower(kraus, g, cfg)
    return FidelityReport(
        f_upper=f_upper(kraus, g),
        f_lower=lb.value,
        worst_density=lb.worst_density,
        worst_density_top_eig_share=lb.top_eig_share,
        converged=lb.converged,
    )


def f_avg_upper(u: BipartiteUnitary, g) -> float:
    """Bath-averaged upper bound ``||Gamma||_F^2 / (n_s^2 n_b)``.

    ``Gamma`` is formed in ``u``'s own ordering; both orderings give the
    same matrix for the same physical operator.
    """
    gm = gamma(u, g)
    return float(np.sum(np.abs(gm.gamma) ** 2) / (u.n_s**2 * u.n_b))


@dataclass(frozen=True)
class SandwichCheck:
    lhs: float
    mid: float
    rhs: float
    holds: bool


def check_sandwich(u: BipartiteUnitary, g) -> SandwichCheck:
    """Evaluate ``(1 - d_F)^2 <= <f_upper> <= 1 - d_F^2``."""
    g = check_gate(u, g)
    d = frob_distance(u, g).distance
    lhs = (1.0 - d) ** 2
    mid = f_avg_upper(u, g)
    rhs = 1.0 - d**2
    holds = lhs <= mid + SANDWICH_SLACK and mid <= rhs + SANDWICH_SLACK
    return SandwichCheck(lhs, mid, rhs, bool(holds))
