"""Bracketing the spectral-norm distance.

    d_2(U, G) = min_{Phi unitary} ||U - G (x) Phi||_2 / sqrt(2)

has no closed form. Relaxing the unitary constraint to the contraction
ball ``Phi^dag Phi <= I`` gives a convex problem whose optimum ``Phi_bar``
yields a lower bound; rounding ``Phi_bar`` to its unitary polar factor
``Phi_hat`` yields an upper bound.

The relaxation is solved by projected subgradient descent: the subgradient
of ``sigma_max(U - G (x) Phi)`` comes from the top singular pair, and the
projection clips singular values at one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SolverConfig
from .frobenius import (
    BipartiteUnitary,
    check_gate,
    contract,
    embed,
    frob_distance,
)
from .matcore import haar_random_unitary, svd

__all__ = [
    "SpecDistanceReport",
    "RelaxedSolution",
    "relaxed_objective",
    "relaxed_subgradient",
    "project_contraction",
    "solve_relaxed_phi",
    "spec_distance",
    "spec_objective",
]

DEFAULT_MAX_ITERS = 5000
DEFAULT_TOL = 1e-6
DEFAULT_WINDOW = 100


@dataclass(frozen=True)
class RelaxedSolution:
    phi_bar: np.ndarray
    objective: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class SpecDistanceReport:
    lower: float
    upper: float
    phi_bar: np.ndarray
    phi_hat: np.ndarray
    phi_bar_singulars: np.ndarray
    iterations: int
    converged: bool

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def spec_objective(u: BipartiteUnitary, g: np.ndarray, phi: np.ndarray) -> float:
    """``||U - G (x) phi||_2 / sqrt(2)``."""
    return relaxed_objective(u, g, phi) / np.sqrt(2)


def relaxed_objective(u: BipartiteUnitary, g: np.ndarray, phi: np.ndarray) -> float:
    r = u.matrix - embed(g, phi, u.ordering)
    return float(np.linalg.norm(r, 2))


def relaxed_subgradient(u: BipartiteUnitary, g: np.ndarray, phi: np.ndarray):
    """Value and a subgradient of ``sigma_max(U - G (x) phi)`` w.r.t. ``phi``.

    The subgradient ``D`` is taken with respect to the real inner product
    ``Re tr(A^dag B)``, so the directional derivative along ``E`` is
    ``Re tr(D^dag E)`` wherever the top singular value is simple.

    Returns
    -------
    value : float
    grad : ndarray, shape (n_b, n_b)
    gap : float
        ``sigma_1 - sigma_2`` of the residual (``inf`` for a 1x1 residual).
    """
    r = u.matrix - embed(g, phi, u.ordering)
    w, s, vh = np.linalg.svd(r)
    top = np.outer(w[:, 0], vh[0, :])
    grad = -contract(top, g, u.n_s, u.n_b, u.ordering)
    gap = s[0] - s[1] if len(s) > 1 else np.inf
    return float(s[0]), grad, float(gap)


def project_contraction(phi: np.ndarray) -> np.ndarray:
    """Nearest (Frobenius) matrix with spectral norm at most one."""
    w, s, vh = np.linalg.svd(phi)
    return (w * np.minimum(s, 1.0)) @ vh


def _polar(phi):
    w, _, vh = np.linalg.svd(phi)
    return w @ vh


def _descend(u, g, phi0, c, max_iters, tol, window, shrink=0.25, stages=8):
    """Projected subgradient with steps ``c/sqrt(k)``.

    Each time the best value stalls over ``window`` iterations the run
    restarts from the best point with ``c`` shrunk by ``shrink``; the last
    stall ends the run. ``max_iters`` bounds the total over all stages.
    """
    phi = project_contraction(phi0)
    best_phi = phi
    best, grad, _ = relaxed_subgradient(u, g, phi)
    history = [best]
    total, k, stage = 0, 0, 0
    while total < max_iters:
        total += 1
        k += 1
        norm = np.linalg.norm(grad)
        if norm == 0.0:
            return best_phi, best, total - 1, True
        phi = project_contraction(phi - (c / np.sqrt(k)) * grad / norm)
        value, grad, _ = relaxed_subgradient(u, g, phi)
        if value < best:
            best, best_phi = value, phi
        history.append(best)
        if k >= window and history[-window - 1] - best < tol:
            stage += 1
            if stage > stages:
                return best_phi, best, total, True
            c *= shrink
            k, history = 0, [best]
            phi = best_phi
            best, grad, _ = relaxed_subgradient(u, g, phi)
    return best_phi, best, max_iters, False


def solve_relaxed_phi(u: BipartiteUnitary, g, cfg: SolverConfig | None = None) -> RelaxedSolution:
    """Minimize ``||U - G (x) Phi||_2`` over contractions ``Phi``.

    The first start is the Frobenius optimum; ``cfg.restarts`` further
    starts are Haar-random unitaries scaled by 0.5. Steps are
    ``step_scale * ||G||_2 / sqrt(k)`` along the normalized subgradient.
    A stall (best objective improving by less than ``tol`` over ``window``
    iterations) restarts from the best point with a smaller step scale,
    and the final stall ends the run. The unitary rounding of the result
    (or zero) replaces it when no worse, so the reported bracket is never inverted.
    Running out of iterations sets ``converged=False``; it never raises.
    """
    cfg = cfg or SolverConfig()
    g = check_gate(u, g)
    max_iters = cfg.get("max_iters", DEFAULT_MAX_ITERS)
    tol = cfg.get("tol", DEFAULT_TOL)
    window = cfg.get("window", DEFAULT_WINDOW)
    c = cfg.step_scale * np.linalg.norm(g, 2)

    rng = np.random.default_rng(cfg.seed)
    starts = [frob_distance(u, g).phi_opt]
    starts += [0.5 * haar_random_unitary(u.n_b, rng) for _ in range(cfg.restarts)]

    best = None
    for phi0 in starts:
        run = _descend(u, g, phi0, c, max_iters, tol, window)
        if best is None or run[1] < best[1]:
            best = run
    phi_bar, value, iters, converged = best
    # the unitary rounding and zero are feasible too; keep either when no worse
    for cand in (_polar(phi_bar), np.zeros_like(phi_bar)):
        cand_value = relaxed_objective(u, g, cand)
        if cand_value <= value:
            phi_bar, value = cand, cand_value
    return RelaxedSolution(phi_bar, value, iters, converged)


def spec_distance(u: BipartiteUnitary, g, cfg: SolverConfig | None = None) -> SpecDistanceReport:
    """Lower and upper bounds on the spectral distance ``d_2(U, G)``.

    Note that ``d_2`` itself can exceed one (up to ``sqrt(2)``); the lower
    bound never exceeds ``1/sqrt(2)`` since ``Phi = 0`` is feasible.
    """
    g = check_gate(u, g)
    sol = solve_relaxed_phi(u, g, cfg)
    dec = svd(sol.phi_bar)
    phi_hat = _polar(sol.phi_bar)
    lower = sol.objective / np.sqrt(2)
    upper = spec_objective(u, g, phi_hat)
    return SpecDistanceReport(
        lower=float(lower),
        upper=float(upper),
        phi_bar=sol.phi_bar,
        phi_hat=phi_hat,
        phi_bar_singulars=dec.singulars,
        iterations=sol.iterations,
        converged=sol.converged,
    )
