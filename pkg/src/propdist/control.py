"""Alternating design of control parameters against a bath-blind target gate.

The propagator comes from a piecewise-constant Hamiltonian

    H_m = H_drift + sum_k theta[k, m] H_k,   m = 0 .. N-1,
    U(theta) = exp(-i H_{N-1} dt) ... exp(-i H_0 dt),

and the design objective is ``||U(theta) - G (x) Phi||_F``. Each outer
iteration first solves for ``Phi`` exactly (polar factor of ``Gamma``) and
then improves ``theta`` locally with ``Phi`` frozen. Parameter updates are
only accepted when they lower the objective, so the recorded distance never
increases.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .config import SolverConfig
from .frobenius import BipartiteUnitary, Ordering, embed, frob_distance
from .matcore import (
    DimensionError,
    DomainError,
    as_matrix,
    check_unitary,
    haar_random_unitary,
    herm_eig,
)
from .spectral import spec_distance

__all__ = [
    "ControlProblem",
    "OptRun",
    "propagate",
    "segment_hamiltonians",
    "step_objective",
    "numerical_gradient",
    "alternate_optimize",
    "spec_variant_step",
    "random_problem",
    "planted_problem",
]

OUTER_MAX_ITERS = 100
OUTER_TOL = 1e-8


def _hermitian(m, name: str) -> np.ndarray:
    a = as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got {a.shape}")
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.conj().T) > 1e-10 * scale:
        raise DomainError(f"{name} is not Hermitian")
    return a


@dataclass(frozen=True)
class ControlProblem:
    """Piecewise-constant control problem.

    ``theta`` is a flat vector of length ``K * N`` laid out control-major:
    ``theta[k * N + m]`` multiplies ``h_controls[k]`` on segment ``m``.
    The admissible set is either a box (``theta_lo``/``theta_hi``) or a
    Euclidean ball (``ball_center``/``ball_radius``), not both.
    """

    h_controls: np.ndarray
    segments: int
    dt: float
    g_target: np.ndarray
    n_s: int
    n_b: int
    ordering: Ordering = Ordering.SYSTEM_FIRST
    h_drift: np.ndarray | None = None
    theta_lo: np.ndarray | None = None
    theta_hi: np.ndarray | None = None
    ball_center: np.ndarray | None = None
    ball_radius: float | None = None

    def __post_init__(self):
        dim = self.n_s * self.n_b
        object.__setattr__(self, "ordering", Ordering.parse(self.ordering))
        hc = [_hermitian(h, f"h_controls[{k}]") for k, h in enumerate(self.h_controls)]
        if not hc:
            raise DimensionError("at least one control Hamiltonian is required")
        for k, h in enumerate(hc):
            if h.shape != (dim, dim):
                raise DimensionError(f"h_controls[{k}] has shape {h.shape}, expected ({dim}, {dim})")
        object.__setattr__(self, "h_controls", np.stack(hc))
        drift = np.zeros((dim, dim), complex) if self.h_drift is None else _hermitian(self.h_drift, "h_drift")
        if drift.shape != (dim, dim):
            raise DimensionError(f"h_drift has shape {drift.shape}, expected ({dim}, {dim})")
        object.__setattr__(self, "h_drift", drift)
        if self.segments < 1:
            raise ValueError("segments must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        g = check_unitary(self.g_target, "g_target")
        if g.shape != (self.n_s, self.n_s):
            raise DimensionError(f"g_target has shape {g.shape}, expected ({self.n_s}, {self.n_s})")
        object.__setattr__(self, "g_target", g)

        n = self.n_params
        has_box = self.theta_lo is not None or self.theta_hi is not None
        has_ball = self.ball_center is not None or self.ball_radius is not None
        if has_box and has_ball:
            raise ValueError("give either box bounds or a ball, not both")
        lo = np.full(n, -np.inf) if self.theta_lo is None else np.asarray(self.theta_lo, float)
        hi = np.full(n, np.inf) if self.theta_hi is None else np.asarray(self.theta_hi, float)
        if lo.shape != (n,) or hi.shape != (n,):
            raise DimensionError(f"theta bounds must have length {n}")
        if np.any(lo > hi):
            raise ValueError("theta_lo must not exceed theta_hi")
        object.__setattr__(self, "theta_lo", lo)
        object.__setattr__(self, "theta_hi", hi)
        if has_ball:
            if self.ball_center is None or self.ball_radius is None:
                raise ValueError("a ball needs both center and radius")
            c = np.asarray(self.ball_center, float)
            if c.shape != (n,):
                raise DimensionError(f"ball_center must have length {n}")
            if not self.ball_radius >= 0:
                raise ValueError("ball_radius must be non-negative")
            object.__setattr__(self, "ball_center", c)

    @property
    def dim(self) -> int:
        return self.n_s * self.n_b

    @property
    def n_controls(self) -> int:
        return self.h_controls.shape[0]

    @property
    def n_params(self) -> int:
        return self.n_controls * self.segments

    def project(self, theta) -> np.ndarray:
        """Euclidean projection onto the admissible parameter set."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise DimensionError(f"theta has length {theta.size}, expected {self.n_params}")
        if self.ball_center is not None:
            off = theta - self.ball_center
            r = np.linalg.norm(off)
            if r > self.ball_radius:
                return self.ball_center + off * (self.ball_radius / r)
            return theta.copy()
        return np.clip(theta, self.theta_lo, self.theta_hi)


def segment_hamiltonians(p: ControlProblem, theta) -> np.ndarray:
    """Per-segment Hamiltonians; a stack of parameter vectors gives a stack of results."""
    theta = np.asarray(theta, dtype=float)
    coeffs = theta.reshape(theta.shape[:-1] + (p.n_controls, p.segments))
    return p.h_drift + np.einsum("...km,kab->...mab", coeffs, p.h_controls)


def _propagator(p: ControlProblem, theta) -> np.ndarray:
    """``U(theta)`` for one parameter vector or a stack ``(B, K*N)`` of them."""
    # segment Hamiltonians are real combinations of validated Hermitian terms
    vals, vecs = np.linalg.eigh(segment_hamiltonians(p, theta))
    steps = (vecs * np.exp(-1j * p.dt * vals)[..., None, :]) @ np.conj(np.swapaxes(vecs, -1, -2))
    u = steps[..., 0, :, :]
    for m in range(1, p.segments):
        u = steps[..., m, :, :] @ u
    return u


def propagate(p: ControlProblem, theta) -> BipartiteUnitary:
    """Propagator ``U(theta)``; parameters outside the admissible set are projected with a warning."""
    theta = np.asarray(theta, dtype=float)
    clipped = p.project(theta)
    if np.max(np.abs(clipped - theta), initial=0.0) > 1e-12:
        warnings.warn("theta outside the admissible set; projecting", RuntimeWarning, stacklevel=2)
    return BipartiteUnitary(_propagator(p, clipped), p.n_s, p.n_b, p.ordering, tol=1e-9)


def step_objective(p: ControlProblem, theta, phi: np.ndarray, target=None):
    """Squared normalized residual ``||U(theta) - G (x) phi||_F^2 / (2 n_s n_b)``.

    Vectorized over a leading stack axis of ``theta``. ``target`` may pass
    a precomputed ``G (x) phi``.
    """
    if target is None:
        target = embed(p.g_target, phi, p.ordering)
    r = _propagator(p, theta) - target
    val = np.sum(np.abs(r) ** 2, axis=(-2, -1)) / (2 * p.dim)
    return float(val) if np.ndim(val) == 0 else val


def numerical_gradient(f, theta: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient; ``f`` must accept a ``(2n, n)`` stack of points."""
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    offsets = h * np.eye(n)
    vals = np.asarray(f(np.concatenate([theta + offsets, theta - offsets])))
    return (vals[:n] - vals[n:]) / (2 * h)


def _improve_theta(p: ControlProblem, theta, phi, cfg: SolverConfig):
    """Projected gradient with Armijo backtracking on ``step_objective``.

    Trial steps start from the Barzilai-Borwein estimate; only strict
    decreases are accepted.
    """
    target = embed(p.g_target, phi, p.ordering)
    f = lambda th: step_objective(p, th, phi, target)  # noqa: E731
    iters = 1 if cfg.single_step else cfg.inner_max_iters
    fx = f(theta)
    t = 1.0
    prev = None
    for _ in range(iters):
        grad = numerical_gradient(f, theta, cfg.fd_step)
        if prev is not None:
            s, y = theta - prev[0], grad - prev[1]
            sy = float(s @ y)
            if sy > 0:
                t = float(s @ s) / sy
        accepted = False
        for _ in range(50):
            cand = p.project(theta - t * grad)
            step = cand - theta
            if not np.any(step):
                break
            fc = f(cand)
            if fc < fx and fc <= fx + 1e-4 * float(grad @ step):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        prev = (theta, grad)
        theta, fx = cand, fc
    return theta, fx


@dataclass(frozen=True)
class OptRun:
    theta: np.ndarray
    phi: np.ndarray
    objective_trace: list[float]
    outer_iterations: int
    converged: bool

    @property
    def distance(self) -> float:
        return self.objective_trace[-1]


def alternate_optimize(p: ControlProblem, theta0, cfg: SolverConfig | None = None) -> OptRun:
    """Alternate the exact bath-unitary fit with local parameter descent.

    ``objective_trace[0]`` is the Frobenius distance at ``theta0`` and
    entry ``j`` the distance after outer iteration ``j``. The loop ends when
    the parameter step cannot improve, when the relative decrease over an
    outer iteration falls below ``tol`` (default 1e-8), or after
    ``max_iters`` (default 100) outer iterations.
    """
    cfg = cfg or SolverConfig()
    max_outer = cfg.get("max_iters", OUTER_MAX_ITERS)
    tol = cfg.get("tol", OUTER_TOL)

    theta = p.project(theta0)
    rep = frob_distance(propagate(p, theta), p.g_target)
    phi = rep.phi_opt
    trace = [rep.distance]
    for it in range(1, max_outer + 1):
        new_theta, f_new = _improve_theta(p, theta, phi, cfg)
        if not np.any(new_theta != theta):
            return OptRun(theta, phi, trace, it - 1, True)
        rep = frob_distance(propagate(p, new_theta), p.g_target)
        if rep.distance > trace[-1]:
            return OptRun(theta, phi, trace, it - 1, True)
        decrease = trace[-1] - rep.distance
        theta, phi = new_theta, rep.phi_opt
        trace.append(rep.distance)
        if decrease <= tol * trace[-2]:
            return OptRun(theta, phi, trace, it, True)
    return OptRun(theta, phi, trace, max_outer, False)


def spec_variant_step(p: ControlProblem, theta, cfg: SolverConfig | None = None):
    """Two-norm replacement for the bath-unitary step.

    Returns the rounded unitary ``Phi_hat`` of the spectral relaxation and
    the resulting upper bound on the spectral distance at ``theta``.
    """
    rep = spec_distance(propagate(p, theta), p.g_target, cfg)
    return rep.phi_hat, rep.upper


def _random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T) / np.sqrt(n)


def random_problem(
    n_s: int = 2,
    n_b: int = 2,
    n_controls: int = 2,
    segments: int = 4,
    dt: float = 0.5,
    bound: float = 1.0,
    drift: bool = True,
    seed=None,
) -> ControlProblem:
    """Random Hermitian drift/controls, Haar-random target, box ``[-bound, bound]``."""
    rng = np.random.default_rng(seed)
    dim = n_s * n_b
    n = n_controls * segments
    return ControlProblem(
        h_controls=[_random_hermitian(dim, rng) for _ in range(n_controls)],
        segments=segments,
        dt=dt,
        g_target=haar_random_unitary(n_s, rng),
        n_s=n_s,
        n_b=n_b,
        h_drift=_random_hermitian(dim, rng) if drift else None,
        theta_lo=np.full(n, -bound),
        theta_hi=np.full(n, bound),
    )


def planted_problem(
    n_s: int = 2,
    n_b: int = 2,
    segments: int = 4,
    dt: float = 0.5,
    radius: float = 0.1,
    seed=None,
):
    """A problem whose target is reached exactly at a known ``theta_star``.

    Three controls: a system-only term, a bath-only term and a random
    coupling. At ``theta_star`` the coupling amplitudes are zero, so
    ``U(theta_star) = G (x) U_B`` with ``G`` the system-only propagator.

    Returns
    -------
    problem : ControlProblem
    theta_star : ndarray
    theta0 : ndarray
        A start at Euclidean distance ``radius`` from ``theta_star``.
    """
    rng = np.random.default_rng(seed)
    a = _random_hermitian(n_s, rng)
    b = _random_hermitian(n_b, rng)
    c = _random_hermitian(n_s * n_b, rng)
    controls = [np.kron(a, np.eye(n_b)), np.kron(np.eye(n_s), b), c]
    theta_star = rng.uniform(-1.0, 1.0, 3 * segments)
    theta_star[2 * segments:] = 0.0

    g = np.eye(n_s, dtype=np.complex128)
    for amp in theta_star[:segments]:
        vals, vecs = herm_eig(amp * a)
        g = (vecs * np.exp(-1j * dt * vals)) @ vecs.conj().T @ g

    problem = ControlProblem(
        h_controls=controls,
        segments=segments,
        dt=dt,
        g_target=g,
        n_s=n_s,
        n_b=n_b,
        theta_lo=theta_star - 1.0,
        theta_hi=theta_star + 1.0,
    )
    direction = rng.standard_normal(theta_star.size)
    theta0 = theta_star + radius * direction / np.linalg.norm(direction)
    return problem, theta_star, theta0
