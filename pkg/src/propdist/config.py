from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by the iterative solvers.

    ``None`` fields fall back to the calling solver's own default, so one
    config can be passed through the whole pipeline.

    Attributes
    ----------
    max_iters : int, optional
        Iteration cap (outer iterations for the alternating scheme).
    tol : float, optional
        Stopping tolerance on objective improvement.
    window : int, optional
        Number of iterations over which improvement is measured.
    restarts : int
        Extra random starts for the spectral relaxation.
    seed : int
        Seed for every random draw a solver makes.
    step_scale : float
        Base step ``c`` of the diminishing subgradient steps ``c / sqrt(k)``.
    inner_max_iters : int
        Iteration cap for the parameter step of the alternating scheme.
    fd_step : float
        Central-difference step for numerical gradients.
    single_step : bool
        Take one descent step per outer iteration instead of solving the
        parameter step to local convergence.
    """

    max_iters: int | None = None
    tol: float | None = None
    window: int | None = None
    restarts: int = 3
    seed: int = 0
    step_scale: float = 0.1
    inner_max_iters: int = 200
    fd_step: float = 1e-6
    single_step: bool = False

    def get(self, name: str, default):
        value = getattr(self, name)
        return default if value is None else value

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
