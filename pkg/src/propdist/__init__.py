"""Distance and fidelity between a bipartite unitary propagator and a smaller ideal gate."""

from .config import SolverConfig
from .control import ControlProblem, OptRun, alternate_optimize, propagate, spec_variant_step
from .fidelity import (
    EnvState,
    KrausSet,
    check_sandwich,
    f_avg_upper,
    f_lower,
    f_upper,
    fidelity_report,
    kraus_from_unitary,
)
from .frobenius import (
    BipartiteUnitary,
    Ordering,
    block,
    frob_distance,
    frob_distance_exact_tensor,
    gamma,
)
from .matcore import haar_random_unitary, is_unitary
from .spectral import solve_relaxed_phi, spec_distance

__version__ = "0.1.0"

__all__ = [
    "SolverConfig",
    "ControlProblem",
    "OptRun",
    "alternate_optimize",
    "propagate",
    "spec_variant_step",
    "EnvState",
    "KrausSet",
    "check_sandwich",
    "f_avg_upper",
    "f_lower",
    "f_upper",
    "fidelity_report",
    "kraus_from_unitary",
    "BipartiteUnitary",
    "Ordering",
    "block",
    "frob_distance",
    "frob_distance_exact_tensor",
    "gamma",
    "haar_random_unitary",
    "is_unitary",
    "solve_relaxed_phi",
    "spec_distance",
]
