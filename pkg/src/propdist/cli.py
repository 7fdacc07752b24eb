"""Command-line interface.

Every subcommand writes one JSON result record per line on stdout;
diagnostics go to stderr. Exit codes:

    0  success
    1  numerical failure (e.g. a decomposition did not converge)
    2  unreadable or malformed input (including bad usage)
    3  dimension mismatch
    4  input matrix not unitary
    5  bath state not normalized
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import SolverConfig
from .control import alternate_optimize, planted_problem, random_problem, spec_variant_step
from .fidelity import (
    EnvNormalizationError,
    EnvState,
    check_sandwich,
    f_avg_upper,
    f_upper,
    fidelity_report,
    kraus_from_unitary,
)
from .formats import (
    FormatError,
    dump_record,
    file_digest,
    matrix_to_obj,
    read_matrix,
    read_problem,
    trace_csv,
    write_matrix,
    write_problem,
)
from .frobenius import BipartiteUnitary, Ordering, embed, frob_distance
from .matcore import (
    DecompositionError,
    DimensionError,
    NotUnitaryError,
    check_unitary,
    haar_random_state,
    haar_random_unitary,
)
from .spectral import spec_distance

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_PARSE = 2
EXIT_DIMENSION = 3
EXIT_NOT_UNITARY = 4
EXIT_ENV_NORM = 5


class UsageError(Exception):
    pass


def exit_code_for(exc: BaseException) -> int:
    cause = exc.__cause__ if isinstance(exc, FormatError) and exc.__cause__ else exc
    if isinstance(cause, EnvNormalizationError):
        return EXIT_ENV_NORM
    if isinstance(cause, NotUnitaryError):
        return EXIT_NOT_UNITARY
    if isinstance(cause, DimensionError):
        return EXIT_DIMENSION
    if isinstance(cause, DecompositionError):
        return EXIT_NUMERIC
    return EXIT_PARSE


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        max_iters=args.max_iters,
        tol=args.tol,
        window=args.window,
        restarts=args.restarts,
        seed=args.seed,
        step_scale=args.step_scale,
        inner_max_iters=args.inner_max_iters,
        fd_step=args.fd_step,
        single_step=args.single_step,
    )


def _input(path) -> dict:
    return {"path": str(path), "sha256": file_digest(path)}


def _load_gate(path, tol):
    g = read_matrix(path).matrix
    return check_unitary(g, f"G ({path})", tol)


def _load_bipartite(path, n_s_gate: int, args) -> BipartiteUnitary:
    mf = read_matrix(path)
    rows, cols = mf.matrix.shape
    if rows != cols:
        raise DimensionError(f"{path}: U must be square, got {rows}x{cols}")
    n_s = args.n_s or mf.n_s or n_s_gate
    if n_s != n_s_gate:
        raise DimensionError(f"{path}: n_s = {n_s} but G is {n_s_gate}x{n_s_gate}")
    if args.n_b or mf.n_b:
        n_b = args.n_b or mf.n_b
    elif rows % n_s == 0:
        n_b = rows // n_s
    else:
        raise DimensionError(f"{path}: dimension {rows} is not a multiple of n_s = {n_s}")
    if n_s * n_b != rows:
        raise DimensionError(f"{path}: dimension {rows} != n_s * n_b = {n_s} * {n_b}")
    ordering = Ordering.parse(args.ordering or mf.ordering or Ordering.SYSTEM_FIRST)
    try:
        return BipartiteUnitary(mf.matrix, n_s, n_b, ordering, tol=args.unitary_tol)
    except NotUnitaryError as exc:
        raise NotUnitaryError(f"U ({path})", exc.residual, exc.tol) from None


def _finish(record: dict, args, started: float) -> dict:
    if getattr(args, "timing", False):
        record["wall_time_s"] = time.perf_counter() - started
    return record


def _distance_one(u_path, g_path, g, args, cfg) -> dict:
    started = time.perf_counter()
    u = _load_bipartite(u_path, g.shape[0], args)
    record = {
        "command": "distance",
        "version": __version__,
        "inputs": {"u": _input(u_path), "g": _input(g_path)},
        "params": {"n_s": u.n_s, "n_b": u.n_b, "ordering": u.ordering.value, "norm": args.norm},
        "seed": cfg.seed,
    }
    if args.norm == "frobenius":
        rep = frob_distance(u, g)
        record["outputs"] = {
            "distance": rep.distance,
            "gamma_trace_norm": rep.gamma_trace_norm,
            "gamma_spectral_norm": rep.gamma.spectral_norm,
        }
        if args.emit_phi:
            write_matrix(args.emit_phi, rep.phi_opt, label="phi_opt")
    else:
        rep = spec_distance(u, g, cfg)
        record["solver"] = cfg.to_dict()
        record["outputs"] = {
            "lower": rep.lower,
            "upper": rep.upper,
            "gap": rep.gap,
            "phi_bar_singulars": [float(s) for s in rep.phi_bar_singulars],
            "iterations": rep.iterations,
            "converged": rep.converged,
            "gamma_trace_norm": frob_distance(u, g).gamma_trace_norm,
        }
        if args.emit_phi:
            write_matrix(args.emit_phi, rep.phi_hat, label="phi_hat")
        if args.emit_phi_bar:
            write_matrix(args.emit_phi_bar, rep.phi_bar, label="phi_bar")
    return _finish(record, args, started)


def cmd_distance(args) -> int:
    *u_paths, g_path = args.paths
    if not u_paths:
        raise UsageError("distance needs at least one U file followed by the G file")
    if len(u_paths) > 1 and (args.emit_phi or args.emit_phi_bar):
        raise UsageError("--emit-phi only works with a single U file")
    g = _load_gate(g_path, args.unitary_tol)
    cfg = _solver_config(args)

    def run(path):
        try:
            return _distance_one(path, g_path, g, args, cfg), None
        except Exception as exc:  # reported per file so the batch continues
            return None, exc

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(run, u_paths))
    code = EXIT_OK
    for path, (record, exc) in zip(u_paths, results):
        if exc is None:
            print(dump_record(record))
            continue
        if not isinstance(exc, (ValueError, FormatError, np.linalg.LinAlgError)):
            raise exc
        print(f"propdist: error: {exc}", file=sys.stderr)
        code = code or exit_code_for(exc)
    return code


def _env_from_args(args, n_b: int):
    if args.env:
        mf = read_matrix(args.env)
        if 1 not in mf.matrix.shape:
            raise DimensionError(f"{args.env}: bath state must be a row or column vector")
        vec = mf.matrix.ravel()
        if vec.size != n_b:
            raise DimensionError(f"{args.env}: bath state has dimension {vec.size}, expected {n_b}")
        return EnvState(vec), {"kind": "file", **_input(args.env)}
    if args.env_random is not None:
        return EnvState(haar_random_state(n_b, args.env_random)), {
            "kind": "random",
            "seed": args.env_random,
        }
    return None, {"kind": "average"}


def cmd_fidelity(args) -> int:
    started = time.perf_counter()
    g = _load_gate(args.g, args.unitary_tol)
    u = _load_bipartite(args.u, g.shape[0], args)
    cfg = _solver_config(args)
    env, env_info = _env_from_args(args, u.n_b)
    sandwich = check_sandwich(u, g)
    outputs = {
        "f_avg_upper": f_avg_upper(u, g),
        "distance": frob_distance(u, g).distance,
        "sandwich": {
            "lhs": sandwich.lhs,
            "mid": sandwich.mid,
            "rhs": sandwich.rhs,
            "holds": sandwich.holds,
        },
    }
    seed = args.env_random if args.env_random is not None else cfg.seed
    if env is not None:
        kraus = kraus_from_unitary(u, env)
        rep = fidelity_report(kraus, g, cfg)
        outputs.update(
            f_upper=rep.f_upper,
            f_lower=rep.f_lower,
            f_lower_converged=rep.converged,
            worst_density_top_eig_share=rep.worst_density_top_eig_share,
            near_rank_one=rep.near_rank_one,
            kraus_completeness_residual=kraus.completeness_residual,
        )
    else:
        rng = np.random.default_rng(cfg.seed)
        samples = np.array(
            [
                f_upper(kraus_from_unitary(u, EnvState(haar_random_state(u.n_b, rng))), g)
                for _ in range(args.mc_samples)
            ]
        )
        outputs.update(
            f_avg_mc_mean=float(samples.mean()),
            f_avg_mc_stderr=float(samples.std(ddof=1) / np.sqrt(samples.size))
            if samples.size > 1
            else None,
            mc_samples=args.mc_samples,
        )
    record = {
        "command": "fidelity",
        "version": __version__,
        "inputs": {"u": _input(args.u), "g": _input(args.g)},
        "params": {"n_s": u.n_s, "n_b": u.n_b, "ordering": u.ordering.value, "env": env_info},
        "solver": cfg.to_dict(),
        "seed": seed,
        "outputs": outputs,
    }
    print(dump_record(_finish(record, args, started)))
    return EXIT_OK


def _parse_theta0(text, problem, seed):
    n = problem.n_params
    if text == "random":
        rng = np.random.default_rng(seed)
        if problem.ball_center is not None:
            d = rng.standard_normal(n)
            r = problem.ball_radius * rng.uniform() ** (1.0 / n)
            return problem.ball_center + r * d / np.linalg.norm(d)
        lo, hi = problem.theta_lo, problem.theta_hi
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise UsageError("--theta0 random needs finite bounds")
        return rng.uniform(lo, hi)
    try:
        vals = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise UsageError(f"--theta0 must be comma-separated numbers or 'random', got {text!r}") from None
    if vals.size != n:
        raise DimensionError(f"--theta0 has {vals.size} values, problem needs {n}")
    return vals


def _default_theta0(problem):
    if problem.ball_center is not None:
        return problem.ball_center.copy()
    lo, hi = problem.theta_lo, problem.theta_hi
    mid = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi), 0.0)
    return problem.project(mid)


def cmd_optimize(args) -> int:
    started = time.perf_counter()
    problem, theta_file = read_problem(args.problem)
    cfg = _solver_config(args)
    if args.theta0 is not None:
        theta0 = _parse_theta0(args.theta0, problem, cfg.seed)
    elif theta_file is not None:
        theta0 = theta_file
    else:
        theta0 = _default_theta0(problem)
    run = alternate_optimize(problem, theta0, cfg)
    outputs = {
        "distance": run.distance,
        "initial_distance": run.objective_trace[0],
        "theta": [float(t) for t in run.theta],
        "phi": matrix_to_obj(run.phi),
        "outer_iterations": run.outer_iterations,
        "converged": run.converged,
        "trace_length": len(run.objective_trace),
    }
    if args.report_spectral:
        _, upper = spec_variant_step(problem, run.theta, cfg)
        outputs["spectral_upper"] = upper
    if args.trace_out:
        Path(args.trace_out).write_text(trace_csv(run.objective_trace))
    record = {
        "command": "optimize",
        "version": __version__,
        "inputs": {"problem": _input(args.problem)},
        "params": {
            "n_s": problem.n_s,
            "n_b": problem.n_b,
            "ordering": problem.ordering.value,
            "theta0": [float(t) for t in theta0],
        },
        "solver": cfg.to_dict(),
        "seed": cfg.seed,
        "outputs": outputs,
    }
    print(dump_record(_finish(record, args, started)))
    return EXIT_OK


def cmd_gen(args) -> int:
    n_s, n_b, seed = args.n_s, args.n_b, args.seed
    ordering = Ordering.parse(args.ordering or Ordering.SYSTEM_FIRST)
    rng = np.random.default_rng(seed)
    out = Path(args.out)
    written = {}
    if args.kind == "unitary":
        write_matrix(out, haar_random_unitary(n_s * n_b, rng), label="U", n_s=n_s, n_b=n_b, ordering=ordering)
    elif args.kind == "gate":
        write_matrix(out, haar_random_unitary(n_s, rng), label="G")
    elif args.kind == "product":
        g = haar_random_unitary(n_s, rng)
        phi = haar_random_unitary(n_b, rng)
        write_matrix(out, embed(g, phi, ordering), label="U", n_s=n_s, n_b=n_b, ordering=ordering)
        if args.gate_out:
            write_matrix(args.gate_out, g, label="G")
            written["gate"] = _input(args.gate_out)
    elif args.kind == "env":
        write_matrix(out, haar_random_state(n_b, rng).reshape(-1, 1), label="psi_B")
    elif args.kind == "problem":
        problem, theta_star, theta0 = planted_problem(
            n_s, n_b, segments=args.segments, dt=args.dt, radius=args.radius, seed=rng
        )
        write_problem(out, problem, theta0)
    else:  # random-problem
        problem = random_problem(n_s, n_b, segments=args.segments, dt=args.dt, seed=rng)
        write_problem(out, problem)
    written["out"] = _input(out)
    record = {
        "command": "gen",
        "version": __version__,
        "params": {"kind": args.kind, "n_s": n_s, "n_b": n_b, "ordering": ordering.value},
        "seed": seed,
        "outputs": written,
    }
    print(dump_record(record))
    return EXIT_OK


def _add_split_flags(p):
    p.add_argument("--n-s", type=int, help="system dimension (default: from file metadata or G)")
    p.add_argument("--n-b", type=int, help="bath dimension (default: from file metadata or dim/n_s)")
    p.add_argument("--ordering", choices=[o.value for o in Ordering], help="channel ordering of U")
    p.add_argument(
        "--unitary-tol", type=float, default=None,
        help="unitarity tolerance on inputs (default 1e-8*sqrt(dim))",
    )


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--max-iters", type=int)
    g.add_argument("--tol", type=float)
    g.add_argument("--window", type=int)
    g.add_argument("--restarts", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--step-scale", type=float, default=0.1)
    g.add_argument("--inner-max-iters", type=int, default=200)
    g.add_argument("--fd-step", type=float, default=1e-6)
    g.add_argument("--single-step", action="store_true")
    p.add_argument("--timing", action="store_true", help="add wall_time_s to the record (breaks byte-for-byte reproducibility)")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="propdist", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("distance", help="distance between U and G")
    p.add_argument("paths", nargs="+", metavar="PATH", help="U file(s) followed by the G file")
    _add_split_flags(p)
    p.add_argument("--norm", choices=["frobenius", "spectral"], default="frobenius")
    p.add_argument("--emit-phi", metavar="PATH", help="write the optimal (or rounded) bath unitary")
    p.add_argument("--emit-phi-bar", metavar="PATH", help="write the relaxed optimum (spectral only)")
    p.add_argument("--jobs", type=int, default=1, help="process several U files concurrently")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("fidelity", help="fidelity bounds and the distance-fidelity sandwich")
    p.add_argument("u")
    p.add_argument("g")
    _add_split_flags(p)
    env = p.add_mutually_exclusive_group(required=True)
    env.add_argument("--env", metavar="PATH", help="bath state file (n_b x 1 matrix)")
    env.add_argument("--env-random", metavar="SEED", type=int, help="Haar-random bath state")
    env.add_argument("--env-avg", action="store_true", help="average over bath states")
    p.add_argument("--mc-samples", type=int, default=10_000, help="Monte-Carlo samples for --env-avg")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("optimize", help="alternating control optimization")
    p.add_argument("problem")
    p.add_argument("--theta0", help="comma-separated start or 'random'")
    p.add_argument("--trace-out", metavar="CSV", help="write iter,distance per outer iteration")
    p.add_argument("--report-spectral", action="store_true", help="also bound the spectral distance at the result")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("gen", help="write random test inputs")
    p.add_argument(
        "--kind", required=True,
        choices=["unitary", "gate", "product", "env", "problem", "random-problem"],
    )
    p.add_argument("--n-s", type=int, default=2)
    p.add_argument("--n-b", type=int, default=2)
    p.add_argument("--ordering", choices=[o.value for o in Ordering])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--segments", type=int, default=4)
    p.add_argument("--dt", type=float, default=0.5)
    p.add_argument("--radius", type=float, default=0.1, help="start offset for planted problems")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--gate-out", help="also write G (product kind)")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"propdist: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValueError, FormatError, np.linalg.LinAlgError) as exc:
        print(f"propdist: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
