"""On-disk formats: matrix files, control-problem files, result records, CSV traces.

A matrix file is JSON::

    {"rows": 2, "cols": 2,
     "data": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 1.0]],
     "label": "G", "n_s": 2, "n_b": 1, "ordering": "system_first"}

``data`` is row-major ``[re, im]`` pairs. Floats are written with Python's
shortest round-trip repr, so write-then-read is exact.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .control import ControlProblem
from .frobenius import Ordering
from .matcore import DimensionError, DomainError

__all__ = [
    "FormatError",
    "ProblemFileError",
    "MatrixFile",
    "matrix_to_obj",
    "matrix_from_obj",
    "read_matrix",
    "write_matrix",
    "read_problem",
    "problem_to_obj",
    "write_problem",
    "file_digest",
    "dump_record",
    "trace_csv",
]


class FormatError(ValueError):
    """A file could not be parsed into the expected structure."""


class ProblemFileError(FormatError):
    def __init__(self, path, line: int | None, where: str, message: str):
        loc = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{loc}: {where}: {message}" if where else f"{loc}: {message}")
        self.path = path
        self.line = line
        self.cause = message


@dataclass
class MatrixFile:
    matrix: np.ndarray
    label: str | None = None
    n_s: int | None = None
    n_b: int | None = None
    ordering: Ordering | None = None


def matrix_to_obj(m, label=None, n_s=None, n_b=None, ordering=None) -> dict[str, Any]:
    m = np.atleast_2d(np.asarray(m, dtype=np.complex128))
    obj: dict[str, Any] = {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in m.ravel()],
    }
    if label is not None:
        obj["label"] = label
    if n_s is not None:
        obj["n_s"] = int(n_s)
    if n_b is not None:
        obj["n_b"] = int(n_b)
    if ordering is not None:
        obj["ordering"] = Ordering.parse(ordering).value
    return obj


def _positive_int(obj, key, where):
    v = obj.get(key)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise FormatError(f"{where}: '{key}' must be a positive integer, got {v!r}")
    return v


def matrix_from_obj(obj, where: str = "matrix") -> MatrixFile:
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected an object with rows/cols/data")
    rows = _positive_int(obj, "rows", where)
    cols = _positive_int(obj, "cols", where)
    if rows is None or cols is None:
        raise FormatError(f"{where}: 'rows' and 'cols' are required")
    data = obj.get("data")
    if not isinstance(data, list):
        raise FormatError(f"{where}: 'data' must be a list of [re, im] pairs")
    if len(data) != rows * cols:
        raise FormatError(f"{where}: 'data' has {len(data)} entries, expected rows*cols = {rows * cols}")
    vals = np.empty(rows * cols, dtype=np.complex128)
    for idx, pair in enumerate(data):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)
        ):
            raise FormatError(f"{where}: data[{idx}] must be a [re, im] pair of numbers")
        if not (math.isfinite(pair[0]) and math.isfinite(pair[1])):
            raise FormatError(f"{where}: data[{idx}] is not finite")
        vals[idx] = complex(pair[0], pair[1])
    ordering = obj.get("ordering")
    if ordering is not None:
        try:
            ordering = Ordering.parse(ordering)
        except ValueError:
            raise FormatError(f"{where}: unknown ordering {ordering!r}") from None
    label = obj.get("label")
    return MatrixFile(
        vals.reshape(rows, cols),
        label=None if label is None else str(label),
        n_s=_positive_int(obj, "n_s", where),
        n_b=_positive_int(obj, "n_b", where),
        ordering=ordering,
    )


def _load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        return text, json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc


def read_matrix(path) -> MatrixFile:
    _, obj = _load_json(path)
    return matrix_from_obj(obj, str(path))


def write_matrix(path, m, **meta) -> None:
    Path(path).write_text(json.dumps(matrix_to_obj(m, **meta)) + "\n")


def _key_line(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    pos = text.find(needle)
    if pos < 0:
        return None
    return text.count("\n", 0, pos) + 1


def _float_vector(value, n, where):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.full(n, float(value))
    if not isinstance(value, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        raise FormatError(f"{where}: expected a number or a list of numbers")
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise FormatError(f"{where}: expected {n} values, got {arr.size}")
    return arr


def read_problem(path) -> tuple[ControlProblem, np.ndarray | None]:
    """Parse a control-problem file; returns the problem and an optional ``theta0``.

    Errors name the offending field and the line of its top-level key.
    """
    text, obj = _load_json(path)

    def fail(key, msg, where=None):
        line = _key_line(text, key) if key else None
        raise ProblemFileError(path, line, where or key or "", msg)

    def matrix(key, value, where):
        try:
            return matrix_from_obj(value, where).matrix
        except FormatError as exc:
            fail(key, str(exc).split(": ", 1)[-1], where)

    def vector(key, value, n):
        try:
            return _float_vector(value, n, key)
        except FormatError as exc:
            fail(key, str(exc).split(": ", 1)[-1])

    if not isinstance(obj, dict):
        fail(None, "top level must be a JSON object")
    for key in ("n_s", "n_b", "segments"):
        v = obj.get(key)
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            fail(key, f"required positive integer, got {v!r}")
    dt = obj.get("dt")
    if isinstance(dt, bool) or not isinstance(dt, (int, float)) or not dt > 0:
        fail("dt", f"required positive number, got {dt!r}")
    try:
        ordering = Ordering.parse(obj.get("ordering", "system_first"))
    except ValueError:
        fail("ordering", f"unknown ordering {obj.get('ordering')!r}")

    controls = obj.get("h_controls")
    if not isinstance(controls, list) or not controls:
        fail("h_controls", "required non-empty list of matrices")
    h_controls = [matrix("h_controls", c, f"h_controls[{k}]") for k, c in enumerate(controls)]
    if "g_target" not in obj:
        fail(None, "missing required field 'g_target'")
    g_target = matrix("g_target", obj["g_target"], "g_target")
    drift = obj.get("h_drift")
    h_drift = None if drift is None else matrix("h_drift", drift, "h_drift")

    n = len(controls) * obj["segments"]
    kwargs: dict[str, Any] = {}
    if "theta_lo" in obj or "theta_hi" in obj:
        kwargs["theta_lo"] = vector("theta_lo", obj.get("theta_lo", -math.inf), n)
        kwargs["theta_hi"] = vector("theta_hi", obj.get("theta_hi", math.inf), n)
    if "ball" in obj:
        ball = obj["ball"]
        if not isinstance(ball, dict) or "center" not in ball or "radius" not in ball:
            fail("ball", 'expected {"center": [...], "radius": r}')
        kwargs["ball_center"] = vector("ball", ball["center"], n)
        radius = ball["radius"]
        if isinstance(radius, bool) or not isinstance(radius, (int, float)):
            fail("ball", f"radius must be a number, got {radius!r}")
        kwargs["ball_radius"] = float(radius)
    theta0 = None
    if obj.get("theta0") is not None:
        theta0 = vector("theta0", obj["theta0"], n)

    try:
        problem = ControlProblem(
            h_controls=h_controls,
            segments=obj["segments"],
            dt=float(dt),
            g_target=g_target,
            n_s=obj["n_s"],
            n_b=obj["n_b"],
            ordering=ordering,
            h_drift=h_drift,
            **kwargs,
        )
    except (DimensionError, DomainError, ValueError) as exc:
        msg = str(exc)
        key = next(
            (k for k in ("h_controls", "h_drift", "g_target", "theta_lo", "ball") if k in msg),
            None,
        )
        if key is None and "theta" in msg:
            key = "theta_lo"
        raise ProblemFileError(path, _key_line(text, key) if key else None, key or "", msg) from exc
    return problem, theta0


def problem_to_obj(p: ControlProblem, theta0=None) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "n_s": p.n_s,
        "n_b": p.n_b,
        "ordering": p.ordering.value,
        "segments": p.segments,
        "dt": float(p.dt),
        "h_drift": matrix_to_obj(p.h_drift) if np.any(p.h_drift) else None,
        "h_controls": [matrix_to_obj(h) for h in p.h_controls],
        "g_target": matrix_to_obj(p.g_target),
    }
    if p.ball_center is not None:
        obj["ball"] = {"center": p.ball_center.tolist(), "radius": float(p.ball_radius)}
    elif np.all(np.isfinite(p.theta_lo)) and np.all(np.isfinite(p.theta_hi)):
        obj["theta_lo"] = p.theta_lo.tolist()
        obj["theta_hi"] = p.theta_hi.tolist()
    if theta0 is not None:
        obj["theta0"] = np.asarray(theta0, float).tolist()
    return obj


def write_problem(path, p: ControlProblem, theta0=None) -> None:
    Path(path).write_text(json.dumps(problem_to_obj(p, theta0), indent=1) + "\n")


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def dump_record(record: dict[str, Any]) -> str:
    """Canonical one-line JSON for a result record."""
    return json.dumps(record, sort_keys=True, allow_nan=False, separators=(",", ":"))


def trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iter", "distance"])
    for i, d in enumerate(trace):
        w.writerow([i, repr(float(d))])
    return buf.getvalue()
