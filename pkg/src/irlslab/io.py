"""Plain-text serialization: CSV matrices/vectors, traces, instance folders.

Matrix files are headerless CSV, one row per line, decimal reals written with
17 significant digits so that a write/read round trip is exact in float64.
Readers reject ragged rows and unparsable tokens with a line-numbered error.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .problems import CsInstance
from .solver import IterationTrace

FLOAT_FMT = "%.17g"

TRACE_COLUMNS = ("n", "eps", "J", "err1", "err2", "step_w", "status")


class CsvFormatError(ValueError):
    """Malformed numeric CSV; the message names the offending line."""


def _fmt(value: float) -> str:
    return FLOAT_FMT % value


def write_matrix(path, matrix) -> None:
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w") as fh:
        for row in m:
            fh.write(",".join(_fmt(v) for v in row))
            fh.write("\n")


def write_vector(path, vector) -> None:
    """One entry per line (a single-column matrix)."""
    v = np.asarray(vector, dtype=float).reshape(-1)
    with open(path, "w") as fh:
        for value in v:
            fh.write(_fmt(value))
            fh.write("\n")


def read_matrix(path) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                row = [float(c) for c in cells]
            except ValueError as exc:
                raise CsvFormatError(f"{path}: line {lineno}: {exc}") from exc
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise CsvFormatError(
                    f"{path}: line {lineno}: ragged row of {len(row)} values, "
                    f"expected {width}"
                )
            rows.append(row)
    if not rows:
        raise CsvFormatError(f"{path}: empty matrix file")
    return np.asarray(rows, dtype=float)


def read_vector(path) -> np.ndarray:
    """Read a vector stored as a single column or a single row."""
    m = read_matrix(path)
    if 1 not in m.shape and m.ndim == 2:
        raise CsvFormatError(
            f"{path}: expected a vector (one row or one column), got shape {m.shape}"
        )
    return m.reshape(-1)


def write_params(path, params: dict) -> None:
    """key = value lines; floats carry 17 significant digits."""
    with open(path, "w") as fh:
        for key, value in params.items():
            if isinstance(value, float):
                text = _fmt(value)
            else:
                text = str(value)
            fh.write(f"{key} = {text}\n")


def read_params(path) -> dict:
    out: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def write_trace(trace: IterationTrace, path, include_ratio: bool = False) -> None:
    """Trace CSV with header ``n,eps,J,err1,err2,step_w,status``.

    ``include_ratio`` appends an ``s`` column for failure-family runs.
    """
    cols = list(TRACE_COLUMNS)
    with_s = include_ratio and trace.s is not None
    if with_s:
        cols.append("s")
    with open(path, "w") as fh:
        fh.write(",".join(cols))
        fh.write("\n")
        for i in range(len(trace)):
            cells = [
                str(int(trace.n[i])),
                _fmt(trace.eps[i]),
                _fmt(trace.J[i]),
                _fmt(trace.err1[i]),
                _fmt(trace.err2[i]),
                _fmt(trace.step_w[i]),
                trace.row_status(i),
            ]
            if with_s:
                cells.append(_fmt(trace.s[i]))
            fh.write(",".join(cells))
            fh.write("\n")


def read_trace(path) -> dict[str, np.ndarray]:
    """Columns of a trace CSV keyed by header name (status as strings)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    out: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        col = [r[j] for r in rows]
        if name == "status":
            out[name] = np.asarray(col)
        elif name == "n":
            out[name] = np.asarray(col, dtype=int)
        else:
            out[name] = np.asarray([float(c) for c in col])
    return out


def save_counterexample(instance, out_dir, extra: dict | None = None) -> Path:
    """Materialize a failure instance: A.csv, b.csv, zstar.csv, z0.csv, params.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "A.csv", instance.A)
    write_vector(out / "b.csv", instance.b)
    write_vector(out / "zstar.csv", instance.z_star)
    write_vector(out / "z0.csv", instance.z0)
    write_vector(out / "xstar.csv", instance.x_star)
    params = {
        "k": instance.k,
        "gamma": instance.gamma,
        "delta": instance.delta,
        "z0_position": instance.z0_position,
        "alpha": instance.alpha,
        "xi": instance.xi,
        "nu": instance.nu,
        "s_star": instance.s_star,
        "limit_gap": instance.limit_gap,
    }
    params.update(extra or {})
    write_params(out / "params.txt", params)
    return out


def save_cs_instance(instance: CsInstance, out_dir) -> Path:
    """Materialize a sensing instance: Phi.csv, y.csv, xstar.csv, params.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "Phi.csv", instance.phi)
    write_vector(out / "y.csv", instance.y)
    if instance.x_star is not None:
        write_vector(out / "xstar.csv", instance.x_star)
    params = {"rows": instance.phi.shape[0], "cols": instance.phi.shape[1]}
    params.update(instance.meta)
    write_params(out / "params.txt", params)
    return out
