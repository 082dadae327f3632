"""CSV/JSON persistence for solutions and simulation traces."""

import csv
import json
from pathlib import Path

import numpy as np

from .exceptions import InputDomainError
from .sim import TRACE_COLUMNS
from .trajopt.solver import CollocationSolution

SOLUTION_COLUMNS = (["t"] + [f"q{j}" for j in (1, 2, 3)] + [f"qd{j}" for j in (1, 2, 3)]
                    + [f"tau{j}" for j in (1, 2, 3)])


def _write_csv(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
    return path


def _read_csv(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise InputDomainError(f"{path}: no data rows")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise InputDomainError(f"{path}: {exc}") from None
    if data.shape[1] != len(header):
        raise InputDomainError(f"{path}: ragged rows")
    return header, data


def write_solution_csv(solution, path):
    data = np.column_stack([solution.t, solution.q, solution.qd, solution.tau])
    return _write_csv(path, SOLUTION_COLUMNS, data)


def read_solution_csv(path):
    """Load a solution written by :func:`write_solution_csv`.

    ``objective`` is left as nan; audit the result to get energies.
    """
    header, data = _read_csv(path)
    if header != SOLUTION_COLUMNS:
        raise InputDomainError(f"{path}: expected columns {','.join(SOLUTION_COLUMNS)}")
    return CollocationSolution(t=data[:, 0], q=data[:, 1:4], qd=data[:, 4:7],
                               tau=data[:, 7:10], objective=float("nan"))


def write_trace_csv(trace, path):
    return _write_csv(path, TRACE_COLUMNS, trace.to_array())


def read_trace_columns(path):
    """Load a trace CSV as a dict of arrays keyed by column group."""
    header, data = _read_csv(path)
    if header != TRACE_COLUMNS:
        raise InputDomainError(f"{path}: not a simulation trace")
    col = {name: i for i, name in enumerate(header)}

    def grp(prefix):
        return data[:, [col[f"{prefix}{j}"] for j in (1, 2, 3)]]

    return {"t": data[:, 0], "q_ref": grp("qd_ref"), "q": grp("q"), "qdot": grp("qdot"),
            "tau_d": grp("tau"), "r": grp("r"), "saturated": grp("sat") > 0.5,
            "p_motor": grp("p_motor"), "v_cap": data[:, col["v_cap"]],
            "i_cap": data[:, col["i_cap"]]}


def sniff(path):
    """Return ``"solution"`` or ``"trace"`` from a CSV header."""
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), [])
    header = [h.strip() for h in header]
    if header == SOLUTION_COLUMNS:
        return "solution"
    if header == TRACE_COLUMNS:
        return "trace"
    raise InputDomainError(f"{path}: unrecognized CSV header")


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")
    return path
