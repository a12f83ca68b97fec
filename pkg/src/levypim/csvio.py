"""CSV emission and parsing with bit-exact round trips.

All floating point values are written with 17 significant digits, which is
enough for float64 round trips, so rerunning a manifest can be checked by
byte comparison of the output files.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import LevyPimError, ParameterError
from .systems import Trajectory

_FMT = "%.17g"


def _fmt(x: float) -> str:
    return _FMT % float(x)


def emit_trajectory_csv(traj: Trajectory, path_id: int, destination) -> None:
    """Write one trajectory as ``path_id,step,t,value[,value_dim2,...]``."""
    dim = traj.states.shape[1]
    header = "path_id,step,t,value"
    if dim > 1:
        header += "".join(f",value_dim{d + 1}" for d in range(1, dim))
    try:
        with open(destination, "w", newline="") as f:
            f.write(header + "\n")
            for step, (t, row) in enumerate(zip(traj.times, traj.states)):
                vals = ",".join(_fmt(v) for v in row)
                f.write(f"{path_id},{step},{_fmt(t)},{vals}\n")
    except OSError as exc:
        raise LevyPimError(f"cannot write trajectory CSV {destination}: {exc}") from exc


def parse_trajectory_csv(source):
    """Inverse of :func:`emit_trajectory_csv`; returns (path_id, Trajectory)."""
    with open(source, "r", newline="") as f:
        header = f.readline().strip().split(",")
        if header[:3] != ["path_id", "step", "t"]:
            raise ParameterError(f"unrecognized trajectory header in {source}")
        dim = len(header) - 3
        times, states, path_id = [], [], None
        for line in f:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            path_id = int(parts[0])
            times.append(float(parts[2]))
            states.append([float(v) for v in parts[3:3 + dim]])
    return path_id, Trajectory(np.asarray(times), np.asarray(states))


def emit_error_report_csv(report, destination) -> None:
    """Level table with the fitted slope as a one-line footer record."""
    try:
        with open(destination, "w", newline="") as f:
            f.write("l,macro_dt,micro_dt,M,K,accepted,E_p,stderr\n")
            for lv in report.levels:
                f.write(",".join([
                    str(lv.level), _fmt(lv.macro_dt), _fmt(lv.micro_dt),
                    str(lv.micro_count), str(lv.n_paths), str(lv.accepted),
                    _fmt(lv.e_p), _fmt(lv.stderr)]) + "\n")
            if report.slope is not None:
                f.write(f"# log2_slope={_fmt(report.slope)},"
                        f"half_width={_fmt(report.slope_half_width)}\n")
    except OSError as exc:
        raise LevyPimError(f"cannot write error report {destination}: {exc}") from exc


def emit_table_csv(header, rows, destination) -> None:
    """Small generic helper for diagnostic tables (floats 17 digits)."""
    try:
        with open(destination, "w", newline="") as f:
            f.write(",".join(header) + "\n")
            for row in rows:
                f.write(",".join(
                    _fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    except OSError as exc:
        raise LevyPimError(f"cannot write table {destination}: {exc}") from exc
