"""CSV tables and run manifests.

Reals are written with 17 significant digits (``%.17g``), so a value survives a
write/read cycle exactly, and rows end with a bare ``\\n`` on every platform.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

__all__ = [
    "TRAJECTORY_COLUMNS",
    "PROFILE_COLUMNS",
    "ENVELOPE_COLUMNS",
    "write_csv",
    "read_csv",
    "trajectory_table",
    "profile_table",
    "envelope_table",
    "RunManifest",
]

TRAJECTORY_COLUMNS = ("f", "bary_x", "bary_y", "III", "II", "xi", "eta", "lam1", "lam2", "lam3", "rho1", "rho2", "rho3")
PROFILE_COLUMNS = ("y_plus", "u_plus", "k_plus", "omega_plus", "nu_t_ratio", "bary_x", "bary_y")
ENVELOPE_COLUMNS = ("y_plus", "u_min", "u_max", "baseline")


def _fmt(x) -> str:
    return "%.17g" % float(x)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and float data of a table written by :func:`write_csv`."""
    with open(path, encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader if row]
    return header, np.array(data, dtype=float).reshape(-1, len(header))


def trajectory_table(records):
    return [
        (r.f, *r.bary, *r.aim, *r.choi, *r.eigenvalues, *r.ellipsoid_semiaxes)
        for r in records
    ]


def profile_table(solution):
    s = solution
    cols = (s.y_plus, s.u_plus, s.k_plus, s.omega_plus, s.nu_t_ratio, s.bary_points[:, 0], s.bary_points[:, 1])
    return list(zip(*cols))


def envelope_table(envelope):
    e = envelope
    return list(zip(e.y_plus, e.u_min, e.u_max, e.baseline))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    subcommand: str
    config_digest: str | None = None
    tool_version: str = __version__
    started: str = field(default_factory=_now)
    finished: str | None = None
    outputs: list[str] = field(default_factory=list)
    cases: dict[str, dict] = field(default_factory=dict)

    def add_output(self, path) -> None:
        self.outputs.append(Path(path).name)

    def add_case(self, label: str, solution) -> None:
        self.cases[label] = {
            "status": solution.status,
            "converged": bool(solution.converged),
            "laminarized": bool(solution.laminarized),
            "diverged": bool(solution.diverged),
            "iterations": int(solution.iterations),
            "final_residual": float(solution.residual_history[-1]) if len(solution.residual_history) else None,
            "realizability_violations": int(solution.realizability_violations),
        }

    def write(self, path) -> Path:
        self.finished = _now()
        path = Path(path)
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
