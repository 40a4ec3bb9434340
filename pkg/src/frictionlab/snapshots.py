"""Portable, binary-free snapshot formats (CSV payload + JSON sidecar)."""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from .errors import IoFailure
from .kinetic import KineticState, PhaseGrid
from .measures import ParticleEnsemble

ENSEMBLE_FORMAT = "ensemble-csv-v1"
KINETIC_FORMAT = "kinetic-csv-v1"


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def dump_ensemble(ens: ParticleEnsemble, path_csv: str, params: dict | None = None):
    """Write (mass, position, velocity) rows plus a JSON sidecar."""
    lines = ["mass,position,velocity"]
    vel = ens.velocities
    for i in range(ens.n):
        v = "nan" if vel is None else repr(float(vel[i]))
        lines.append(f"{float(ens.masses[i])!r},{float(ens.positions[i])!r},{v}")
    _atomic_write(path_csv, "\n".join(lines) + "\n")
    sidecar = {
        "format": ENSEMBLE_FORMAT,
        "time": ens.t,
        "n": ens.n,
        "has_velocities": vel is not None,
        "params": params or {},
    }
    _atomic_write(path_csv + ".json", json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_ensemble(path_csv: str) -> ParticleEnsemble:
    with open(path_csv + ".json") as fh:
        sidecar = json.load(fh)
    masses, positions, velocities = [], [], []
    with open(path_csv, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        for row in reader:
            masses.append(float(row[0]))
            positions.append(float(row[1]))
            velocities.append(float(row[2]))
    vel = np.array(velocities)
    has_vel = sidecar.get("has_velocities", not math.isnan(vel[0]))
    return ParticleEnsemble(
        positions=np.array(positions),
        masses=np.array(masses),
        velocities=vel if has_vel else None,
        t=float(sidecar["time"]),
    )


def dump_kinetic(state: KineticState, path_csv: str, params: dict | None = None):
    """Write the full phase density as (x_index, v_index, f) rows."""
    grid = state.grid
    lines = ["x_index,v_index,f"]
    for i in range(grid.nx):
        row = state.f[i]
        for j in range(grid.nv):
            lines.append(f"{i},{j},{float(row[j])!r}")
    _atomic_write(path_csv, "\n".join(lines) + "\n")
    sidecar = {
        "format": KINETIC_FORMAT,
        "time": state.t,
        "grid": {
            "x_min": grid.x_min,
            "x_max": grid.x_max,
            "v_min": grid.v_min,
            "v_max": grid.v_max,
            "nx": grid.nx,
            "nv": grid.nv,
        },
        "params": params or {},
    }
    _atomic_write(path_csv + ".json", json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_kinetic(path_csv: str) -> KineticState:
    with open(path_csv + ".json") as fh:
        sidecar = json.load(fh)
    g = sidecar["grid"]
    grid = PhaseGrid(
        x_min=g["x_min"], x_max=g["x_max"], v_min=g["v_min"], v_max=g["v_max"],
        nx=g["nx"], nv=g["nv"],
    )
    f = np.zeros((grid.nx, grid.nv))
    with open(path_csv, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            f[int(row[0]), int(row[1])] = float(row[2])
    return KineticState(f=f, t=float(sidecar["time"]), grid=grid)
