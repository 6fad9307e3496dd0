"""File formats: binary field snapshots and trajectory diagnostics CSV.

Snapshot layout (all little-endian)::

    offset  size  field
    0       4     magic b"HSNP"
    4       2     format version (uint16, currently 1)
    6       2     reserved, zero (uint16)
    8       4     n, points per axis (uint32)
    12      4     component count (uint32; 1 scalar, 3 vector)
    16      8     period (float64)
    24      8     viscosity nu (float64)
    32      8     time t (float64)
    40      ...   components * n**3 float64 samples, C order,
                  component-major, index order (x1, x2, x3)

Floats are stored as raw IEEE-754 doubles, so a write/read cycle is
bit-exact.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import GridSpec, ScalarField, VectorField
from .solver import Trajectory, TrajectorySample

MAGIC = b"HSNP"
VERSION = 1
_HEADER = struct.Struct("<4sHHIIddd")

L2_KEYS = ("u_l2", "grad_l2", "gradh_l2", "grad_gradh_l2", "lap_l2")


@dataclass(frozen=True)
class Snapshot:
    grid: GridSpec
    t: float
    values: np.ndarray

    @property
    def field(self):
        if self.values.shape[0] == 1:
            return ScalarField(self.grid, self.values[0])
        return VectorField.from_array(self.grid, self.values)


def write_snapshot(path, field, t: float = 0.0) -> None:
    if isinstance(field, ScalarField):
        data = field.values[None]
    else:
        data = field.array
    grid = field.grid
    header = _HEADER.pack(MAGIC, VERSION, 0, grid.n, data.shape[0], grid.period, grid.nu, float(t))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def read_snapshot(path) -> Snapshot:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, version, _, n, ncomp, period, nu, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    expected = _HEADER.size + 8 * ncomp * n**3
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(ncomp, n, n, n)
    grid = GridSpec(n=n, nu=nu, period=period)
    return Snapshot(grid, t, values.astype(np.float64))


def format_float(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_rows(path, header, rows) -> None:
    """CSV with ``repr`` floats so reruns are byte-identical."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v
                             for v in row])


# ---------------------------------------------------------------------------
# Trajectories


def _snapshot_keys(traj: Trajectory) -> list[str]:
    keys = []
    for s in traj.samples:
        if s.has_snapshot_diagnostics:
            keys = [k for k in s.diagnostics if k not in L2_KEYS]
            break
    return keys


def snapshot_name(step: int) -> str:
    return f"snapshot_{step:08d}.hsnp"


def write_trajectory(traj: Trajectory, directory) -> list[Path]:
    """Write ``diagnostics.csv``, ``trajectory.json`` and any stored snapshots.

    Returns the written paths.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    extra = _snapshot_keys(traj)
    header = ["step", "t", "blowup", "has_snapshot_diagnostics", *L2_KEYS, *extra]
    rows = []
    written = []
    for s in traj.samples:
        row = [s.step, float(s.t), int(s.blowup), int(s.has_snapshot_diagnostics)]
        row += [float(s.diagnostics[k]) for k in L2_KEYS]
        row += [float(s.diagnostics[k]) if k in s.diagnostics else "" for k in extra]
        rows.append(row)
    path = directory / "diagnostics.csv"
    write_rows(path, header, rows)
    written.append(path)
    snaps = [s for s in traj.samples if s.snapshot is not None]
    if snaps:
        snapdir = directory / "snapshots"
        snapdir.mkdir(exist_ok=True)
        for s in snaps:
            p = snapdir / snapshot_name(s.step)
            write_snapshot(p, s.snapshot, s.t)
            written.append(p)
    meta = {
        "n": traj.grid.n,
        "nu": traj.grid.nu,
        "dt": traj.dt,
        "betas": [format_float(b) for b in traj.betas],
        "triples": [list(t) for t in traj.triples],
        "serrin_betas": [format_float(b) for b in traj.serrin_betas],
        "blowup": traj.blowup,
        "blowup_time": traj.blowup_time,
        "max_divergence": traj.max_divergence,
    }
    path = directory / "trajectory.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


def read_trajectory(directory, *, load_snapshots: bool = True) -> Trajectory:
    directory = Path(directory)
    meta = json.loads((directory / "trajectory.json").read_text())
    grid = GridSpec(n=int(meta["n"]), nu=float(meta["nu"]))
    traj = Trajectory(
        grid, float(meta["dt"]),
        betas=tuple(float(b) for b in meta["betas"]),
        triples=tuple(tuple(t) for t in meta["triples"]),
        serrin_betas=tuple(float(b) for b in meta["serrin_betas"]),
        blowup=bool(meta["blowup"]), blowup_time=meta["blowup_time"],
        max_divergence=float(meta.get("max_divergence", 0.0)),
    )
    snapdir = directory / "snapshots"
    with open(directory / "diagnostics.csv", newline="") as fh:
        for rec in csv.DictReader(fh):
            step = int(rec.pop("step"))
            sample = TrajectorySample(
                t=float(rec.pop("t")), step=step, diagnostics={},
                blowup=bool(int(rec.pop("blowup"))),
                has_snapshot_diagnostics=bool(int(rec.pop("has_snapshot_diagnostics"))),
            )
            sample.diagnostics = {k: float(v) for k, v in rec.items() if v != ""}
            snap = snapdir / snapshot_name(step)
            if load_snapshots and snap.exists():
                loaded = read_snapshot(snap)
                sample.snapshot = VectorField(loaded.field.components, solenoidal=True)
            traj.samples.append(sample)
    return traj
