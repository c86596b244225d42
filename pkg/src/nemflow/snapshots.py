"""Binary snapshot format for simulation states.

Byte layout (all integers and floats little endian):

    offset  size  content
    0       8     magic b"NEMFSNAP"
    8       4     format version, uint32 (currently 1)
    12      4     dim, uint32 (2 or 3)
    16      8*d   resolution per axis, uint64
    ..      8*d   period per axis, float64
    ..      8     time stamp, float64
    ..      4     field count, uint32
    per field descriptor, in order:
    ..      4     name length L, uint32
    ..      L     name, UTF-8
    ..      4     rank, uint32 (0 scalar, 1 vector, 2 tensor)
    then, per field in the same order:
    ..      8*m   float64 samples, C (row-major) order over the shape
                  (dim,)*rank + resolution

No alignment padding anywhere.
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import Field, Grid, ScalarField, TensorField, VectorField

MAGIC = b"NEMFSNAP"
VERSION = 1
_RANK_TO_CLASS = {0: ScalarField, 1: VectorField, 2: TensorField}


def write_snapshot(path, grid: Grid, time: float, fields: dict) -> None:
    """Write named fields ({name: Field}) in the documented layout."""
    names = list(fields)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, grid.dim))
        fh.write(struct.pack(f"<{grid.dim}Q", *grid.resolution))
        fh.write(struct.pack(f"<{grid.dim}d", *grid.period))
        fh.write(struct.pack("<d", float(time)))
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", fields[name].rank))
        for name in names:
            arr = np.ascontiguousarray(fields[name].values, dtype="<f8")
            fh.write(arr.tobytes())


def read_snapshot(path) -> tuple[Grid, float, dict]:
    """Read a snapshot; returns (grid, time, {name: Field})."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path}: not a snapshot file (bad magic)")
        version, dim = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {version}")
        resolution = struct.unpack(f"<{dim}Q", fh.read(8 * dim))
        period = struct.unpack(f"<{dim}d", fh.read(8 * dim))
        (time,) = struct.unpack("<d", fh.read(8))
        (count,) = struct.unpack("<I", fh.read(4))
        descriptors = []
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", fh.read(4))
            descriptors.append((name, rank))
        grid = Grid(resolution, period)
        fields = {}
        for name, rank in descriptors:
            shape = (dim,) * rank + grid.shape
            n_vals = int(np.prod(shape))
            raw = fh.read(8 * n_vals)
            arr = np.frombuffer(raw, dtype="<f8").reshape(shape)
            fields[name] = _RANK_TO_CLASS[rank].from_values(grid, arr.copy())
    return grid, time, fields


def write_state(path, state) -> None:
    """Write a solver state (u, n, theta, and pressure when present)."""
    fields = {"u": state.u, "n": state.n, "theta": state.theta}
    if state.p is not None:
        fields["p"] = state.p
    write_snapshot(path, state.grid, state.t, fields)


def read_state(path):
    from .solver import SimState

    grid, time, fields = read_snapshot(path)
    return SimState(t=time, u=fields["u"], n=fields["n"],
                    theta=fields["theta"], p=fields.get("p"))
