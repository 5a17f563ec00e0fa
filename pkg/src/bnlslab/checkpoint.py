"""Bit-exact binary checkpoints of a simulation state.

Layout, all little-endian::

    b"BNLS"            magic
    u32 version        (1)
    u32 N, u32 n
    f64 L, p, t, dt
    n**N complex128    field samples, interleaved (re, im), C order

The step counter is not stored; it is recovered as round(t / dt).
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import BNLSError, CorruptCheckpoint
from .evolution import init_state
from .spectral import as_physical, make_grid, physical_field

__all__ = ["MAGIC", "VERSION", "write_checkpoint", "read_checkpoint"]

MAGIC = b"BNLS"
VERSION = 1
_HEADER = struct.Struct("<4sIII4d")
_DTYPE = np.dtype("<c16")


def write_checkpoint(state, path):
    """Write ``state`` to ``path`` atomically (temp file + rename)."""
    if not state.healthy:
        raise ValueError("refusing to checkpoint an unhealthy state")
    prm = state.prm
    u = np.ascontiguousarray(as_physical(state.u).data, dtype=_DTYPE)
    head = _HEADER.pack(MAGIC, VERSION, prm.N, prm.n, prm.L, prm.p, state.t, state.dt)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(head)
        fh.write(u.tobytes(order="C"))
    os.replace(tmp, path)
    return path


def read_checkpoint(path, kappa=1.0, dealias=True, watchdog=None):
    """Load a checkpoint into a fresh :class:`SimState`.

    Watchdog references (initial amplitude, mass, energy) are taken from the
    stored field, since the original initial data is not part of the file.
    """
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise CorruptCheckpoint(f"{path}: file shorter than the header")
    magic, version, N, n, L, p, t, dt = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CorruptCheckpoint(f"{path}: unsupported checkpoint version {version}")
    try:
        prm = make_grid(N, p, n, L)
    except BNLSError as exc:
        raise CorruptCheckpoint(f"{path}: invalid header ({exc})") from exc
    expected = _HEADER.size + n**N * _DTYPE.itemsize
    if len(blob) != expected:
        raise CorruptCheckpoint(
            f"{path}: length {len(blob)} bytes, expected {expected} for n={n}, N={N}"
        )
    data = np.frombuffer(blob, dtype=_DTYPE, offset=_HEADER.size).reshape((n,) * N)
    u = physical_field(data.astype(complex), prm)
    steps = int(round(t / dt)) if dt > 0 else 0
    return init_state(u, dt, kappa=kappa, dealias=dealias, watchdog=watchdog, t=t, step_count=steps)
