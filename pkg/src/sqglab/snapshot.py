"""Snapshot files: ASCII header ``SQGF1 n=<N> l=<L> t=<t>`` then N*N little-endian doubles."""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .field import Grid, RealField

MAGIC = "SQGF1"
_HEADER = re.compile(r"^SQGF(\d+) n=(\d+) l=(\S+) t=(\S+)$")


class SnapshotFormatError(ValueError):
    pass


def write_snapshot(f: RealField, t: float, path) -> None:
    header = f"{MAGIC} n={f.grid.n} l={f.grid.l!r} t={float(t)!r}\n".encode("ascii")
    payload = np.ascontiguousarray(f.values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_snapshot(path) -> tuple[RealField, float]:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise SnapshotFormatError("missing header line")
    try:
        line = raw[:nl].decode("ascii")
    except UnicodeDecodeError as exc:
        raise SnapshotFormatError("header is not ASCII") from exc
    m = _HEADER.match(line)
    if not line.startswith("SQGF") or m is None:
        raise SnapshotFormatError(f"bad magic or header: {line[:40]!r}")
    if m.group(1) != "1":
        raise SnapshotFormatError(f"unknown format version {m.group(1)}")
    n = int(m.group(2))
    try:
        l, t = float(m.group(3)), float(m.group(4))
    except ValueError as exc:
        raise SnapshotFormatError("malformed l or t in header") from exc
    payload = raw[nl + 1:]
    if len(payload) != 8 * n * n:
        raise SnapshotFormatError(f"payload holds {len(payload)} bytes, header n={n} needs {8 * n * n}")
    vals = np.frombuffer(payload, dtype="<f8").reshape(n, n)
    return RealField(Grid(n, l), vals), t
