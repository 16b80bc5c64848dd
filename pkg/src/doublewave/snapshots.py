"""Field snapshot I/O: one JSON header line, then little-endian complex64, row-major.

The header carries everything needed to rebuild the GridSpec, so a snapshot
file is self-describing. CSV export is for small grids and eyeballing.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fields import Boundary, GridSpec, ScalarComplexField

MAGIC = "doublewave-field-v1"


def write_snapshot(path: str | Path, fld: ScalarComplexField) -> None:
    g = fld.grid
    has_mask = fld.excluded is not None and bool(np.any(fld.excluded))
    header = {
        "format": MAGIC,
        "dims": g.ndim,
        "extents": [[lo, hi] for lo, hi in g.extents],
        "points": list(g.points),
        "dt": g.dt,
        "boundary": g.boundary.value,
        "time_label": fld.time_label,
        "field_name": fld.name,
        "mask": "byte" if has_mask else "none",
    }
    payload = np.ascontiguousarray(fld.values.astype("<c8"))
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload.tobytes())
        if has_mask:
            fh.write(np.ascontiguousarray(fld.excluded.astype(np.uint8)).tobytes())


def read_snapshot(path: str | Path) -> ScalarComplexField:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        body = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != MAGIC:
        raise ValueError("not a field snapshot: %s" % path)
    points = tuple(int(n) for n in header["points"])
    grid = GridSpec(
        extents=tuple((float(lo), float(hi)) for lo, hi in header["extents"]),
        points=points,
        dt=float(header["dt"]),
        boundary=Boundary(header["boundary"]),
    )
    count = int(np.prod(points))
    values = np.frombuffer(body, dtype="<c8", count=count).reshape(points)
    excluded = None
    if header.get("mask", "none") == "byte":
        offset = count * np.dtype("<c8").itemsize
        excluded = np.frombuffer(body, dtype=np.uint8, count=count,
                                 offset=offset).reshape(points).astype(bool)
    return ScalarComplexField(
        grid=grid,
        values=values.astype(np.complex128),
        time_label=float(header["time_label"]),
        name=str(header["field_name"]),
        excluded=excluded,
    )


def format_float(x: float) -> str:
    """Shortest round-trip decimal form, used by every delimited writer."""
    return repr(float(x))


def write_field_csv(path: str | Path, fld: ScalarComplexField) -> None:
    g = fld.grid
    mesh = g.meshgrid()
    coords = [m.ravel() for m in mesh]
    re = fld.values.real.ravel()
    im = fld.values.imag.ravel()
    names = ["x", "y", "z"][: g.ndim]
    lines = [",".join(names + ["re", "im"])]
    for idx in range(re.size):
        row = [format_float(c[idx]) for c in coords]
        row.append(format_float(re[idx]))
        row.append(format_float(im[idx]))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
