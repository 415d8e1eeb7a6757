"""Readers for the published run-directory contract.

Time series are CSVs with fixed headers; fields are raw little-endian
float64 in C order next to a JSON sidecar with the grid geometry. The
readers are deliberately independent of the solver package: the files
are the interface.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SchemaMismatch

SIDECAR_KEYS = {"d", "nx", "nv", "dx", "dv", "x0", "v0", "time"}
MANIFEST_KEYS = {"subcommand", "config", "artifacts"}


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header plus float rows; every row must match the header width."""
    path = Path(path)
    if not path.is_file():
        raise SchemaMismatch(f"missing file: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path} is empty, expected a header") \
                from None
        rows = []
        for n, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaMismatch(
                    f"{path} line {n}: {len(row)} cells under a "
                    f"{len(header)}-column header")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise SchemaMismatch(
                    f"{path} line {n}: unreadable number") from None
    if rows:
        return header, np.array(rows, dtype=np.float64)
    return header, np.zeros((0, len(header)))


@dataclass(frozen=True)
class FieldData:
    """One phase-space field: values (nx, nv) for d = 1, (nx, nx, nv, nv)
    for d = 2, plus the cell-centered geometry from the sidecar."""

    values: np.ndarray
    d: int
    dx: float
    dv: float
    x0: float
    v0: float
    time: float


def read_field(path) -> FieldData:
    path = Path(path)
    sidecar = path.with_suffix(".json")
    if not path.is_file():
        raise SchemaMismatch(f"missing file: {path}")
    if not sidecar.is_file():
        raise SchemaMismatch(f"missing sidecar: {sidecar}")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{sidecar}: {exc}") from None
    if not SIDECAR_KEYS <= set(meta):
        missing = sorted(SIDECAR_KEYS - set(meta))
        raise SchemaMismatch(f"{sidecar} lacks keys {missing}")
    d, nx, nv = int(meta["d"]), int(meta["nx"]), int(meta["nv"])
    if d not in (1, 2):
        raise SchemaMismatch(f"{sidecar}: d must be 1 or 2, got {d}")
    shape = (nx, nv) if d == 1 else (nx, nx, nv, nv)
    raw = path.read_bytes()
    expect = 8 * int(np.prod(shape))
    if len(raw) != expect:
        raise SchemaMismatch(
            f"{path} holds {len(raw)} bytes but the sidecar implies "
            f"{expect}")
    values = np.frombuffer(raw, dtype="<f8").reshape(shape)
    return FieldData(values=values, d=d, dx=float(meta["dx"]),
                     dv=float(meta["dv"]), x0=float(meta["x0"]),
                     v0=float(meta["v0"]), time=float(meta["time"]))


def read_manifest(run_dir) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.is_file():
        raise SchemaMismatch(f"missing file: {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: {exc}") from None
    if not isinstance(manifest, dict) or not MANIFEST_KEYS <= set(manifest):
        raise SchemaMismatch(
            f"{path} lacks the keys {sorted(MANIFEST_KEYS)}")
    return manifest
