"""On-disk data contract: CSV time series, raw f64 fields, manifests.

Time series are text CSVs with fixed documented headers; fields are raw
little-endian float64 in C order next to a JSON sidecar carrying the
grid geometry; every run directory ends with a manifest.json written
last, whose listed artifacts are guaranteed to exist. Values are
serialized with repr(), so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IOContractError
from .grid import DistributionField, ObservableSeries, PhaseGrid
from .monokinetic import MONO_HEADER
from .scattering import ScatterRow
from .solver import SupportRow

SUPPORT_HEADER = ["t", "outflow", "clipped", "q_outside", "width_max"]
NL_HEADER = ["t", "nl_l1"]
PICARD_HEADER = ["n", "increment"]
CONVERGENCE_HEADER = ["N", "t", "l1_distance"]
SCATTERING_HEADER = ["t1", "t2", "residual", "tail_t1"]
HPROFILE_HEADER = ["v", "h"]
COMPARE_HEADER = ["t", "l1_distance"]
HOMOGENEOUS_HEADER = ["t", "linf", "R", "energy", "entropy"]
MANIFEST_NAME = "manifest.json"

SCHEMA_VERSIONS = {
    "observables": 1,
    "support": 1,
    "nonlinearity": 1,
    "picard_increments": 1,
    "mono_series": 1,
    "particles_obs": 1,
    "convergence": 1,
    "scattering": 1,
    "hprofile": 1,
    "compare": 1,
    "homogeneous": 1,
    "field": 1,
    "manifest": 1,
}


def _cell(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path, expected_header: list[str]) -> np.ndarray:
    """Read a documented CSV into an (n_rows, n_cols) float array.

    A header-only file yields shape (0, n_cols). Missing files and
    header mismatches violate the contract.
    """
    path = Path(path)
    if not path.is_file():
        raise IOContractError(f"missing file: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(expected_header):
            raise IOContractError(
                f"{path}: header {header} does not match "
                f"expected {list(expected_header)}")
        data = [[float(v) for v in row] for row in reader]
    return np.array(data, dtype=np.float64).reshape(-1, len(expected_header))


def observables_header(d: int, p_list=(2.0,)) -> list[str]:
    return ObservableSeries(p_list=tuple(p_list)).header(d)


def write_observables(path, series: ObservableSeries, d: int) -> None:
    rows = []
    for r in series.rows:
        row = [r.t, r.mass, *np.atleast_1d(r.momentum), r.energy, r.entropy,
               *np.atleast_1d(r.lp), r.radius_v, r.radius_ft,
               r.energy_rate, r.entropy_rate, *np.atleast_1d(r.lp_rates)]
        rows.append(row)
    _write_csv(path, series.header(d), rows)


def write_support(path, rows: list[SupportRow]) -> None:
    _write_csv(path, SUPPORT_HEADER,
               [[r.t, r.outflow, r.clipped, r.q_outside, r.width_max]
                for r in rows])


def write_nonlinearity(path, times, values) -> None:
    _write_csv(path, NL_HEADER, zip(times, values))


def write_picard_increments(path, increments) -> None:
    _write_csv(path, PICARD_HEADER,
               [[n, inc] for n, inc in enumerate(increments, start=1)])


def write_mono_series(path, rows) -> None:
    _write_csv(path, MONO_HEADER.split(","),
               [[r.t, r.min_gap, r.max_dxu, r.peak_rho] for r in rows])


def particle_header(d: int) -> list[str]:
    return ["t"] + [f"mom_{k + 1}" for k in range(d)] + ["vel_diameter"]


def write_particle_obs(path, rows, d: int) -> None:
    _write_csv(path, particle_header(d),
               [[r.t, *np.atleast_1d(r.momentum), r.vel_diameter]
                for r in rows])


def write_convergence(path, rows) -> None:
    _write_csv(path, CONVERGENCE_HEADER, rows)


def write_scattering(path, rows: list[ScatterRow]) -> None:
    _write_csv(path, SCATTERING_HEADER,
               [[r.t1, r.t2, r.residual, r.tail_t1] for r in rows])


def write_compare(path, rows) -> None:
    _write_csv(path, COMPARE_HEADER, rows)


def write_homogeneous(path, rows) -> None:
    _write_csv(path, HOMOGENEOUS_HEADER, rows)


def write_hprofile(path, v_centers, h) -> None:
    if np.ndim(h) != 1:
        raise ValueError("hprofile CSV is defined for d = 1 profiles")
    _write_csv(path, HPROFILE_HEADER, zip(v_centers, h))


# ----------------------------------------------------------------------
# field files: <name>.f64 (little-endian, C order) + <name>.json sidecar
# ----------------------------------------------------------------------

def _sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def _snap_length(n: int, delta: float) -> float:
    """Box length whose derived spacing reproduces `delta` bitwise.

    n * delta carries rounding noise (400 * 0.05 != 20 exactly), so
    prefer the shortest decimal in its neighborhood that divides back to
    exactly `delta`; grids then compare equal across a save/load cycle.
    """
    raw = n * delta
    for places in (15, 12, 9, 6):
        cand = round(raw, places)
        if cand > 0 and cand / n == delta:
            return cand
    return raw


def write_field(path, f: DistributionField) -> None:
    path = Path(path)
    g = f.grid
    meta = {
        "d": g.d, "nx": g.nx, "nv": g.nv, "dx": g.dx, "dv": g.dv,
        "x0": 0.0, "v0": -g.lv / 2.0, "time": f.time,
    }
    path.write_bytes(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    _sidecar_path(path).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_field(path) -> DistributionField:
    path = Path(path)
    sidecar = _sidecar_path(path)
    if not path.is_file():
        raise IOContractError(f"missing field file: {path}")
    if not sidecar.is_file():
        raise IOContractError(f"missing sidecar: {sidecar}")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        d, nx, nv = meta["d"], meta["nx"], meta["nv"]
        dx, dv = meta["dx"], meta["dv"]
        x0, v0, time = meta["x0"], meta["v0"], meta["time"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise IOContractError(f"malformed sidecar {sidecar}: {exc}") from exc
    grid = PhaseGrid(d=d, lx=_snap_length(nx, dx), lv=_snap_length(nv, dv),
                     nx=nx, nv=nv)
    if x0 != 0.0 or v0 != -grid.lv / 2.0:
        raise IOContractError(
            f"{sidecar}: origin ({x0}, {v0}) does not match the "
            f"cell-centered convention (0, {-grid.lv / 2.0})")
    raw = path.read_bytes()
    expect = nx ** d * nv ** d * 8
    if len(raw) != expect:
        raise IOContractError(
            f"{path}: {len(raw)} bytes but sidecar implies {expect}")
    vals = np.frombuffer(raw, dtype="<f8").reshape(grid.shape).copy()
    return DistributionField(grid, vals, time)


# ----------------------------------------------------------------------
# run manifest, written last so its artifact list is a completion proof
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    config: dict
    seed: int
    artifacts: tuple[str, ...]
    schema_versions: dict

    def validate_against(self, run_dir) -> None:
        run_dir = Path(run_dir)
        for name in self.artifacts:
            if not (run_dir / name).is_file():
                raise IOContractError(
                    f"manifest lists missing artifact: {run_dir / name}")


def write_manifest(run_dir, manifest: RunManifest) -> Path:
    run_dir = Path(run_dir)
    manifest.validate_against(run_dir)
    payload = dataclasses.asdict(manifest)
    payload["artifacts"] = list(manifest.artifacts)
    path = run_dir / MANIFEST_NAME
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def read_manifest(run_dir) -> RunManifest:
    path = Path(run_dir) / MANIFEST_NAME
    if not path.is_file():
        raise IOContractError(f"missing file: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        return RunManifest(
            subcommand=payload["subcommand"],
            config=payload["config"],
            seed=payload["seed"],
            artifacts=tuple(payload["artifacts"]),
            schema_versions=payload["schema_versions"],
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise IOContractError(f"malformed manifest {path}: {exc}") from exc
