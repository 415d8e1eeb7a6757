"""Flat key = value run configuration with validated defaults.

One namespace covers every subcommand; a config file only ever
overrides the handful of keys its subcommand reads. Defaults reproduce
the reference setup: a 20 x 6 phase box at (dx, dv) = (0.05, 0.01),
dt = 1e-4 to T = 3, and a unit-mass square patch of side 2 centered at
(11, -0.3).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError, ValidationError
from .fields import smooth_patch, uniform_patch
from .grid import DistributionField, PhaseGrid
from .particles import PSI_SHAPES

SCHEMES = ("strang", "lie")
FRAMES = ("lab", "stream")
PROFILES = ("uniform", "smooth")
MONO_PROFILES = ("collapse", "rarefaction")

# fraction of a step by which T may miss an integer step count
STEP_ROUNDING = 1e-8


def _req(cond: bool, invariant: str) -> None:
    if not cond:
        raise ValidationError(invariant)


@dataclass(frozen=True)
class RunConfig:
    """Every tunable across subcommands, with reference defaults."""

    d: int = 1
    lx: float = 20.0
    lv: float = 6.0
    dx: float = 0.05
    dv: float = 0.01
    gamma: float = 1.0
    dt: float = 1e-4
    t_end: float = 3.0
    scheme: str = "strang"
    frame: str = "lab"
    obs_stride: int = 100
    snapshot_stride: int = 0
    profile: str = "uniform"
    patch_center_x: float = 11.0
    patch_center_v: float = -0.3
    patch_half_width: float = 1.0
    patch_height: float = 0.25
    seed: int = 1
    t_loc: float = 0.05
    picard_tol: float = 1e-8
    picard_max_iter: int = 40
    picard_slices: int = 0
    n_particles: int = 10000
    psi_shape: str = "indicator"
    psi_radius: float = 1.0
    record_stride: int = 10
    n_markers: int = 512
    mono_profile: str = "collapse"
    mono_x_min: float = -0.5
    mono_x_max: float = 0.5
    deposit_width: float = 0.0

    def __post_init__(self) -> None:
        _req(self.d in (1, 2), f"d must be 1 or 2, got {self.d}")
        for key in ("lx", "lv", "dx", "dv", "dt", "t_end",
                    "patch_half_width", "patch_height", "t_loc",
                    "picard_tol", "psi_radius"):
            _req(getattr(self, key) > 0, f"{key} must be positive")
        _req(self.gamma >= 0, "gamma must be nonnegative")
        for key, n in (("dx", self.lx / self.dx), ("dv", self.lv / self.dv)):
            _req(abs(n - round(n)) <= STEP_ROUNDING * max(1.0, n),
                 f"{key} must divide the box length evenly, got {n} cells")
        steps = self.t_end / self.dt
        _req(abs(steps - round(steps)) <= STEP_ROUNDING * max(1.0, steps)
             and round(steps) >= 1,
             f"t_end/dt must be a whole number of steps, got {steps}")
        courant = self.dt * (self.lv / 2.0) * math.sqrt(self.d)
        _req(courant <= self.dx * (1.0 + 1e-12),
             f"CFL violated: dt*(L_v/2)*sqrt(d) = {courant:g} exceeds "
             f"dx = {self.dx:g}")
        _req(self.scheme in SCHEMES, f"scheme must be one of {SCHEMES}")
        _req(self.frame in FRAMES, f"frame must be one of {FRAMES}")
        _req(self.profile in PROFILES, f"profile must be one of {PROFILES}")
        _req(self.mono_profile in MONO_PROFILES,
             f"mono_profile must be one of {MONO_PROFILES}")
        _req(self.psi_shape in PSI_SHAPES,
             f"psi_shape must be one of {PSI_SHAPES}")
        hw = self.patch_half_width
        _req(hw <= self.patch_center_x <= self.lx - hw,
             "patch must sit inside the grid in x")
        _req(abs(self.patch_center_v) + hw <= self.lv / 2.0,
             "patch must sit inside the grid in v")
        for key in ("obs_stride", "picard_max_iter", "record_stride"):
            _req(getattr(self, key) >= 1, f"{key} must be at least 1")
        _req(self.snapshot_stride >= 0, "snapshot_stride must be >= 0")
        _req(self.picard_slices >= 0, "picard_slices must be >= 0")
        _req(self.n_particles >= 1, "n_particles must be at least 1")
        _req(self.n_markers >= 3, "n_markers must be at least 3")
        _req(self.mono_x_min < self.mono_x_max,
             "mono_x_min must be below mono_x_max")
        _req(self.deposit_width >= 0, "deposit_width must be >= 0")
        _req(self.seed >= 0, "seed must be nonnegative")

    @property
    def nx(self) -> int:
        return int(round(self.lx / self.dx))

    @property
    def nv(self) -> int:
        return int(round(self.lv / self.dv))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def grid(self) -> PhaseGrid:
        return PhaseGrid(d=self.d, lx=self.lx, lv=self.lv,
                         nx=self.nx, nv=self.nv)

    def initial_field(self) -> DistributionField:
        make = uniform_patch if self.profile == "uniform" else smooth_patch
        return make(self.grid(), self.patch_center_x, self.patch_center_v,
                    self.patch_half_width, self.patch_height)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_CONVERTERS = {"int": int, "float": float, "str": str}
_FIELDS = {f.name: _CONVERTERS[f.type] for f in dataclasses.fields(RunConfig)}


def parse_config(path) -> RunConfig:
    """Parse a flat key = value file; an empty file yields all defaults.

    Unknown and duplicate keys are rejected with their line number;
    blank lines and lines starting with '#' are skipped.
    """
    overrides: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", n)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _FIELDS:
            raise ParseError(f"unknown key {key!r}", n)
        if key in overrides:
            raise ParseError(f"duplicate key {key!r}", n)
        try:
            overrides[key] = _FIELDS[key](value)
        except ValueError:
            raise ParseError(
                f"could not read {key!r} from {value!r}", n) from None
    return RunConfig(**overrides)
