"""Phase-space grid, distribution fields, and velocity-moment diagnostics.

The model is a kinetic density f(t, x, v) on position-velocity space,
transported freely in x and relaxed in v by a spatially local alignment
force

    E[f](t, x, v) = integral (v - v*) f(t, x, v*) dv*
                  = rho(t, x) v - m(t, x),

where rho is the velocity integral of f and m its first velocity moment.
Everything here is discretized on a uniform tensor grid: d position axes
on [0, L_x] and d velocity axes on [-L_v/2, L_v/2], d in {1, 2}, with all
integrals evaluated by the midpoint rule on cell centers.

Conventions used throughout the package:

* field arrays are shaped (nx,)*d + (nv,)*d, position axes outermost;
* a cell "belongs to the numerical support" iff its value exceeds
  1e-12 times a reference maximum (by default the field's own max; the
  solver passes the initial max so thresholds stay fixed along a run);
* the mean velocity u = m/rho is only reported where
  rho > 1e-14 * (total mass / position volume);
* entropy integrand is f*log(max(f, 1e-300)), which makes 0*log(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import GridMismatch

# Relative floor below which u = m/rho is flagged undefined.
RHO_FLOOR_REL = 1e-14
# Relative threshold defining the numerical support.
SUPPORT_REL = 1e-12
# Absolute floor inside the entropy logarithm.
ENTROPY_FLOOR = 1e-300


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform tensor grid on [0, L_x]^d x [-L_v/2, L_v/2]^d.

    Cell centers sit at x_i = (i + 1/2) dx and v_j = -L_v/2 + (j + 1/2) dv.
    """

    d: int
    lx: float
    lv: float
    nx: int
    nv: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if self.lx <= 0 or self.lv <= 0:
            raise ValueError("domain extents must be positive")
        if self.nx < 1 or self.nv < 1:
            raise ValueError("cell counts must be positive")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dv(self) -> float:
        return self.lv / self.nv

    @property
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def v_centers(self) -> np.ndarray:
        return -0.5 * self.lv + (np.arange(self.nv) + 0.5) * self.dv

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nx,) * self.d + (self.nv,) * self.d

    @property
    def x_shape(self) -> tuple[int, ...]:
        return (self.nx,) * self.d

    @property
    def cell_volume(self) -> float:
        """Phase-space volume of one cell, dx^d * dv^d."""
        return self.dx**self.d * self.dv**self.d

    @property
    def x_volume(self) -> float:
        return self.lx**self.d

    def v_mesh(self) -> tuple[np.ndarray, ...]:
        """Velocity component arrays broadcastable against field values.

        For d=1 returns one array of shape (nv,); for d=2 two arrays of
        shapes (nv, 1) and (1, nv) so that v1**2 + v2**2 broadcasts to the
        velocity block of a field.
        """
        v = self.v_centers
        if self.d == 1:
            return (v,)
        return (v[:, None], v[None, :])


@dataclass
class DistributionField:
    """Nonnegative density sampled at cell centers, plus its clock time."""

    grid: PhaseGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def copy(self) -> "DistributionField":
        return DistributionField(self.grid, self.values.copy(), self.time)


@dataclass
class MomentField:
    """Velocity moments of a distribution, one value per position cell.

    u is m/rho where rho clears the floor and 0 elsewhere; `u_defined`
    marks the cells where the quotient is meaningful.
    """

    grid: PhaseGrid
    rho: np.ndarray            # (nx,)*d
    mom: np.ndarray            # (nx,)*d + (d,)
    q: np.ndarray              # (nx,)*d, second moment integral |v|^2 f dv
    u: np.ndarray              # (nx,)*d + (d,)
    u_defined: np.ndarray      # (nx,)*d bool


def require_same_grid(a: DistributionField, b: DistributionField) -> None:
    if a.grid != b.grid:
        raise GridMismatch(f"grids differ: {a.grid} vs {b.grid}")


def moments(f: DistributionField) -> MomentField:
    """Midpoint-rule velocity moments rho, m, q and the mean velocity u."""
    g = f.grid
    d = g.d
    dvd = g.dv**d
    vaxes = tuple(range(d, 2 * d))
    vals = f.values

    rho = vals.sum(axis=vaxes) * dvd
    vmesh = g.v_mesh()
    mom = np.stack(
        [(vals * vk).sum(axis=vaxes) * dvd for vk in vmesh], axis=-1
    )
    speed2 = sum(vk**2 for vk in vmesh)
    q = (vals * speed2).sum(axis=vaxes) * dvd

    floor = RHO_FLOOR_REL * (rho.sum() * g.dx**d) / g.x_volume
    u_defined = rho > floor
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(u_defined[..., None], mom / rho[..., None], 0.0)
    return MomentField(grid=g, rho=rho, mom=mom, q=q, u=u, u_defined=u_defined)


def alignment_field(
    f: DistributionField,
    x_cell: tuple[int, ...] | int,
    v_point: np.ndarray | float,
    mom_field: MomentField | None = None,
) -> np.ndarray:
    """Alignment force E[f] = rho(x) v - m(x) at one position cell.

    `v_point` may be a scalar (d=1) or a length-d vector. Identical, up to
    rounding, to the direct quadrature integral (v - v*) f(x, v*) dv*.
    """
    mf = moments(f) if mom_field is None else mom_field
    idx = (x_cell,) if np.isscalar(x_cell) else tuple(x_cell)
    v = np.atleast_1d(np.asarray(v_point, dtype=np.float64))
    return mf.rho[idx] * v - mf.mom[idx]


def support_mask(f: DistributionField, support_ref: float | None = None) -> np.ndarray:
    """Cells above the numerical-support threshold 1e-12 * reference max."""
    ref = float(f.values.max()) if support_ref is None else float(support_ref)
    return f.values > SUPPORT_REL * ref


@dataclass
class ObservableRow:
    """One sampled row of integral observables and production rates."""

    t: float
    mass: float
    momentum: np.ndarray          # (d,)
    energy: float
    entropy: float
    lp: np.ndarray                # one entry per requested p
    radius_v: float               # R: sup |v| over the numerical support
    radius_ft: float              # S: sup |x - v t| over the numerical support
    energy_rate: float
    entropy_rate: float
    lp_rates: np.ndarray


def observables(
    f: DistributionField,
    p_list: tuple[float, ...] = (2.0,),
    support_ref: float | None = None,
    gamma: float = 0.0,
    ft_time: float | None = None,
) -> ObservableRow:
    """Integral observables of f plus the closed-form production rates.

    The rates are the analytic expressions evaluated on the current field
    (not finite differences); with gamma=0 they are reported as zero.
    An identically-zero field returns all-zero observables by convention.
    `ft_time` overrides the time used in the |x - v t| radius; the
    free-streaming-frame solver passes 0 there because its x axis already
    carries the backward-transported position.
    """
    g = f.grid
    vol = g.cell_volume
    vals = f.values

    mass = float(vals.sum() * vol)
    vmesh = g.v_mesh()
    momentum = np.array([float((vals * vk).sum() * vol) for vk in vmesh])
    speed2 = sum(vk**2 for vk in vmesh)
    energy = float((vals * speed2).sum() * vol)
    entropy = float((vals * np.log(np.maximum(vals, ENTROPY_FLOOR))).sum() * vol)
    lp = np.array([float((vals**p).sum() * vol) for p in p_list])

    mask = support_mask(f, support_ref)
    tt = f.time if ft_time is None else ft_time
    if mask.any():
        xc = g.x_centers
        if g.d == 1:
            xg, vg = np.meshgrid(xc, g.v_centers, indexing="ij")
            speed = np.abs(vg)
            ft = np.abs(xg - vg * tt)
        else:
            x1 = xc[:, None, None, None]
            x2 = xc[None, :, None, None]
            v1, v2 = vmesh
            v1 = v1[None, None, :, :]
            v2 = v2[None, None, :, :]
            speed = np.broadcast_to(np.sqrt(v1**2 + v2**2), vals.shape)
            ft = np.sqrt((x1 - v1 * tt) ** 2 + (x2 - v2 * tt) ** 2)
        radius_v = float(speed[mask].max())
        radius_ft = float(ft[mask].max())
    else:
        radius_v = 0.0
        radius_ft = 0.0
        entropy = 0.0

    e_rate, h_rate, lp_rates = production_rates(f, gamma, p_list)
    return ObservableRow(
        t=f.time,
        mass=mass,
        momentum=momentum,
        energy=energy,
        entropy=entropy,
        lp=lp,
        radius_v=radius_v,
        radius_ft=radius_ft,
        energy_rate=e_rate,
        entropy_rate=h_rate,
        lp_rates=lp_rates,
    )


def production_rates(
    f: DistributionField,
    gamma: float,
    p_list: tuple[float, ...] = (2.0,),
    mom_field: MomentField | None = None,
) -> tuple[float, float, np.ndarray]:
    """Closed-form instantaneous rates of energy, entropy, and L^p integrals.

        dE/dt = -gamma * sum_x (2 rho q - 2 |m|^2) dx^d        <= 0
        dH/dt =  gamma * d * sum_x rho^2 dx^d                  >= 0
        dLp/dt = gamma * d * (p-1) * sum_{x,v} f^p rho dx^d dv^d

    The energy rate is nonpositive by the Cauchy-Schwarz inequality
    |m|^2 <= rho q, which the midpoint quadrature inherits exactly.
    """
    g = f.grid
    mf = moments(f) if mom_field is None else mom_field
    dxd = g.dx**g.d

    mom2 = (mf.mom**2).sum(axis=-1)
    energy_rate = float(-gamma * ((2.0 * mf.rho * mf.q - 2.0 * mom2).sum()) * dxd)
    entropy_rate = float(gamma * g.d * (mf.rho**2).sum() * dxd)

    rho_b = mf.rho.reshape(g.x_shape + (1,) * g.d)
    lp_rates = np.array(
        [
            float(gamma * g.d * (p - 1.0) * (f.values**p * rho_b).sum() * g.cell_volume)
            for p in p_list
        ]
    )
    return energy_rate, entropy_rate, lp_rates


def h_profile(f: DistributionField) -> np.ndarray:
    """Velocity profile h(v) = sup over x of f(x, v).

    Shape (nv,) for d=1 and (nv, nv) for d=2.
    """
    xaxes = tuple(range(f.grid.d))
    return f.values.max(axis=xaxes)


def support_set_Q(r0: float, t: float):
    """Free-transport image of the centered box B_{r0} x B_{r0}.

    Returns `(contains, h)`: a membership predicate and the diameter bound
    h(t) = min(2 r0, 2 r0 / t) for the position sections of the set.
    Membership of (x, v) at time t holds iff |v| <= r0 and |x - v t| <= r0
    (Euclidean norms; callers are responsible for re-centering coordinates
    so the initial patch center sits at the origin).
    """
    if r0 <= 0:
        raise ValueError("r0 must be positive")

    def contains(x, v) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        if x.ndim and x.shape[-1:] == (2,) and v.shape == x.shape:
            speed = np.sqrt((v**2).sum(axis=-1))
            back = np.sqrt(((x - v * t) ** 2).sum(axis=-1))
        else:
            speed = np.abs(v)
            back = np.abs(x - v * t)
        return (speed <= r0) & (back <= r0)

    h = 2.0 * r0 if t <= 0 else min(2.0 * r0, 2.0 * r0 / t)
    return contains, h


def mass_outside_q(
    f: DistributionField,
    r0: float,
    center_x: np.ndarray,
    center_v: np.ndarray,
    t: float | None = None,
) -> float:
    """Mass of the cells outside Q(t), in patch-comoving coordinates.

    Coordinates are re-centered by the Galilean boost of the initial patch,
    x -> x - center_x - center_v * t and v -> v - center_v, under which the
    free flow and the alignment force are both invariant.
    """
    g = f.grid
    tt = f.time if t is None else t
    cx = np.atleast_1d(np.asarray(center_x, dtype=np.float64))
    cv = np.atleast_1d(np.asarray(center_v, dtype=np.float64))
    contains, _ = support_set_Q(r0, tt)

    xc = g.x_centers
    vc = g.v_centers
    if g.d == 1:
        xp = xc[:, None] - cx[0] - cv[0] * tt
        vp = vc[None, :] - cv[0]
        inside = contains(np.broadcast_to(xp, g.shape), np.broadcast_to(vp, g.shape))
    else:
        x1 = xc[:, None, None, None] - cx[0] - cv[0] * tt
        x2 = xc[None, :, None, None] - cx[1] - cv[1] * tt
        v1 = vc[None, None, :, None] - cv[0]
        v2 = vc[None, None, None, :] - cv[1]
        speed = np.sqrt(v1**2 + v2**2)
        back = np.sqrt((x1 - v1 * tt) ** 2 + (x2 - v2 * tt) ** 2)
        inside = (speed <= r0) & (back <= r0)
    outside = ~inside
    return float(f.values[outside].sum() * g.cell_volume)


@dataclass
class ObservableSeries:
    """Time series of ObservableRow entries with strictly increasing times."""

    p_list: tuple[float, ...] = (2.0,)
    rows: list[ObservableRow] = dataclass_field(default_factory=list)

    def append(self, row: ObservableRow) -> None:
        if self.rows and row.t <= self.rows[-1].t:
            raise ValueError(
                f"times must be strictly increasing: {row.t} after {self.rows[-1].t}"
            )
        if len(row.lp) != len(self.p_list):
            raise ValueError("row lp length does not match p_list")
        self.rows.append(row)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def header(self, d: int) -> list[str]:
        cols = ["t", "mass"]
        cols += [f"mom_{k + 1}" for k in range(d)]
        cols += ["energy", "entropy"]
        cols += [f"lp_{_fmt_p(p)}" for p in self.p_list]
        cols += ["R", "S", "dE_dt", "dH_dt"]
        cols += [f"dLp_{_fmt_p(p)}_dt" for p in self.p_list]
        return cols


def _fmt_p(p: float) -> str:
    """Column-name form of an L^p exponent: integers bare, floats as-is."""
    return str(int(p)) if float(p).is_integer() else repr(float(p))
