"""Operator-splitting time integrator for the alignment model.

One step of size dt factors the flow into free streaming T and local
velocity alignment A:

    lie:    f_{k+1} = A(dt) T(dt) f_k
    strang: f_{k+1} = T(dt/2) A(dt) T(dt/2) f_k

Both substeps are realized as conservative linear-weight remaps, so each
is exactly mass-preserving (up to metered mass that physically leaves the
position box during transport), keeps fields nonnegative, and never
widens the velocity hull. The alignment substep applies the exact
homogeneous relaxation per position cell with moments frozen at substep
entry: every parcel moves to u + exp(-gamma rho dt) (v - u).

Two frames are available:

* "lab": the state is f(t, x, v) itself; transport shifts rows in x.
* "stream": the state is the free-streaming pullback g(t, x0, v)
  = f(t, x0 + v t, v). Transport is the identity, so nothing diffuses
  while the solution coasts; only the alignment substep moves mass, and
  it compensates velocity changes with x0 slides that keep physical
  positions fixed. Scalar observables of g (mass, momentum, energy,
  entropy, L^p norms, velocity radius) equal those of f because the
  shear x = x0 + v t is volume-preserving and leaves v untouched, and
  sup |x - v t| is simply sup |x0|. Production rates need the physical
  density, which is sampled on a station window that follows the
  drifting support. Intended for long weak-coupling runs where lab-frame
  remap diffusion would swamp the interaction signal.

Time is always reported as k * dt for step count k, never accumulated,
so output timestamps are reproducible bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import kernels
from .errors import NegativeDensity, SupportClipped
from .grid import (
    RHO_FLOOR_REL,
    SUPPORT_REL,
    DistributionField,
    ObservableRow,
    ObservableSeries,
    PhaseGrid,
    mass_outside_q,
    moments,
    observables,
    support_mask,
)

SCHEMES = ("strang", "lie")
FRAMES = ("lab", "stream")

# Values in (-NEGATIVE_CLIP, 0) are zeroed after a step; anything at or
# below -NEGATIVE_CLIP aborts the run as a scheme failure.
NEGATIVE_CLIP = 1e-12
# Abort when deposits have dropped more than this fraction of the initial
# mass at box edges (stream frame only; the lab transport meters outflow
# instead of treating it as an error).
CLIP_ABORT_REL = 1e-8


@dataclass(frozen=True)
class PatchGeometry:
    """Center and radius of the initial support, for confinement checks.

    `radius` covers the support in both position and velocity: the initial
    support sits inside B_radius(center_x) x B_radius(center_v), including
    the half-cell extent around each occupied center.
    """

    center_x: np.ndarray      # (d,)
    center_v: np.ndarray      # (d,)
    radius: float


def patch_geometry(f: DistributionField) -> PatchGeometry:
    g = f.grid
    d = g.d
    mask = support_mask(f)
    if not mask.any():
        raise ValueError("initial field has empty support")
    idx = np.nonzero(mask)
    xs = [g.x_centers[idx[c]] for c in range(d)]
    vs = [g.v_centers[idx[d + c]] for c in range(d)]
    cx = np.array([0.5 * (c.min() + c.max()) for c in xs])
    cv = np.array([0.5 * (c.min() + c.max()) for c in vs])
    rx = np.sqrt(sum((xs[c] - cx[c]) ** 2 for c in range(d))).max()
    rv = np.sqrt(sum((vs[c] - cv[c]) ** 2 for c in range(d))).max()
    pad = 0.5 * math.sqrt(d)
    radius = float(max(rx + pad * g.dx, rv + pad * g.dv))
    return PatchGeometry(center_x=cx, center_v=cv, radius=radius)


@dataclass
class SupportRow:
    """Support bookkeeping sampled alongside the observables."""

    t: float
    outflow: float       # cumulative mass carried out of the x-box
    clipped: float       # cumulative mass dropped at deposit edges
    q_outside: float     # mass outside the transported initial support box
    width_max: float     # widest position section of the numerical support


@dataclass
class RunResult:
    grid: PhaseGrid
    gamma: float
    dt: float
    scheme: str
    frame: str
    p_list: tuple[float, ...]
    geometry: PatchGeometry
    series: ObservableSeries
    support: list[SupportRow]
    nl_times: np.ndarray
    nl_values: np.ndarray
    snapshots: dict[int, DistributionField]
    final: DistributionField
    outflow_total: float
    clipped_total: float


class KineticSolver:
    """Stepper owning the field state and its conservation bookkeeping."""

    def __init__(
        self,
        initial: DistributionField,
        gamma: float,
        dt: float,
        scheme: str = "strang",
        frame: str = "lab",
        p_list: tuple[float, ...] = (2.0,),
    ):
        if scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
        if frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}, got {frame!r}")
        if gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if dt <= 0:
            raise ValueError("dt must be positive")
        if initial.time != 0.0:
            raise ValueError("initial field must carry time 0")
        if float(initial.values.min()) < 0:
            raise ValueError("initial field must be nonnegative")

        self.grid = initial.grid
        self.gamma = float(gamma)
        self.dt = float(dt)
        self.scheme = scheme
        self.frame = frame
        self.p_list = tuple(p_list)
        self.k = 0

        g = self.grid
        self.v = np.ascontiguousarray(g.v_centers)
        self.f = np.ascontiguousarray(initial.values, dtype=np.float64).copy()
        self._buf = np.empty_like(self.f)
        self._row_outflow = np.empty(g.nv)
        if g.d == 1:
            self._rho = np.empty(g.nx)
            self._mom = np.empty(g.nx)
        else:
            self._rho = np.empty((g.nx, g.nx))
            self._mom1 = np.empty((g.nx, g.nx))
            self._mom2 = np.empty((g.nx, g.nx))
            self._tmp = np.empty((g.nx, g.nv, g.nv))

        self.mass0 = initial.mass()
        self.linf0 = float(self.f.max())
        self._mass_track = self.mass0
        self.outflow_total = 0.0
        self.clipped_total = 0.0
        self.geometry = patch_geometry(initial)
        if frame == "stream":
            self._outside_static = self._static_outside_mask()

    # -- state ---------------------------------------------------------

    @property
    def time(self) -> float:
        return self.k * self.dt

    def field(self) -> DistributionField:
        return DistributionField(self.grid, self.f.copy(), self.time)

    # -- substeps ------------------------------------------------------

    def _rho_floor(self) -> float:
        return RHO_FLOOR_REL * self._mass_track / self.grid.x_volume

    def _transport(self, dt: float) -> None:
        g = self.grid
        vol = g.cell_volume
        if g.d == 1:
            kernels.transport_1d(self.f, self.v, dt, g.dx, self._buf, self._row_outflow)
            self.f, self._buf = self._buf, self.f
            lost = float(self._row_outflow.sum()) * vol
        else:
            kernels.transport_2d_x1(self.f, self.v, dt, g.dx, self._buf, self._row_outflow)
            self.f, self._buf = self._buf, self.f
            lost = float(self._row_outflow.sum()) * vol
            kernels.transport_2d_x2(self.f, self.v, dt, g.dx, self._buf, self._row_outflow)
            self.f, self._buf = self._buf, self.f
            lost += float(self._row_outflow.sum()) * vol
        self.outflow_total += lost
        self._mass_track -= lost

    def _align(self, dt: float) -> None:
        g = self.grid
        floor = self._rho_floor()
        if g.d == 1:
            kernels.align_1d(self.f, self.v, g.dv, self.gamma, dt, floor,
                             self._buf, self._rho, self._mom)
        else:
            kernels.align_2d(self.f, self.v, g.dv, self.gamma, dt, floor,
                             self._buf, self._rho, self._mom1, self._mom2,
                             self._tmp)
        self.f, self._buf = self._buf, self.f

    def _station_window(self, t: float) -> tuple[float, int]:
        """x-window covering the physical support at shear time t."""
        g = self.grid
        lo = min(0.0, self.v[0] * t) - g.dx
        hi = g.lx + max(0.0, self.v[-1] * t) + g.dx
        nst = int(math.ceil((hi - lo) / g.dx)) + 1
        return lo, nst

    def _station_moments(self, t: float):
        """Physical moments (rho, m, q) on the drifting station window."""
        g = self.grid
        x_orig, nst = self._station_window(t)
        if g.d == 1:
            rho = np.empty(nst)
            mom = np.empty(nst)
            q = np.empty(nst)
            kernels.pullback_moments_1d(self.f, self.v, t, g.dx, g.dv, x_orig,
                                        rho, mom, q)
            return x_orig, rho, (mom,), q
        rho = np.empty((nst, nst))
        mom1 = np.empty((nst, nst))
        mom2 = np.empty((nst, nst))
        q = np.empty((nst, nst))
        kernels.pullback_moments_2d(self.f, self.v, t, g.dx, g.dv, x_orig,
                                    rho, mom1, mom2, q)
        return x_orig, rho, (mom1, mom2), q

    def _align_stream(self, dt: float, t_shear: float) -> None:
        if self.gamma == 0.0:
            return
        g = self.grid
        x_orig, rho_st, mom_st, _ = self._station_moments(t_shear)
        floor = self._rho_floor()
        self._buf[...] = 0.0
        if g.d == 1:
            clipped = kernels.pullback_align_1d(
                self.f, self.v, t_shear, g.dx, g.dv, self.gamma, dt,
                x_orig, rho_st, mom_st[0], floor, self._buf)
        else:
            clipped = kernels.pullback_align_2d(
                self.f, self.v, t_shear, g.dx, g.dv, self.gamma, dt,
                x_orig, rho_st, mom_st[0], mom_st[1], floor, self._buf)
        self.f, self._buf = self._buf, self.f
        lost = clipped * g.cell_volume
        self.clipped_total += lost
        self._mass_track -= lost
        if self.clipped_total > CLIP_ABORT_REL * self.mass0:
            raise SupportClipped(
                f"deposits dropped {self.clipped_total:.3e} mass at box edges "
                f"by t={self.time:.6g}; enlarge the position box",
                clipped_mass=self.clipped_total,
            )

    def step(self) -> None:
        dt = self.dt
        if self.frame == "lab":
            if self.scheme == "strang":
                self._transport(0.5 * dt)
                self._align(dt)
                self._transport(0.5 * dt)
            else:
                self._transport(dt)
                self._align(dt)
        else:
            half = 0.5 if self.scheme == "strang" else 1.0
            self._align_stream(dt, (self.k + half) * dt)
        self.k += 1
        self._guard_negative()

    def _guard_negative(self) -> None:
        mn = float(self.f.min())
        if mn < 0.0:
            if mn <= -NEGATIVE_CLIP:
                raise NegativeDensity(
                    f"density reached {mn:.3e} at t={self.time:.6g}",
                    min_value=mn, time=self.time)
            np.maximum(self.f, 0.0, out=self.f)

    # -- diagnostics ---------------------------------------------------

    def observable_row(self) -> ObservableRow:
        fld = DistributionField(self.grid, self.f, self.time)
        if self.frame == "lab":
            return observables(fld, self.p_list, support_ref=self.linf0,
                               gamma=self.gamma)
        row = observables(fld, self.p_list, support_ref=self.linf0,
                          gamma=0.0, ft_time=0.0)
        if self.gamma != 0.0:
            rates = self._stream_rates()
            row.energy_rate, row.entropy_rate, row.lp_rates = rates
        return row

    def _stream_rates(self) -> tuple[float, float, np.ndarray]:
        """Production rates from physical-station moments of the pullback."""
        g = self.grid
        d = g.d
        t = self.time
        x_orig, rho_st, mom_st, q_st = self._station_moments(t)
        dxd = g.dx**d
        mom2 = sum(m**2 for m in mom_st)
        energy_rate = float(-self.gamma * 2.0 * (rho_st * q_st - mom2).sum() * dxd)
        entropy_rate = float(self.gamma * d * (rho_st**2).sum() * dxd)

        rho_p = self._gather_stations(rho_st, x_orig, t)
        lp_rates = np.array([
            float(self.gamma * d * (p - 1.0)
                  * (self.f**p * rho_p).sum() * g.cell_volume)
            for p in self.p_list
        ])
        return energy_rate, entropy_rate, lp_rates

    def _gather_stations(self, st: np.ndarray, x_orig: float, t: float) -> np.ndarray:
        """Station field linearly interpolated at each parcel's physical x."""
        g = self.grid
        if g.d == 1:
            s = ((g.x_centers[:, None] + self.v[None, :] * t) - x_orig) / g.dx - 0.5
            return _interp1(st, s)
        x1 = g.x_centers[:, None, None, None] + self.v[None, None, :, None] * t
        x2 = g.x_centers[None, :, None, None] + self.v[None, None, None, :] * t
        s1 = (x1 - x_orig) / g.dx - 0.5
        s2 = (x2 - x_orig) / g.dx - 0.5
        return _interp2(st, s1, s2)

    def nl_l1(self) -> float:
        """L^1 norm of the alignment term gamma div_v(E[f] f).

        In divergence-expanded form the integrand is
        gamma (d rho f + E . grad_v f); gradients are centered differences.
        In the stream frame grad_v f pulls back to (grad_v - t grad_x0) g
        and (rho, m) are read at physical positions.
        """
        if self.gamma == 0.0:
            return 0.0
        g = self.grid
        d = g.d
        vol = g.cell_volume
        vcomps = [vk.reshape((1,) * d + vk.shape) for vk in g.v_mesh()]
        if self.frame == "lab":
            mf = moments(DistributionField(g, self.f, self.time))
            rho_b = mf.rho.reshape(g.x_shape + (1,) * d)
            acc = d * rho_b * self.f
            for c in range(d):
                e_c = rho_b * vcomps[c] - mf.mom[..., c].reshape(g.x_shape + (1,) * d)
                acc += e_c * np.gradient(self.f, g.dv, axis=d + c)
            return float(self.gamma * np.abs(acc).sum() * vol)

        t = self.time
        x_orig, rho_st, mom_st, _ = self._station_moments(t)
        rho_p = self._gather_stations(rho_st, x_orig, t)
        acc = d * rho_p * self.f
        for c in range(d):
            m_p = self._gather_stations(mom_st[c], x_orig, t)
            deriv = np.gradient(self.f, g.dv, axis=d + c)
            if t != 0.0:
                deriv = deriv - t * np.gradient(self.f, g.dx, axis=c)
            acc += (rho_p * vcomps[c] - m_p) * deriv
        return float(self.gamma * np.abs(acc).sum() * vol)

    def _static_outside_mask(self) -> np.ndarray:
        """Stream frame: cells outside the (time-independent) support box.

        Physically |x - c_x - c_v t - (v - c_v) t| = |x0 - c_x|, so the
        transported box pulls back to the static product box.
        """
        g = self.grid
        geo = self.geometry
        xc = g.x_centers
        vc = g.v_centers
        if g.d == 1:
            xin = np.abs(xc - geo.center_x[0])[:, None] <= geo.radius
            vin = np.abs(vc - geo.center_v[0])[None, :] <= geo.radius
            return ~(xin & vin)
        x2 = ((xc - geo.center_x[0])[:, None] ** 2
              + (xc - geo.center_x[1])[None, :] ** 2)
        v2 = ((vc - geo.center_v[0])[:, None] ** 2
              + (vc - geo.center_v[1])[None, :] ** 2)
        xin = x2 <= geo.radius**2
        vin = v2 <= geo.radius**2
        return ~(xin[:, :, None, None] & vin[None, None, :, :])

    def support_row(self) -> SupportRow:
        geo = self.geometry
        if self.frame == "lab":
            fld = DistributionField(self.grid, self.f, self.time)
            q_out = mass_outside_q(fld, geo.radius, geo.center_x, geo.center_v)
        else:
            q_out = float(self.f[self._outside_static].sum() * self.grid.cell_volume)
        return SupportRow(
            t=self.time,
            outflow=self.outflow_total,
            clipped=self.clipped_total,
            q_outside=q_out,
            width_max=self._section_width_max(),
        )

    def _section_width_max(self) -> float:
        """Widest per-axis x-extent of any velocity section of the support.

        In the stream frame x0-extents equal physical extents: the shear
        translates each section without changing its width.
        """
        g = self.grid
        mask = self.f > SUPPORT_REL * self.linf0
        if g.d == 1:
            cols = mask.any(axis=0)
            if not cols.any():
                return 0.0
            imin = mask.argmax(axis=0)
            imax = g.nx - 1 - mask[::-1, :].argmax(axis=0)
            w = (imax - imin + 1) * g.dx
            return float(w[cols].max())
        best = 0.0
        for axis in (0, 1):
            m = mask.any(axis=1 - axis).reshape(g.nx, -1)
            cols = m.any(axis=0)
            if not cols.any():
                continue
            imin = m.argmax(axis=0)
            imax = g.nx - 1 - m[::-1, :].argmax(axis=0)
            w = (imax - imin + 1) * g.dx
            best = max(best, float(w[cols].max()))
        return best


def _interp1(arr: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Linear interpolation of a station array at index positions s.

    Positions outside the window read as zero.
    """
    n = arr.shape[0]
    k = np.floor(s).astype(np.int64)
    th = s - k
    out = np.zeros(s.shape)
    lo = (k >= 0) & (k < n)
    hi = (k + 1 >= 0) & (k + 1 < n)
    out += np.where(lo, (1.0 - th) * arr[np.clip(k, 0, n - 1)], 0.0)
    out += np.where(hi, th * arr[np.clip(k + 1, 0, n - 1)], 0.0)
    return out


def _interp2(arr: np.ndarray, s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """Bilinear station interpolation; zero outside the window."""
    n = arr.shape[0]
    k1 = np.floor(s1).astype(np.int64)
    t1 = s1 - k1
    k2 = np.floor(s2).astype(np.int64)
    t2 = s2 - k2
    out = 0.0
    for a, wa in ((0, 1.0 - t1), (1, t1)):
        ia = k1 + a
        oka = (ia >= 0) & (ia < n)
        ca = np.clip(ia, 0, n - 1)
        for b, wb in ((0, 1.0 - t2), (1, t2)):
            ib = k2 + b
            okb = (ib >= 0) & (ib < n)
            cb = np.clip(ib, 0, n - 1)
            w = np.where(oka & okb, wa * wb, 0.0)
            out = out + w * arr[ca, cb]
    return out


def run(
    initial: DistributionField,
    gamma: float,
    dt: float,
    n_steps: int,
    scheme: str = "strang",
    frame: str = "lab",
    obs_stride: int = 1,
    snapshot_stride: int = 0,
    snapshot_steps=(),
    p_list: tuple[float, ...] = (2.0,),
    with_nl: bool = False,
    progress=None,
) -> RunResult:
    """Integrate n_steps of size dt and collect sampled diagnostics.

    Observables are sampled at step 0, every `obs_stride` steps, and at the
    final step. Snapshots are kept at the listed step indices, at multiples
    of `snapshot_stride` when it is positive, and always at the end.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if obs_stride < 1:
        raise ValueError("obs_stride must be at least 1")
    kernels.configure_threads()

    solver = KineticSolver(initial, gamma, dt, scheme=scheme, frame=frame,
                           p_list=p_list)
    series = ObservableSeries(p_list=tuple(p_list))
    support_rows: list[SupportRow] = []
    nl_t: list[float] = []
    nl_v: list[float] = []
    snapshots: dict[int, DistributionField] = {}
    snap_at = set(int(s) for s in snapshot_steps)

    def wants_snapshot(k: int) -> bool:
        if k in snap_at:
            return True
        return snapshot_stride > 0 and k > 0 and k % snapshot_stride == 0

    def sample() -> None:
        series.append(solver.observable_row())
        support_rows.append(solver.support_row())
        if with_nl:
            nl_t.append(solver.time)
            nl_v.append(solver.nl_l1())
        if progress is not None:
            progress(solver.k, n_steps)

    sample()
    if wants_snapshot(0):
        snapshots[0] = solver.field()
    for k in range(1, n_steps + 1):
        solver.step()
        if k % obs_stride == 0 or k == n_steps:
            sample()
        if wants_snapshot(k) or k == n_steps:
            snapshots[k] = solver.field()

    return RunResult(
        grid=solver.grid,
        gamma=solver.gamma,
        dt=solver.dt,
        scheme=scheme,
        frame=frame,
        p_list=tuple(p_list),
        geometry=solver.geometry,
        series=series,
        support=support_rows,
        nl_times=np.array(nl_t),
        nl_values=np.array(nl_v),
        snapshots=snapshots,
        final=solver.field(),
        outflow_total=solver.outflow_total,
        clipped_total=solver.clipped_total,
    )
