"""Characteristic-flow oracle and its fixed-point iteration.

Small-scale cross-check for the splitting solver: integrates the
characteristic system

    dX/dtau = V,    dV/dtau = -gamma E[f](tau, X, V)

backwards through a frozen time-stack of fields, evaluates the linear
update

    h(t, z) = f0(Z(0, t; z)) * exp(gamma d int_0^t rho(s, X(s)) ds),

and iterates that update to a fixed point on a short horizon. Everything
is plain vectorized numpy at deliberately coarse resolution; long
horizons belong to the splitting solver.

Field lookups are multilinear in (x, v) and linear in t between stored
slices, reading zero outside the grid, so the force vanishes off-support
and characteristics that drift out simply pick up h = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainExit, GridMismatch, NoConvergence
from .grid import DistributionField, PhaseGrid

# Stack resolution caps: this module is an oracle, not a solver.
MAX_CELLS = 64
MAX_SLICES = 64

DEFAULT_T_LOC = 0.05
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 40
DEFAULT_MAX_HALVINGS = 4

# A priori error budget for one backward solve at default slice spacing
# (4-stage one-step integration, step = slice spacing ~ 1e-3).
ODE_TOL = 1e-9


@dataclass
class CharState:
    """Endpoint of a characteristic solve: z = (x, v) at time s, reached
    by integrating from time t."""

    x: np.ndarray
    v: np.ndarray
    s: float
    t: float


@dataclass
class IterateField:
    """Time-indexed stack of fields on [0, T_loc] at coarse resolution.

    Slice k holds the field at times[k]; n counts how many fixed-point
    updates produced it. increments records the sup-norm update sizes
    once an iteration has run.
    """

    times: np.ndarray
    slices: list[DistributionField]
    gamma: float
    n: int = 0
    increments: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.times.ndim != 1 or self.times.shape[0] != len(self.slices):
            raise ValueError("times and slices must have matching length")
        if self.times.shape[0] < 2 or self.times.shape[0] > MAX_SLICES:
            raise ValueError(f"need between 2 and {MAX_SLICES} time slices")
        if self.times[0] != 0.0 or (np.diff(self.times) <= 0).any():
            raise ValueError("times must increase strictly from 0")
        g = self.slices[0].grid
        if g.nx > MAX_CELLS or g.nv > MAX_CELLS:
            raise ValueError(f"stack resolution capped at {MAX_CELLS} cells/axis")
        for k, s in enumerate(self.slices):
            if s.grid != g:
                raise GridMismatch("stack slices live on different grids")
            if s.values.min() < 0.0:
                raise ValueError("stack slices must be nonnegative")
            s.time = float(self.times[k])
        if self.gamma < 0.0:
            raise ValueError("gamma must be nonnegative")

    @property
    def grid(self) -> PhaseGrid:
        return self.slices[0].grid

    @classmethod
    def free_stream(cls, f0: DistributionField, gamma: float,
                    t_end: float, n_slices: int) -> "IterateField":
        """Seed stack: f0 transported freely, slice k at t_k = k dt.

        Exact for gamma = 0, first-order accurate seed otherwise.
        """
        times = np.linspace(0.0, t_end, n_slices)
        g = f0.grid
        x_pts, v_pts = _phase_nodes(g)
        slices = [f0.copy()]
        for t in times[1:]:
            vals = _interp_phase(f0, x_pts - v_pts * t, v_pts)
            slices.append(DistributionField(g, vals.reshape(g.shape), float(t)))
        return cls(times, slices, gamma)


# --------------------------------------------------------------- lookups

def _multilinear(arr: np.ndarray, origin, steps, pts: np.ndarray) -> np.ndarray:
    """Multilinear interpolation on a cell-centered uniform grid.

    pts has shape (n, arr.ndim); corners falling outside the sample range
    are dropped, so values taper to zero within one cell of the boundary.
    """
    nd = arr.ndim
    n = pts.shape[0]
    base = []
    frac = []
    for a in range(nd):
        u = (pts[:, a] - origin[a]) / steps[a]
        k = np.floor(u).astype(np.int64)
        base.append(k)
        frac.append(u - k)
    flat = arr.ravel()
    out = np.zeros(n)
    for corner in range(1 << nd):
        w = np.ones(n)
        ok = np.ones(n, dtype=bool)
        lin = np.zeros(n, dtype=np.int64)
        for a in range(nd):
            bit = (corner >> a) & 1
            ia = base[a] + bit
            ok &= (ia >= 0) & (ia < arr.shape[a])
            w = w * (frac[a] if bit else 1.0 - frac[a])
            lin = lin * arr.shape[a] + np.clip(ia, 0, arr.shape[a] - 1)
        out += np.where(ok, w, 0.0) * flat[lin]
    return out


def _phase_nodes(g: PhaseGrid) -> tuple[np.ndarray, np.ndarray]:
    """All cell-center phase points, flattened to (n, d) position and
    velocity blocks in field storage order."""
    axes = (g.x_centers,) * g.d + (g.v_centers,) * g.d
    mesh = np.meshgrid(*axes, indexing="ij")
    cols = [m.ravel() for m in mesh]
    x = np.stack(cols[: g.d], axis=1)
    v = np.stack(cols[g.d:], axis=1)
    return x, v


def _interp_phase(f: DistributionField, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    g = f.grid
    origin = (g.x_centers[0],) * g.d + (g.v_centers[0],) * g.d
    steps = (g.dx,) * g.d + (g.dv,) * g.d
    return _multilinear(f.values, origin, steps, np.hstack([x, v]))


def _stack_moments(stack: IterateField) -> tuple[np.ndarray, np.ndarray]:
    """Per-slice velocity moments: rho (K, x-shape), mom (K, x-shape, d)."""
    g = stack.grid
    vax = tuple(range(g.d, 2 * g.d))
    dvd = g.dv**g.d
    rho = np.empty((len(stack.slices),) + g.x_shape)
    mom = np.empty((len(stack.slices),) + g.x_shape + (g.d,))
    for k, s in enumerate(stack.slices):
        rho[k] = s.values.sum(axis=vax) * dvd
        for c, vm in enumerate(g.v_mesh()):
            mom[k, ..., c] = (s.values * vm).sum(axis=vax) * dvd
    return rho, mom


def _moments_at(times: np.ndarray, rho: np.ndarray, mom: np.ndarray,
                tau: float) -> tuple[np.ndarray, np.ndarray]:
    k = int(np.searchsorted(times, tau, side="right")) - 1
    k = min(max(k, 0), len(times) - 2)
    w = (tau - times[k]) / (times[k + 1] - times[k])
    w = min(max(w, 0.0), 1.0)
    return ((1.0 - w) * rho[k] + w * rho[k + 1],
            (1.0 - w) * mom[k] + w * mom[k + 1])


# ------------------------------------------------------------ integration

def _flow(stack: IterateField, moments, x: np.ndarray, v: np.ndarray,
          t: float, s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate an ensemble from time t to time s through the stack's
    field, one 4-stage step per slice interval.

    Returns final positions, velocities, and the trapezoid accumulation
    of rho(tau, X(tau)) from t to s (signed: negative when s < t).
    """
    g = stack.grid
    times, rho, mom = moments
    gamma = stack.gamma
    origin = tuple(g.x_centers[0] for _ in range(g.d))
    steps = tuple(g.dx for _ in range(g.d))

    def force(tau, xa, va):
        r, m = _moments_at(times, rho, mom, tau)
        rr = _multilinear(r, origin, steps, xa)
        out = np.empty_like(va)
        for c in range(g.d):
            mc = _multilinear(m[..., c], origin, steps, xa)
            out[:, c] = -gamma * (rr * va[:, c] - mc)
        return out, rr

    def rho_at(tau, xa):
        r, _ = _moments_at(times, rho, mom, tau)
        return _multilinear(r, origin, steps, xa)

    x = x.copy()
    v = v.copy()
    integral = np.zeros(x.shape[0])
    if s == t:
        return x, v, integral
    lo, hi = (s, t) if s < t else (t, s)
    inner = times[(times > lo + 1e-15 * max(1.0, hi)) &
                  (times < hi - 1e-15 * max(1.0, hi))]
    knots = np.concatenate([[lo], inner, [hi]])
    if t > s:
        knots = knots[::-1]
    rho_here = rho_at(knots[0], x)
    for a in range(len(knots) - 1):
        ta, tb = knots[a], knots[a + 1]
        h = tb - ta
        k1v, _ = force(ta, x, v)
        k1x = v
        k2v, _ = force(ta + 0.5 * h, x + 0.5 * h * k1x, v + 0.5 * h * k1v)
        k2x = v + 0.5 * h * k1v
        k3v, _ = force(ta + 0.5 * h, x + 0.5 * h * k2x, v + 0.5 * h * k2v)
        k3x = v + 0.5 * h * k2v
        k4v, _ = force(tb, x + h * k3x, v + h * k3v)
        k4x = v + h * k3v
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        rho_next = rho_at(tb, x)
        integral += 0.5 * h * (rho_here + rho_next)
        rho_here = rho_next
    return x, v, integral


def solve_characteristic(f_stack: IterateField, z, t: float, s: float) -> CharState:
    """Characteristic endpoint Z(s, t; z): the phase point at time s of
    the curve passing through z = (x, v) at time t.

    Both times must lie within the stack horizon; s < t integrates
    backward. Raises DomainExit when the final position leaves the
    x-grid (the force already reads as zero out there, so the curve
    itself stays well defined).
    """
    g = f_stack.grid
    horizon = float(f_stack.times[-1])
    for tau in (t, s):
        if not 0.0 <= tau <= horizon + 1e-12:
            raise ValueError(f"time {tau} outside stack horizon [0, {horizon}]")
    x = np.atleast_1d(np.asarray(z[0], dtype=np.float64)).reshape(1, g.d)
    v = np.atleast_1d(np.asarray(z[1], dtype=np.float64)).reshape(1, g.d)
    moments = (f_stack.times,) + _stack_moments(f_stack)
    xf, vf, _ = _flow(f_stack, moments, x, v, t, s)
    if (xf < 0.0).any() or (xf > g.lx).any():
        raise DomainExit(f"characteristic left the x-grid at position {xf[0]}")
    return CharState(x=xf[0], v=vf[0], s=s, t=t)


# ---------------------------------------------------------------- updates

def picard_apply(f_stack: IterateField, f0: DistributionField) -> IterateField:
    """One fixed-point update: rebuild every slice from f0 along the
    stack's own characteristics.

    Slice at time t gets f0(Z(0, t; z)) * exp(gamma d int_0^t rho ds)
    with the path integral by trapezoid along the integrated curve.
    Characteristics that exit the grid contribute zero, matching f0's
    vanishing off-support.
    """
    g = f_stack.grid
    if f0.grid != g:
        raise GridMismatch("f0 and stack grids differ")
    moments = (f_stack.times,) + _stack_moments(f_stack)
    x_pts, v_pts = _phase_nodes(g)
    new = [f0.copy()]
    for t in f_stack.times[1:]:
        xf, vf, integral = _flow(f_stack, moments, x_pts, v_pts, float(t), 0.0)
        growth = np.exp(-g.d * f_stack.gamma * integral)
        vals = _interp_phase(f0, xf, vf) * growth
        new.append(DistributionField(g, vals.reshape(g.shape), float(t)))
    return IterateField(f_stack.times.copy(), new, f_stack.gamma, n=f_stack.n + 1)


def picard_fixed_point(f0: DistributionField, gamma: float,
                       t_loc: float = DEFAULT_T_LOC,
                       tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER,
                       n_slices: int | None = None,
                       max_halvings: int = DEFAULT_MAX_HALVINGS) -> IterateField:
    """Iterate the update map from a free-streaming seed until the
    sup-norm increment drops below tol.

    Increments must shrink monotonically after the first update; growth
    or hitting max_iter raises NoConvergence, which halves the horizon
    and retries (up to max_halvings) since contraction only holds for
    small t_loc. The returned stack carries the increment sequence; its
    times tell the horizon actually used.
    """
    if t_loc <= 0 or tol <= 0:
        raise ValueError("t_loc and tol must be positive")
    horizon = float(t_loc)
    for attempt in range(max_halvings + 1):
        k = n_slices or min(MAX_SLICES, max(2, int(round(horizon / 1e-3)) + 1))
        try:
            return _iterate(f0, gamma, horizon, k, tol, max_iter)
        except NoConvergence:
            if attempt == max_halvings:
                raise
            horizon *= 0.5
    raise AssertionError("unreachable")


def _iterate(f0, gamma, horizon, n_slices, tol, max_iter):
    stack = IterateField.free_stream(f0, gamma, horizon, n_slices)
    increments: list[float] = []
    for _ in range(max_iter):
        new = picard_apply(stack, f0)
        inc = max(float(np.abs(b.values - a.values).max())
                  for a, b in zip(stack.slices, new.slices))
        increments.append(inc)
        if len(increments) >= 2 and inc > increments[-2]:
            raise NoConvergence(
                f"increments grew at iteration {new.n}: horizon {horizon} "
                "too large for contraction", increments)
        stack = new
        if inc < tol:
            stack.increments = np.asarray(increments)
            return stack
    raise NoConvergence(
        f"no fixed point within {max_iter} iterations at horizon {horizon}",
        increments)
