"""Space-homogeneous alignment dynamics in closed form.

When f does not depend on x, the equation reduces to

    df/dt = gamma * div_v( (m v - m vbar) f ),

with constant mass m and mean velocity vbar, and has the explicit solution

    f(t, v) = exp(gamma m d t) * f0( vbar + exp(gamma m t) (v - vbar) ).

Velocities contract exponentially toward vbar while the density grows so
that mass is conserved. The observable laws follow directly:

    sup f(t)   = exp( gamma m d t) * sup f0
    R(t)       = exp(-gamma m t)   * R(0),  R = support radius about vbar
    energy(t)  = m |vbar|^2 + exp(-2 gamma m t) * integral |v-vbar|^2 f0
    entropy(t) = H[f0] + gamma m^2 d t

This module doubles as the alignment half-step of the splitting solver:
each position cell is a homogeneous problem with its own (rho, u), advanced
exactly by `alignment_substep` via a conservative remap of cell masses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .grid import ENTROPY_FLOOR, SUPPORT_REL


@dataclass
class HomogeneousState:
    """A homogeneous profile f0 plus the scalars its laws depend on.

    `f0` maps velocity arrays to densities; for d=1 it accepts plain (...)
    arrays. The reference scalars (sup, support radius about vbar, centered
    second moment, entropy) are whatever the constructor computed; gridded
    constructors carry their quadrature error into the laws.
    """

    gamma: float
    d: int
    m: float                      # total mass
    vbar: np.ndarray              # (d,) conserved mean velocity
    f0: Callable[[np.ndarray], np.ndarray]
    linf0: float
    r0: float
    spread0: float                # integral |v - vbar|^2 f0 dv
    entropy0: float

    @staticmethod
    def uniform_1d(gamma: float, center: float, halfwidth: float, height: float) -> "HomogeneousState":
        """Uniform profile height * 1_{|v - center| < halfwidth}."""
        if halfwidth <= 0 or height <= 0:
            raise ValueError("halfwidth and height must be positive")
        m = 2.0 * halfwidth * height

        def f0(v: np.ndarray) -> np.ndarray:
            v = np.asarray(v, dtype=np.float64)
            return np.where(np.abs(v - center) < halfwidth, height, 0.0)

        return HomogeneousState(
            gamma=gamma,
            d=1,
            m=m,
            vbar=np.array([center]),
            f0=f0,
            linf0=height,
            r0=halfwidth,
            spread0=2.0 * height * halfwidth**3 / 3.0,
            entropy0=m * math.log(height),
        )

    @staticmethod
    def from_grid_1d(gamma: float, v_centers: np.ndarray, values: np.ndarray) -> "HomogeneousState":
        """Build from a sampled 1-D profile; scalars by midpoint quadrature."""
        v = np.asarray(v_centers, dtype=np.float64)
        f = np.asarray(values, dtype=np.float64)
        dv = float(v[1] - v[0])
        m = float(f.sum() * dv)
        if m <= 0:
            raise ValueError("profile must carry positive mass")
        vbar = float((v * f).sum() * dv / m)
        supp = f > SUPPORT_REL * f.max()
        r0 = float(np.abs(v[supp] - vbar).max()) if supp.any() else 0.0

        def f0(w: np.ndarray) -> np.ndarray:
            return np.interp(np.asarray(w, dtype=np.float64), v, f, left=0.0, right=0.0)

        return HomogeneousState(
            gamma=gamma,
            d=1,
            m=m,
            vbar=np.array([vbar]),
            f0=f0,
            linf0=float(f.max()),
            r0=r0,
            spread0=float(((v - vbar) ** 2 * f).sum() * dv),
            entropy0=float((f * np.log(np.maximum(f, ENTROPY_FLOOR))).sum() * dv),
        )


def _vbar_for(state: HomogeneousState, v: np.ndarray):
    """Scalar vbar for flat d=1 arrays, the (d,) vector for (..., d) input."""
    if state.d > 1 and v.ndim and v.shape[-1] == state.d:
        return state.vbar
    return state.vbar[0]


def exact_solution(state: HomogeneousState, t: float, v: np.ndarray) -> np.ndarray:
    """Evaluate the explicit solution at time t and velocities v."""
    g, m, d = state.gamma, state.m, state.d
    v = np.asarray(v, dtype=np.float64)
    vb = _vbar_for(state, v)
    arg = vb + math.exp(g * m * t) * (v - vb)
    return math.exp(g * m * d * t) * np.asarray(state.f0(arg), dtype=np.float64)


def exact_characteristic(state: HomogeneousState, t: float, v0: np.ndarray) -> np.ndarray:
    """Velocity characteristic V(t) = vbar + exp(-gamma m t) (v0 - vbar)."""
    v0 = np.asarray(v0, dtype=np.float64)
    vb = _vbar_for(state, v0)
    return vb + math.exp(-state.gamma * state.m * t) * (v0 - vb)


def exact_observables(state: HomogeneousState, t: float) -> dict[str, float]:
    """Closed-form observable laws at time t."""
    g, m, d = state.gamma, state.m, state.d
    return {
        "linf": math.exp(g * m * d * t) * state.linf0,
        "R": math.exp(-g * m * t) * state.r0,
        "energy": m * float((state.vbar**2).sum()) + math.exp(-2.0 * g * m * t) * state.spread0,
        "entropy": state.entropy0 + g * m * m * d * t,
    }


def advance(state: HomogeneousState, s: float) -> HomogeneousState:
    """State whose profile is f(s, .); the semigroup composition helper."""
    g, m, d = state.gamma, state.m, state.d
    old = state.f0
    vb = state.vbar
    grow = math.exp(g * m * d * s)
    shrink = math.exp(g * m * s)

    def f0(v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        vbar = vb if (d > 1 and v.ndim and v.shape[-1] == d) else vb[0]
        return grow * np.asarray(old(vbar + shrink * (v - vbar)), dtype=np.float64)

    return replace(
        state,
        f0=f0,
        linf0=grow * state.linf0,
        r0=state.r0 / shrink,
        spread0=state.spread0 / shrink**2,
        entropy0=state.entropy0 + g * m * m * d * s,
    )


def alignment_substep(
    f_slice: np.ndarray,
    v_centers: np.ndarray,
    rho: float,
    u: np.ndarray | float,
    gamma: float,
    dt: float,
) -> np.ndarray:
    """Advance one velocity slice exactly under its frozen (rho, u).

    Works for d=1 slices of shape (nv,) and d=2 slices of shape (nv, nv),
    contracting each axis toward the matching component of u by the factor
    exp(-gamma rho dt). Cell masses are deposited at the image of their
    centers with linear weights on the two bracketing cells, which
    conserves mass exactly and, when u is the slice's own quadrature mean,
    the mean velocity to rounding. With rho = 0 or dt = 0 the slice is
    returned unchanged (vacuum cells are fixed points).
    """
    f_slice = np.asarray(f_slice, dtype=np.float64)
    if gamma * rho * dt < 0:
        raise ValueError("gamma * rho * dt must be nonnegative (contraction only)")
    if rho <= 0.0 or dt == 0.0 or gamma == 0.0:
        return f_slice.copy()

    lam = math.exp(-gamma * rho * dt)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    out = f_slice
    for axis in range(f_slice.ndim):
        out = _contract_axis(out, v_centers, float(u[axis]), lam, axis)
    return out


def _contract_axis(f: np.ndarray, v: np.ndarray, u: float, lam: float, axis: int) -> np.ndarray:
    """Deposit cell values at contracted center positions along one axis.

    Targets p_j = u + lam (v_j - u) stay inside the convex hull of the
    grid for lam <= 1, so no mass is clipped.
    """
    dv = float(v[1] - v[0])
    p = u + lam * (v - u)
    s = (p - v[0]) / dv            # fractional center index
    k = np.floor(s).astype(np.int64)
    th = s - k
    nv = v.shape[0]
    k = np.clip(k, -1, nv - 1)     # guard only; contraction never clips

    f_moved = np.moveaxis(f, axis, 0)
    shape_tail = (1,) * (f_moved.ndim - 1)
    w_lo = (1.0 - th).reshape((nv,) + shape_tail)
    w_hi = th.reshape((nv,) + shape_tail)

    out = np.zeros_like(f_moved)
    lo_ok = k >= 0
    hi_ok = k + 1 <= nv - 1
    np.add.at(out, k[lo_ok], (w_lo * f_moved)[lo_ok])
    np.add.at(out, (k + 1)[hi_ok], (w_hi * f_moved)[hi_ok])
    return np.moveaxis(out, 0, axis)
