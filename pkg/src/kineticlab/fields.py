"""Initial-condition builders on a phase grid.

All builders return a DistributionField at time 0 with values sampled at
cell centers. Compact support is deliberate: the model's confinement and
scattering diagnostics all assume the initial datum lives in a box.
"""

from __future__ import annotations

import numpy as np

from .grid import DistributionField, PhaseGrid


def _broadcast_coords(grid: PhaseGrid):
    """Position and velocity center arrays shaped to broadcast to grid.shape."""
    d = grid.d
    xc = grid.x_centers
    vc = grid.v_centers
    xs = []
    vs = []
    for c in range(d):
        shape = [1] * (2 * d)
        shape[c] = grid.nx
        xs.append(xc.reshape(shape))
        shape = [1] * (2 * d)
        shape[d + c] = grid.nv
        vs.append(vc.reshape(shape))
    return xs, vs


def uniform_patch(
    grid: PhaseGrid,
    center_x,
    center_v,
    half_width: float,
    height: float,
) -> DistributionField:
    """Indicator of a product box, sampled at cell centers.

    f0 = height on { max_c |x_c - cx_c| < w } x { max_c |v_c - cv_c| < w },
    zero elsewhere. Cells whose center sits exactly on the edge are out.
    """
    if half_width <= 0 or height <= 0:
        raise ValueError("half_width and height must be positive")
    cx = np.broadcast_to(np.asarray(center_x, dtype=np.float64), (grid.d,))
    cv = np.broadcast_to(np.asarray(center_v, dtype=np.float64), (grid.d,))
    xs, vs = _broadcast_coords(grid)
    inside = np.ones(grid.shape, dtype=bool)
    for c in range(grid.d):
        inside &= np.abs(xs[c] - cx[c]) < half_width
        inside &= np.abs(vs[c] - cv[c]) < half_width
    vals = np.where(inside, float(height), 0.0)
    if not vals.any():
        raise ValueError("patch does not cover any cell center")
    return DistributionField(grid, vals, 0.0)


def smooth_patch(
    grid: PhaseGrid,
    center_x,
    center_v,
    half_width: float,
    height: float,
) -> DistributionField:
    """C^1 bump: product of cos^2 profiles over every axis.

    f0 = height * prod_c cos^2(pi (x_c - cx_c) / (2 w)) cos^2(same in v)
    inside the box of uniform_patch, zero outside. Smoothness keeps the
    remap error of the splitting solver at its formal order, which the
    discontinuous patch would degrade.
    """
    if half_width <= 0 or height <= 0:
        raise ValueError("half_width and height must be positive")
    cx = np.broadcast_to(np.asarray(center_x, dtype=np.float64), (grid.d,))
    cv = np.broadcast_to(np.asarray(center_v, dtype=np.float64), (grid.d,))
    xs, vs = _broadcast_coords(grid)
    vals = np.full(grid.shape, float(height))
    for c in range(grid.d):
        zx = (xs[c] - cx[c]) / half_width
        zv = (vs[c] - cv[c]) / half_width
        vals = vals * np.where(np.abs(zx) < 1, np.cos(0.5 * np.pi * zx) ** 2, 0.0)
        vals = vals * np.where(np.abs(zv) < 1, np.cos(0.5 * np.pi * zv) ** 2, 0.0)
    if not vals.any():
        raise ValueError("patch does not cover any cell center")
    return DistributionField(grid, vals, 0.0)


def constant_in_x(grid: PhaseGrid, profile: np.ndarray) -> DistributionField:
    """Field equal to the given velocity profile at every position cell.

    `profile` has shape (nv,) for d=1 or (nv, nv) for d=2. Useful for
    checking against the exactly solvable space-homogeneous dynamics.
    """
    profile = np.asarray(profile, dtype=np.float64)
    if profile.shape != (grid.nv,) * grid.d:
        raise ValueError(
            f"profile shape {profile.shape} != {(grid.nv,) * grid.d}")
    if profile.min() < 0:
        raise ValueError("profile must be nonnegative")
    vals = np.broadcast_to(profile, grid.shape).copy()
    return DistributionField(grid, vals, 0.0)
