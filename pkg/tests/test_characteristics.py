"""Characteristic solves and the fixed-point update map.

Closed-form oracles: free flight, the exponential contraction of an
x-constant field (backwards in time it expands), and piecewise-linear
tent data that the multilinear lookup reproduces exactly.
"""

import numpy as np
import pytest

from kineticlab import characteristics as ch
from kineticlab.errors import DomainExit, GridMismatch, NoConvergence
from kineticlab.fields import constant_in_x, smooth_patch
from kineticlab.grid import DistributionField, PhaseGrid
from kineticlab.homogeneous import HomogeneousState, exact_solution
from kineticlab.solver import run


def patch_setup():
    g = PhaseGrid(d=1, lx=4.0, lv=4.0, nx=32, nv=32)
    return g, smooth_patch(g, 2.0, 0.2, 0.6, 0.5)


def homogeneous_setup():
    """Unit-density x-constant state: rho = 1, mean velocity 0."""
    g = PhaseGrid(d=1, lx=4.0, lv=8.0, nx=16, nv=64)
    prof = np.cos(np.pi * g.v_centers / 2.0) ** 2
    prof[np.abs(g.v_centers) > 1.0] = 0.0
    prof /= prof.sum() * g.dv
    return g, prof


def tent_field(g):
    """Product of tents with kinks on cell centers: the multilinear
    lookup reproduces this exactly at any point."""
    cx, wx = g.x_centers[16], 4 * g.dx
    cv, wv = g.v_centers[16], 4 * g.dv
    tx = np.maximum(0.0, 1.0 - np.abs(g.x_centers - cx) / wx)
    tv = np.maximum(0.0, 1.0 - np.abs(g.v_centers - cv) / wv)
    def formula(x, v):
        return (np.maximum(0.0, 1.0 - np.abs(x - cx) / wx)
                * np.maximum(0.0, 1.0 - np.abs(v - cv) / wv))
    return DistributionField(g, np.outer(tx, tv)), formula


# ------------------------------------------------------------ ODE solves

def test_coincident_times_return_the_point():
    g, f0 = patch_setup()
    stack = ch.IterateField.free_stream(f0, 1.0, 0.05, 11)
    st = ch.solve_characteristic(stack, (1.7, -0.4), 0.03, 0.03)
    assert st.x[0] == 1.7 and st.v[0] == -0.4
    assert st.s == st.t == 0.03


def test_zero_coupling_is_free_flight():
    g, f0 = patch_setup()
    stack = ch.IterateField.free_stream(f0, 0.0, 0.05, 11)
    st = ch.solve_characteristic(stack, (2.2, 0.7), 0.04, 0.0)
    assert st.x[0] == pytest.approx(2.2 - 0.7 * 0.04, abs=1e-13)
    assert st.v[0] == pytest.approx(0.7, abs=1e-15)


def test_backward_solve_through_constant_field_expands():
    # x-constant unit-density field: the force is v itself, so forward
    # curves contract toward the bulk and the backward solve expands,
    # V(s) = v exp(t - s), X(s) = x - v (exp(t - s) - 1)
    g, prof = homogeneous_setup()
    f = constant_in_x(g, prof)
    times = np.linspace(0.0, 0.05, 51)
    stack = ch.IterateField(times, [f.copy() for _ in times], 1.0)
    for v0 in (-0.8, -0.2, 0.3, 0.9):
        st = ch.solve_characteristic(stack, (2.0, v0), 0.05, 0.01)
        grow = np.exp(0.05 - 0.01)
        assert st.v[0] == pytest.approx(v0 * grow, abs=1e-12)
        assert st.x[0] == pytest.approx(2.0 - v0 * (grow - 1.0), abs=1e-12)


def test_backward_forward_round_trip():
    g, f0 = patch_setup()
    stack = ch.IterateField.free_stream(f0, 1.0, 0.05, 51)
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = rng.uniform(1.5, 2.5)
        v = rng.uniform(-0.5, 0.9)
        back = ch.solve_characteristic(stack, (x, v), 0.05, 0.0)
        fwd = ch.solve_characteristic(stack, (back.x, back.v), 0.0, 0.05)
        assert abs(fwd.x[0] - x) <= 10 * ch.ODE_TOL     # measured 9e-16
        assert abs(fwd.v[0] - v) <= 10 * ch.ODE_TOL


def test_exit_through_the_left_edge_raises():
    g, f0 = patch_setup()
    stack = ch.IterateField.free_stream(f0, 0.0, 0.05, 11)
    with pytest.raises(DomainExit):
        ch.solve_characteristic(stack, (0.1, 3.0), 0.05, 0.0)


def test_times_outside_the_horizon_are_rejected():
    g, f0 = patch_setup()
    stack = ch.IterateField.free_stream(f0, 1.0, 0.05, 11)
    with pytest.raises(ValueError):
        ch.solve_characteristic(stack, (2.0, 0.1), 0.2, 0.0)
    with pytest.raises(ValueError):
        ch.solve_characteristic(stack, (2.0, 0.1), 0.05, -0.01)


# ------------------------------------------------------- update map

def test_update_keeps_the_initial_slice():
    g, f0 = patch_setup()
    stack = ch.IterateField.free_stream(f0, 1.0, 0.05, 11)
    out = ch.picard_apply(stack, f0)
    assert np.array_equal(out.slices[0].values, f0.values)
    assert out.n == stack.n + 1


def test_update_with_zero_coupling_is_free_transport():
    g = PhaseGrid(d=1, lx=4.0, lv=4.0, nx=32, nv=32)
    f0, formula = tent_field(g)
    stack = ch.IterateField.free_stream(f0, 0.0, 0.05, 11)
    out = ch.picard_apply(stack, f0)
    xg, vg = np.meshgrid(g.x_centers, g.v_centers, indexing="ij")
    for t, s in zip(out.times, out.slices):
        expected = formula(xg - vg * t, vg)
        assert np.abs(s.values - expected).max() <= 1e-12
        assert s.values.min() >= 0.0


def test_update_reproduces_the_exact_constant_in_x_evolution():
    # feeding the update the exact evolution must return it: growth
    # factor exp(t) against f0 evaluated at expanded velocities
    g, prof = homogeneous_setup()
    state = HomogeneousState.from_grid_1d(1.0, g.v_centers, prof)
    times = np.linspace(0.0, 0.05, 26)
    slices = []
    for t in times:
        vals = np.broadcast_to(exact_solution(state, float(t), g.v_centers),
                               g.shape).copy()
        slices.append(DistributionField(g, vals, float(t)))
    stack = ch.IterateField(times, slices, 1.0)
    out = ch.picard_apply(stack, slices[0].copy())
    exact = exact_solution(state, 0.05, g.v_centers)
    interior = np.abs(g.x_centers - 2.0) <= 1.0
    err = np.abs(out.slices[-1].values[interior] - exact[None, :]).max()
    assert err <= 5e-4 * exact.max()       # measured 1.2e-4, v-lookup error


def test_update_rejects_mismatched_grids():
    g, f0 = patch_setup()
    stack = ch.IterateField.free_stream(f0, 1.0, 0.05, 11)
    other = smooth_patch(PhaseGrid(d=1, lx=4.0, lv=4.0, nx=16, nv=16),
                         2.0, 0.2, 0.6, 0.5)
    with pytest.raises(GridMismatch):
        ch.picard_apply(stack, other)


# ------------------------------------------------------- fixed point

def test_fixed_point_contracts_and_matches_the_splitting_solver():
    g, f0 = patch_setup()
    fp = ch.picard_fixed_point(f0, 1.0, 0.05)
    incs = fp.increments
    assert incs[-1] < ch.DEFAULT_TOL
    assert (np.diff(incs) < 0).all()
    assert (incs[1:] / incs[:-1] <= 0.6).all()          # measured <= 1.5e-3
    for s in fp.slices:
        assert s.values.min() >= 0.0
    # v-support never grows beyond the initial data's
    vcols = fp.slices[-1].values.sum(axis=0) > 1e-12 * f0.values.max()
    v0cols = f0.values.sum(axis=0) > 1e-12 * f0.values.max()
    assert vcols.sum() <= v0cols.sum() + 2

    res = run(f0, 1.0, 1e-3, 50)
    dist = np.abs(res.final.values - fp.slices[-1].values).sum() * g.cell_volume
    assert dist <= 0.015 * f0.mass()                    # measured 0.0068


def test_fixed_point_with_zero_coupling_needs_one_iteration():
    g = PhaseGrid(d=1, lx=4.0, lv=4.0, nx=32, nv=32)
    f0, formula = tent_field(g)
    fp = ch.picard_fixed_point(f0, 0.0, 0.05)
    assert fp.n == 1
    assert len(fp.increments) == 1
    assert fp.increments[0] < 1e-12
    xg, vg = np.meshgrid(g.x_centers, g.v_centers, indexing="ij")
    expected = formula(xg - vg * fp.times[-1], vg)
    assert np.abs(fp.slices[-1].values - expected).max() <= 1e-12


def test_exhausted_iterations_report_the_increment_history():
    g, f0 = patch_setup()
    with pytest.raises(NoConvergence) as exc:
        ch.picard_fixed_point(f0, 1.0, 0.05, tol=1e-9, max_iter=2,
                              max_halvings=0)
    incs = exc.value.increments
    assert len(incs) == 2
    assert incs[0] > incs[1] > 1e-9


def test_horizon_halves_until_the_budget_fits():
    g, f0 = patch_setup()
    fp = ch.picard_fixed_point(f0, 1.0, 0.05, tol=1e-6, max_iter=2,
                               max_halvings=4)
    assert fp.times[-1] == pytest.approx(0.0125)        # two halvings
    assert fp.increments[-1] < 1e-6


def test_growing_increments_abort_instead_of_iterating_blindly():
    g, f0 = patch_setup()
    with pytest.raises(NoConvergence) as exc:
        ch.picard_fixed_point(f0, 2000.0, 0.05, max_iter=10, max_halvings=0)
    incs = exc.value.increments
    assert len(incs) == 2
    assert incs[1] > incs[0]


# ------------------------------------------------------------ stack type

def test_stack_validation():
    g, f0 = patch_setup()
    with pytest.raises(ValueError):
        ch.IterateField(np.linspace(0, 0.05, 65), [f0.copy() for _ in range(65)], 1.0)
    with pytest.raises(ValueError):
        ch.IterateField(np.array([0.0, 0.0]), [f0.copy(), f0.copy()], 1.0)
    with pytest.raises(ValueError):
        ch.IterateField(np.array([0.01, 0.02]), [f0.copy(), f0.copy()], 1.0)
    neg = f0.copy()
    neg.values[0, 0] = -1.0
    with pytest.raises(ValueError):
        ch.IterateField(np.array([0.0, 0.05]), [f0.copy(), neg], 1.0)
    big = PhaseGrid(d=1, lx=4.0, lv=4.0, nx=128, nv=32)
    fb = smooth_patch(big, 2.0, 0.2, 0.6, 0.5)
    with pytest.raises(ValueError):
        ch.IterateField.free_stream(fb, 1.0, 0.05, 11)
