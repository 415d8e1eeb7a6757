"""Grid, moment, and observable checks against hand-computed values.

The frozen numbers below were derived by hand for small grids chosen so
cell centers land on exact binary or short decimal coordinates.
"""

import math

import numpy as np
import pytest

from kineticlab import (
    DistributionField,
    ObservableSeries,
    PhaseGrid,
    alignment_field,
    h_profile,
    mass_outside_q,
    moments,
    observables,
    production_rates,
    support_mask,
    support_set_Q,
)


def test_grid_geometry():
    g = PhaseGrid(d=1, lx=4.0, lv=4.0, nx=4, nv=4)
    assert g.dx == 1.0
    assert g.dv == 1.0
    np.testing.assert_array_equal(g.x_centers, [0.5, 1.5, 2.5, 3.5])
    np.testing.assert_array_equal(g.v_centers, [-1.5, -0.5, 0.5, 1.5])
    assert g.shape == (4, 4)
    assert g.cell_volume == 1.0
    assert g.x_volume == 4.0


def test_grid_geometry_2d():
    g = PhaseGrid(d=2, lx=2.0, lv=2.0, nx=4, nv=8)
    assert g.shape == (4, 4, 8, 8)
    assert g.cell_volume == pytest.approx(0.5**2 * 0.25**2)
    assert g.x_volume == 4.0
    v1, v2 = g.v_mesh()
    assert v1.shape == (8, 1)
    assert v2.shape == (1, 8)


def test_grid_validation():
    with pytest.raises(ValueError):
        PhaseGrid(d=3, lx=1.0, lv=1.0, nx=2, nv=2)
    with pytest.raises(ValueError):
        PhaseGrid(d=1, lx=-1.0, lv=1.0, nx=2, nv=2)
    with pytest.raises(ValueError):
        PhaseGrid(d=1, lx=1.0, lv=1.0, nx=0, nv=2)


def test_field_shape_checked():
    g = PhaseGrid(d=1, lx=1.0, lv=1.0, nx=4, nv=4)
    with pytest.raises(ValueError):
        DistributionField(g, np.zeros((4, 5)))


def test_moments_single_cell():
    # Lv=5, nv=25 puts v = 1.0 exactly at center index 17.
    g = PhaseGrid(d=1, lx=4.0, lv=5.0, nx=4, nv=25)
    assert g.v_centers[17] == 1.0
    vals = np.zeros(g.shape)
    vals[2, 17] = 5.0                      # rho = 5 * dv = 1
    mf = moments(DistributionField(g, vals))
    assert mf.rho[2] == pytest.approx(1.0, abs=1e-15)
    assert mf.mom[2, 0] == pytest.approx(1.0, abs=1e-15)
    assert mf.q[2] == pytest.approx(1.0, abs=1e-15)
    assert mf.u[2, 0] == pytest.approx(1.0, abs=1e-15)
    assert mf.u_defined[2]
    assert not mf.u_defined[0]
    assert mf.u[0, 0] == 0.0
    assert mf.rho[0] == 0.0


def test_moments_2d_mean_velocity():
    g = PhaseGrid(d=2, lx=2.0, lv=4.0, nx=2, nv=8)
    vals = np.zeros(g.shape)
    # two equal masses at v = (-0.25, 0.75) and (0.75, -0.25)
    ja = int((-0.25 + 2.0) / 0.5 - 0.5)
    jb = int((0.75 + 2.0) / 0.5 - 0.5)
    assert g.v_centers[ja] == -0.25 and g.v_centers[jb] == 0.75
    vals[0, 1, ja, jb] = 2.0
    vals[0, 1, jb, ja] = 2.0
    mf = moments(DistributionField(g, vals))
    np.testing.assert_allclose(mf.u[0, 1], [0.25, 0.25], atol=1e-14)
    assert mf.rho[0, 1] == pytest.approx(4.0 * 0.25, abs=1e-15)


def test_alignment_field_matches_direct_quadrature():
    g = PhaseGrid(d=1, lx=2.0, lv=4.0, nx=2, nv=40)
    vals = np.zeros(g.shape)
    vals[0, :] = np.where(np.abs(g.v_centers) < 1.0, 0.5, 0.0)
    vals[0, 35] = 2.0                      # breaks the symmetry, v_35 = 1.55
    f = DistributionField(g, vals)

    e = alignment_field(f, 0, 0.5)
    # rho = 1 + 0.2, m = 1.55 * 0.2; E = rho v - m
    assert e[0] == pytest.approx(1.2 * 0.5 - 0.31, abs=1e-12)
    # independent path: direct quadrature of (v - v*) f(x, v*)
    direct = ((0.5 - g.v_centers) * vals[0, :]).sum() * g.dv
    assert e[0] == pytest.approx(direct, rel=1e-13)


def test_observables_uniform_patch():
    """Uniform box f = 1/4 on (0,2)x(-1,1): every observable in closed form."""
    g = PhaseGrid(d=1, lx=2.0, lv=4.0, nx=40, nv=40)
    inside_v = np.abs(g.v_centers) < 1.0
    vals = np.where(inside_v[None, :], 0.25, 0.0) * np.ones((g.nx, 1))
    f = DistributionField(g, vals, time=0.0)
    row = observables(f, p_list=(2.0, 3.0), gamma=2.0)

    assert row.mass == pytest.approx(1.0, abs=1e-13)
    assert row.momentum[0] == pytest.approx(0.0, abs=1e-14)
    # midpoint sum of v^2 over the 20 occupied centers is exactly 0.665
    assert row.energy == pytest.approx(0.3325, abs=1e-13)
    assert row.entropy == pytest.approx(math.log(0.25), abs=1e-12)
    assert row.lp[0] == pytest.approx(0.25, abs=1e-13)
    assert row.lp[1] == pytest.approx(0.0625, abs=1e-13)
    assert row.radius_v == pytest.approx(0.95, abs=1e-12)
    assert row.radius_ft == pytest.approx(1.975, abs=1e-12)
    # rho = 1/2 per cell: dE = -2*(2 rho q - 2 m^2) summed, dH = 2 sum rho^2 dx
    assert row.energy_rate == pytest.approx(-0.665, abs=1e-13)
    assert row.entropy_rate == pytest.approx(1.0, abs=1e-13)
    assert row.lp_rates[0] == pytest.approx(0.25, abs=1e-13)

    # with the clock at t=1 the backward radius shrinks to sup |x - v|
    f.time = 1.0
    row_t = observables(f, gamma=0.0)
    xg, vg = np.meshgrid(g.x_centers, g.v_centers, indexing="ij")
    expected = np.abs(xg - vg)[support_mask(f)].max()
    assert row_t.radius_ft == pytest.approx(expected, abs=1e-12)


def test_observables_zero_field():
    g = PhaseGrid(d=1, lx=1.0, lv=1.0, nx=4, nv=4)
    row = observables(DistributionField(g, np.zeros(g.shape)))
    assert row.mass == 0.0
    assert row.entropy == 0.0
    assert row.radius_v == 0.0
    assert row.energy_rate == 0.0


def test_production_rates_match_loop_quadrature():
    """Vectorized rates against a plain-loop evaluation of the same sums."""
    rng = np.random.default_rng(7)
    g = PhaseGrid(d=1, lx=3.0, lv=2.0, nx=6, nv=12)
    vals = rng.random(g.shape) ** 2
    f = DistributionField(g, vals)
    gamma = 0.7
    e_rate, h_rate, lp_rates = production_rates(f, gamma, p_list=(2.0, 1.5))

    v = g.v_centers
    e_loop = 0.0
    h_loop = 0.0
    lp2_loop = 0.0
    lp15_loop = 0.0
    for i in range(g.nx):
        rho = vals[i].sum() * g.dv
        m = (vals[i] * v).sum() * g.dv
        q = (vals[i] * v**2).sum() * g.dv
        e_loop += -gamma * (2 * rho * q - 2 * m * m) * g.dx
        h_loop += gamma * rho**2 * g.dx
        lp2_loop += gamma * (vals[i] ** 2).sum() * g.dv * rho * g.dx
        lp15_loop += gamma * 0.5 * (vals[i] ** 1.5).sum() * g.dv * rho * g.dx
    assert e_rate == pytest.approx(e_loop, rel=1e-13)
    assert h_rate == pytest.approx(h_loop, rel=1e-13)
    assert lp_rates[0] == pytest.approx(lp2_loop, rel=1e-13)
    assert lp_rates[1] == pytest.approx(lp15_loop, rel=1e-13)

    # weak-form path for the energy: -2 gamma sum f v . (rho v - m)
    mfrho = vals.sum(axis=1) * g.dv
    mfm = (vals * v).sum(axis=1) * g.dv
    weak = (vals * v * (mfrho[:, None] * v[None, :] - mfm[:, None])).sum()
    assert e_rate == pytest.approx(-2 * gamma * weak * g.cell_volume, rel=1e-12)


def test_energy_rate_never_positive():
    rng = np.random.default_rng(123)
    g = PhaseGrid(d=2, lx=1.0, lv=2.0, nx=3, nv=6)
    for _ in range(5):
        vals = rng.random(g.shape)
        e_rate, h_rate, _ = production_rates(DistributionField(g, vals), 1.3)
        assert e_rate <= 0.0
        assert h_rate >= 0.0


def test_support_mask_reference():
    g = PhaseGrid(d=1, lx=1.0, lv=1.0, nx=2, nv=2)
    vals = np.array([[1.0, 5e-13], [0.0, 0.0]])
    f = DistributionField(g, vals)
    assert support_mask(f).sum() == 1              # 5e-13 < 1e-12 * max
    assert support_mask(f, support_ref=0.1).sum() == 2


def test_h_profile():
    g = PhaseGrid(d=1, lx=1.0, lv=1.0, nx=3, nv=2)
    vals = np.array([[1.0, 0.5], [2.0, 0.25], [0.5, 3.0]])
    np.testing.assert_array_equal(h_profile(DistributionField(g, vals)), [2.0, 3.0])


def test_support_set_q_diameter_bound():
    _, h0 = support_set_Q(0.5, 0.0)
    _, h_q = support_set_Q(0.5, 0.25)       # 2 r0 / t = 4 > 2 r0
    _, h2 = support_set_Q(0.5, 2.0)
    _, h_neg = support_set_Q(0.5, -1.0)
    assert h0 == 1.0
    assert h_q == 1.0
    assert h2 == 0.5
    assert h_neg == 1.0
    with pytest.raises(ValueError):
        support_set_Q(0.0, 1.0)


def test_support_set_q_membership():
    contains, _ = support_set_Q(0.5, 2.0)
    assert contains(2 * 0.2 + 0.4, 0.2)          # |x - vt| = 0.4
    assert not contains(2 * 0.2 + 0.6, 0.2)      # |x - vt| = 0.6
    assert not contains(0.0, 0.7)                # speed too large
    # d=2 points as trailing-axis vectors
    x = np.array([[0.8, 0.0], [2.0, 0.0]])
    v = np.array([[0.4, 0.0], [0.4, 0.0]])
    got = contains(x, v)
    assert got[0] and not got[1]


def test_mass_outside_q():
    g = PhaseGrid(d=1, lx=2.0, lv=4.0, nx=40, nv=40)
    vals = np.zeros(g.shape)
    vals[9, 29] = 4.0     # (x, v) = (0.475, 0.95): |x - v| = 0.475 at t=1
    vals[39, 10] = 2.0    # (x, v) = (1.975, -0.95): |x - v| = 2.925 at t=1
    f = DistributionField(g, vals, time=1.0)
    out = mass_outside_q(f, r0=1.0, center_x=np.array([0.0]),
                         center_v=np.array([0.0]))
    assert out == pytest.approx(2.0 * g.cell_volume, rel=1e-13)

    # same field read at t=0: the far cell is outside in x alone
    f0 = DistributionField(g, vals, time=0.0)
    out0 = mass_outside_q(f0, r0=1.0, center_x=np.array([0.0]),
                          center_v=np.array([0.0]))
    assert out0 == pytest.approx(2.0 * g.cell_volume, rel=1e-13)


def test_mass_outside_q_galilean_recentering():
    # A parcel exactly on the boost orbit stays inside for all t.
    g = PhaseGrid(d=1, lx=4.0, lv=4.0, nx=80, nv=40)
    cv = np.array([0.5])
    cx = np.array([1.0])
    t = 2.0
    vals = np.zeros(g.shape)
    j = 24                                   # v = -2 + 24.5 * 0.1 = 0.45
    assert g.v_centers[j] == pytest.approx(0.45)
    # physical position after drift: x = cx + v t + offset, offset = 0.125
    x_target = 1.0 + 0.45 * t + 0.125
    i = int(round(x_target / g.dx - 0.5))
    assert g.x_centers[i] == pytest.approx(x_target)
    vals[i, j] = 1.0
    f = DistributionField(g, vals, time=t)
    assert mass_outside_q(f, 0.2, cx, cv) == 0.0
    # shrinking the radius below the offset pushes it outside
    assert mass_outside_q(f, 0.1, cx, cv) == pytest.approx(
        vals.sum() * g.cell_volume)


def test_series_header_and_order():
    s = ObservableSeries(p_list=(2.0, 3.5))
    assert s.header(1) == [
        "t", "mass", "mom_1", "energy", "entropy", "lp_2", "lp_3.5",
        "R", "S", "dE_dt", "dH_dt", "dLp_2_dt", "dLp_3.5_dt",
    ]
    assert s.header(2)[2:4] == ["mom_1", "mom_2"]

    g = PhaseGrid(d=1, lx=1.0, lv=1.0, nx=2, nv=2)
    f = DistributionField(g, np.ones(g.shape))
    r0 = observables(f, p_list=(2.0, 3.5))
    s.append(r0)
    with pytest.raises(ValueError):
        s.append(r0)                        # same time not allowed
    f2 = DistributionField(g, np.ones(g.shape), time=0.5)
    s.append(observables(f2, p_list=(2.0, 3.5)))
    assert len(s.rows) == 2
    np.testing.assert_array_equal(s.times, [0.0, 0.5])
