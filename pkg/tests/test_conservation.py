from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg

from ultracalc.calculus import assemble_derivative, region_integral
from ultracalc.conservation import (
    FluxModel, MarginViolation, NonFiniteState, SolverConfig, advection, burgers, conservation_report,
    default_dt, margin_limited_time, semidiscrete_rhs, solve, step_rk4, total_mass,
)
from ultracalc.grid import Grid, Region
from ultracalc.ultraspace import Ultrafunction, project_function


def compact_bump(x, centre=0.0, width=0.4):
    s = (x - centre) / width
    return np.where(np.abs(s) < 1, (1 - s * s) ** 3, 0.0)


def bump_1d(n: int = 64):
    g = Grid((n,), (-1.0,), 2.0 / n)
    return project_function(lambda p: compact_bump(p[..., 0]), g)


def test_zero_state_zero_rhs():
    g = Grid((8,), (0.0,), 0.125)
    assert np.all(semidiscrete_rhs(0.0, Ultrafunction.zeros(g), burgers(1)).coeffs == 0.0)


def test_advection_rhs_stencil(rng):
    g = Grid((8,), (0.0,), 0.125)
    c = rng.standard_normal(8)
    rhs = semidiscrete_rhs(0.0, Ultrafunction(g, c), advection([1.5])).coeffs
    padded = np.pad(c, 1)
    np.testing.assert_allclose(rhs, -1.5 * (padded[2:] - padded[:-2]) / (2 * g.h), rtol=1e-14)


def test_burgers_rhs_has_zero_mass():
    u = bump_1d()
    rhs = semidiscrete_rhs(0.0, u, burgers(1))
    assert abs(total_mass(rhs)) <= 1e-13 * np.sum(np.abs(rhs.coeffs)) * u.grid.h


def test_rk4_zero_rhs_leaves_state():
    g = Grid((6,), (0.0,), 0.25)
    still = FluxModel((lambda t, x, u: np.zeros_like(u),))
    u = Ultrafunction(g, np.arange(6.0))
    assert step_rk4(0.0, u, 0.1, still) == u


def test_rk4_matches_exponential_to_fifth_order():
    g = Grid((8,), (0.0,), 0.125)
    A = -assemble_derivative(g, 0).matrix.toarray()
    u = Ultrafunction(g, np.sin(np.linspace(0, 3, 8)))
    errors = []
    for dt in (0.02, 0.01):
        exact = scipy.linalg.expm(dt * A) @ u.coeffs
        errors.append(np.max(np.abs(step_rk4(0.0, u, dt, advection([1.0])).coeffs - exact)))
    assert math.log2(errors[0] / errors[1]) == pytest.approx(5.0, abs=0.3)


def test_rk4_step_preserves_mass():
    u = bump_1d()
    v = step_rk4(0.0, u, 0.01, burgers(1))
    assert abs(total_mass(v) - total_mass(u)) <= 1e-13 * abs(total_mass(u))


def test_zero_initial_data():
    g = Grid((8,), (0.0,), 0.125)
    trace = solve(Ultrafunction.zeros(g), burgers(1), SolverConfig(T=0.5, dt=0.1))
    assert all(np.all(s.coeffs == 0.0) for s in trace.snapshots)


def test_burgers_mass_conserved():
    u0 = bump_1d(128)
    F = burgers(1)
    T = 0.5 * margin_limited_time(u0, F)
    trace = solve(u0, F, SolverConfig(T=T, snap_every=T / 4))
    assert trace.q_drift <= 1e-10 * abs(trace.q[0])
    assert trace.times[-1] == pytest.approx(T)
    assert np.all(np.diff(trace.times) > 0)


def test_time_grid_hits_final_time():
    trace = solve(bump_1d(), advection([1.0]), SolverConfig(T=0.1, dt=0.03))
    assert trace.dt == pytest.approx(0.025)
    assert trace.step_times[-1] == pytest.approx(0.1)


def test_advection_second_order_in_space():
    errors = []
    for n in (64, 128, 256):
        g = Grid((n,), (-2.0,), 4.0 / n)
        u0 = project_function(lambda p: np.exp(-20 * p[..., 0] ** 2), g)
        T = 0.25
        trace = solve(u0, advection([1.0]), SolverConfig(T=T, dt=0.05 * g.h))
        exact = project_function(lambda p: np.exp(-20 * (p[..., 0] - T) ** 2), g)
        errors.append(np.max(np.abs(trace.snapshots[-1].coeffs - exact.coeffs)))
    orders = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert all(o == pytest.approx(2.0, abs=0.25) for o in orders), orders


def test_margin_violation_raises():
    g = Grid((32,), (-1.0,), 1 / 16)
    u0 = project_function(lambda p: np.exp(-40 * (p[..., 0] - 0.6) ** 2), g)
    with pytest.raises(MarginViolation) as info:
        solve(u0, advection([1.0]), SolverConfig(T=1.0))
    assert info.value.cell[0] >= 30


def test_initial_data_inside_margin_rejected():
    g = Grid((8,), (0.0,), 0.125)
    u0 = Ultrafunction(g, [1, 0, 0, 0, 0, 0, 0, 0])
    with pytest.raises(MarginViolation):
        solve(u0, burgers(1), SolverConfig(T=0.1))


def test_non_finite_flux():
    g = Grid((16,), (0.0,), 1 / 16)
    u0 = project_function(lambda p: compact_bump(p[..., 0], 0.5, 0.2), g)
    bad = FluxModel((lambda t, x, u: np.where(u > 0.5, np.inf, u),))
    with pytest.raises(NonFiniteState):
        solve(u0, bad, SolverConfig(T=0.1, dt=0.01))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(T=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(T=1.0, dt=0.0)
    with pytest.raises(ValueError):
        SolverConfig(T=1.0, support_margin=0)


def test_default_dt_follows_wave_speed():
    u0 = bump_1d()
    assert default_dt(u0, advection([2.0])) == pytest.approx(0.2 * u0.grid.h / 2.0, rel=1e-6)


def test_conservation_report_covering_region():
    u0 = bump_1d()
    trace = solve(u0, burgers(1), SolverConfig(T=0.1, snap_every=0.05))
    rows = conservation_report(trace, Region.full(u0.grid))
    for row in rows:
        assert abs(row.boundary_flux) <= 1e-14
        assert abs(row.rate) <= 1e-12 * row.scale


def test_conservation_report_half_region_outflux():
    g = Grid((64,), (-1.0,), 1 / 32)
    u0 = project_function(lambda p: compact_bump(p[..., 0]), g)
    left = Region.box(g, (0,), (32,))
    trace = solve(u0, advection([1.0]), SolverConfig(T=0.1, dt=0.002, snap_every=0.02), regions={"left": left})
    rows = conservation_report(trace, left, ledger_name="left")
    for row in rows:
        assert row.boundary_flux < 0  # mass leaves the left half
        assert row.residual <= 1e-12 * row.scale
        assert row.fd_residual <= 1e-4 * abs(row.boundary_flux)
    assert trace.ledger["left"][-1] < trace.ledger["left"][0]


def test_static_state_zero_residuals():
    g = Grid((8,), (0.0,), 0.125)
    still = FluxModel((lambda t, x, u: np.zeros_like(u),))
    trace = solve(Ultrafunction(g, [0, 0, 0, 1, 2, 0, 0, 0]), still, SolverConfig(T=0.2, dt=0.1, snap_every=0.1))
    rows = conservation_report(trace, Region.box(g, (0,), (4,)), ledger_name=None)
    assert all(r.rate == 0.0 and r.boundary_flux == 0.0 and r.residual == 0.0 for r in rows)


def test_growth_bound_flagged_not_fatal():
    trace = solve(bump_1d(), burgers(1), SolverConfig(T=0.05))
    assert trace.growth_violations == 0
    tight = FluxModel(burgers(1).components, c1=0.0, c2=0.01, name="tight")
    trace = solve(bump_1d(), tight, SolverConfig(T=0.05))
    assert trace.growth_violations > 0


def test_runs_are_bit_identical():
    u0 = bump_1d()
    a = solve(u0, burgers(1), SolverConfig(T=0.2, snap_every=0.05))
    b = solve(u0, burgers(1), SolverConfig(T=0.2, snap_every=0.05))
    assert a.q == b.q
    assert all(x == y for x, y in zip(a.snapshots, b.snapshots))


def test_region_ledger_matches_region_integral():
    u0 = bump_1d()
    r = Region.box(u0.grid, (10,), (40,))
    trace = solve(u0, burgers(1), SolverConfig(T=0.05), regions={"r": r})
    assert trace.ledger["r"][0] == region_integral(u0, r)
