import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mixedpipe.closures import ClosureError, FlowState, FluidConstants, pressure
from mixedpipe.diagnostics import mass_total
from mixedpipe.geometry import CellGeometry
from mixedpipe.solver import (
    BoundaryCondition, Mesh, PositivityError, ProfileSpec, Region, SimConfig, Simulation,
    SolverError, apply_bc, cfl_dt, initial_state, interface_flux, run, step, update_indicator,
)

C = FluidConstants()
UNIT = CellGeometry.circular(1.0)
PI = math.pi


def mesh(n=20, **kw):
    spec = ProfileSpec(**{"length": float(n), "radius": 1.0, **kw})
    return Mesh.from_profile(spec.build(), n)


# --- fluxes -------------------------------------------------------------------

def test_flux_identical_states():
    s = FlowState(1.3, 0.8, 0)
    FA, FQ = interface_flux(s, s, UNIT, UNIT, C)
    assert FA == pytest.approx(0.8, rel=1e-15)
    assert FQ == pytest.approx(0.8**2 / 1.3 + pressure(1.3, 0, UNIT, C), rel=1e-12)


def test_flux_mirror_states():
    FA, _ = interface_flux(FlowState(1.3, 0.8, 0), FlowState(1.3, -0.8, 0), UNIT, UNIT, C)
    assert FA == 0.0


def test_flux_rejects_bad_states():
    with pytest.raises(SolverError):
        interface_flux(FlowState(math.nan, 0, 0), FlowState(1, 0, 0), UNIT, UNIT, C)
    with pytest.raises(ClosureError):
        interface_flux(FlowState(4.0, 0, 0), FlowState(1, 0, 0), UNIT, UNIT, C)


@given(A=st.floats(0.05, 3.1), u=st.floats(-3, 3))
def test_transition_interface_speed(A, u):
    # the dissipation coefficient is at least c whenever one side is pressurized
    left, right = FlowState(PI, 0.0, 1), FlowState(A, u * A, 0)
    FA, _ = interface_flux(left, right, UNIT, UNIT, C)
    s = (0.5 * (left.Q + right.Q) - FA) / (0.5 * (right.A - left.A)) if right.A != left.A else C.c
    assert s >= C.c * (1 - 1e-9)


# --- time step ------------------------------------------------------------------

def test_cfl_dt_examples():
    m = mesh(10)
    A = np.full(10, PI / 2)
    E = np.zeros(10, dtype=np.int8)
    assert cfl_dt(A, np.zeros(10), E, m, C, 0.5) == pytest.approx(0.5 / 2.77575, rel=1e-5)
    A[3], E[3] = PI, 1
    assert cfl_dt(A, np.zeros(10), E, m, C, 0.9) == pytest.approx(0.9 / 1414.21356, rel=1e-8)
    m2 = Mesh.from_profile(ProfileSpec(length=20.0, radius=1.0).build(), 10)
    assert cfl_dt(A, np.zeros(10), E, m2, C, 0.9) == pytest.approx(2 * cfl_dt(A, np.zeros(10), E, m, C, 0.9))


def test_cfl_dt_errors():
    m = mesh(3)
    with pytest.raises(SolverError):
        cfl_dt(np.array([]), np.array([]), np.array([]), m, C, 0.5)
    with pytest.raises(SolverError):
        cfl_dt(np.full(3, 1e-10 * PI), np.zeros(3), np.zeros(3, dtype=np.int8), m, C, 0.5)


# --- indicator ------------------------------------------------------------------

def test_update_indicator_rules():
    S = np.full(5, PI)
    assert np.all(update_indicator(np.full(5, 3.2), np.zeros(5), S) == 1)
    # depression inside a pressurized pocket persists
    E = np.ones(5, dtype=np.int8)
    A = np.array([3.2, 3.2, 3.0, 3.2, 3.2])
    assert update_indicator(A, E, S)[2] == 1
    # a free-surface neighbour lets a non-full cell flip
    E = np.array([0, 1, 1, 1, 1], dtype=np.int8)
    A = np.array([2.0, 3.0, 3.0, 3.2, 3.2])
    out = update_indicator(A, E, S)
    assert list(out) == [0, 0, 1, 1, 1]
    # boundary-adjacent cell with a free-surface ghost
    E = np.ones(5, dtype=np.int8)
    A = np.array([3.0, 3.2, 3.2, 3.2, 3.2])
    assert update_indicator(A, E, S, ghost_E=(0, 1))[0] == 0
    assert update_indicator(A, E, S, ghost_E=(1, 1))[0] == 1


@given(st.lists(st.tuples(st.floats(0.5, 1.5), st.integers(0, 1)), min_size=3, max_size=40))
def test_update_indicator_consistency(cells):
    A = np.array([a for a, _ in cells]) * PI
    E = np.array([e for _, e in cells], dtype=np.int8)
    out = update_indicator(A, E, np.full(len(A), PI))
    assert not np.any((out == 0) & (A > PI))
    # pressurized region recedes by at most one cell: a flipped cell had a free neighbour
    flipped = np.flatnonzero((E == 1) & (out == 0))
    for i in flipped:
        neighbours = [E[j] for j in (i - 1, i + 1) if 0 <= j < len(E)]
        assert 0 in neighbours


# --- boundary conditions --------------------------------------------------------

def test_apply_bc_examples():
    adj = FlowState(1.0, 0.3, 0)
    assert apply_bc(BoundaryCondition("wall"), adj, UNIT, 0.0) == FlowState(1.0, -0.3, 0)
    assert apply_bc(BoundaryCondition("discharge", discharge=2.0), adj, UNIT, 0.0) == FlowState(1.0, 2.0, 0)
    valve = BoundaryCondition("valve", discharge=2.0, close_time=1.0)
    assert apply_bc(valve, adj, UNIT, 0.5) == FlowState(1.0, 2.0, 0)
    assert apply_bc(valve, adj, UNIT, 1.0) == FlowState(1.0, -0.3, 0)
    g = apply_bc(BoundaryCondition("reservoir", ratio=1.005), adj, UNIT, 0.0)
    assert (g.A, g.Q, g.E) == (pytest.approx(1.005 * PI), 0.3, 1)
    g = apply_bc(BoundaryCondition("reservoir", level=0.0), adj, UNIT, 0.0)
    assert (g.A, g.E) == (pytest.approx(PI / 2), 0)
    g = apply_bc(BoundaryCondition("reservoir", level=1.0), adj, UNIT, 0.0)
    assert (g.A, g.E) == (pytest.approx(PI), 1)


def test_bc_validation():
    with pytest.raises(ValueError):
        BoundaryCondition("sluice")
    with pytest.raises(ValueError):
        BoundaryCondition("reservoir")
    with pytest.raises(ValueError):
        BoundaryCondition("valve", close_time=-1.0)
    with pytest.raises(ValueError):
        apply_bc(BoundaryCondition("reservoir", level=1.5), FlowState(1, 0, 0), UNIT, 0.0)


# --- configuration and initial data ----------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(cfl=1.5)
    with pytest.raises(ValueError):
        SimConfig(cfl=0.0)
    with pytest.raises(ValueError):
        SimConfig(t_end=-1.0)
    with pytest.raises(ValueError):
        SimConfig(cells=2)
    with pytest.raises(ValueError):
        SimConfig(bc_left=BoundaryCondition("periodic"))
    with pytest.raises(ValueError):
        Region()
    with pytest.raises(ValueError):
        Region(level=0.0, ratio=1.0)


def test_mesh_invariants():
    m = mesh(12, slope=0.05, radius_out=0.8)
    assert m.n == 12
    assert m.dX == pytest.approx(m.profile.length / 12)
    np.testing.assert_allclose(m.S, PI * m.R**2, rtol=1e-15)
    with pytest.raises(ValueError):
        m.S[0] = 1.0
    with pytest.raises(SolverError):
        Mesh.from_profile(m.profile, 2)


def test_initial_state_regions():
    m = mesh(10)
    A, Q, E = initial_state((Region(x_end=5.0, level=0.0, velocity=1.0), Region(ratio=1.01)), m, C)
    np.testing.assert_allclose(A[:5], PI / 2, rtol=1e-14)
    np.testing.assert_allclose(Q[:5], PI / 2, rtol=1e-14)
    np.testing.assert_allclose(A[5:], 1.01 * PI, rtol=1e-14)
    assert list(E) == [0] * 5 + [1] * 5


def test_initial_head_region_is_still_water():
    m = mesh(30, slope=-0.02, radius_out=0.7)
    A, Q, E = initial_state((Region(head=-0.1),), m, C)
    from mixedpipe.diagnostics import still_water_residual
    assert still_water_residual(A, Q, E, m, C) == (0.0, pytest.approx(0.0, abs=1e-12))


# --- stepping -------------------------------------------------------------------

def test_still_water_step_is_exact():
    m = mesh(20)
    A, Q, E = initial_state((Region(level=0.3),), m, C)
    A1, Q1, E1 = step(A, Q, E, m, C, 0.2)
    np.testing.assert_array_equal(A1, A)
    np.testing.assert_array_equal(Q1, Q)


def test_uniform_translation_conserves_mass():
    m = mesh(20)
    A = np.full(20, 1.1)
    Q = np.full(20, 0.7)
    E = np.zeros(20, dtype=np.int8)
    walls = (BoundaryCondition("wall"), BoundaryCondition("wall"))
    total = mass_total(A, m)
    A1, Q1, E1 = step(A, Q, E, m, C, 0.05, walls)
    assert abs(mass_total(A1, m) - total) <= 1e-15 * total


def test_finite_propagation():
    n = 60
    m = mesh(n)
    A, Q, E = initial_state((Region(x_end=30.0, level=0.5), Region(level=-0.5)), m, C)
    dt = cfl_dt(A, Q, E, m, C, 0.9)
    A1, Q1, _ = step(A, Q, E, m, C, dt)
    changed = np.flatnonzero((A1 != A) | (Q1 != Q))
    assert changed.min() >= 29 - 1 and changed.max() <= 30 + 1


def test_positivity_error_carries_cell():
    m = mesh(5)
    A = np.array([0.1, 0.1, 1.0, 0.1, 0.1])
    with pytest.raises(PositivityError) as exc:
        step(A, np.zeros(5), np.zeros(5, dtype=np.int8), m, C, 10.0)
    assert exc.value.cell == 2


def test_non_finite_state_aborts():
    m = mesh(5)
    A = np.full(5, 1.0)
    Q = np.zeros(5)
    Q[1] = math.inf
    with pytest.raises(SolverError) as exc:
        step(A, Q, np.zeros(5, dtype=np.int8), m, C, 0.01)
    assert exc.value.cell is not None


def test_dry_floor_forces_rest():
    m = mesh(5)
    floor = 1e-10 * PI
    A = np.array([1.0, 1.0, floor, 1.0, 1.0])
    Q = np.array([0.0, 0.0, 0.0, 0.0, 0.0])
    A1, Q1, _ = step(A, Q, np.zeros(5, dtype=np.int8), m, C, 0.01)
    assert np.all(A1 >= floor)


def test_run_end_time_zero():
    traj = run(SimConfig(profile=ProfileSpec(length=10.0), cells=10, t_end=0.0))
    assert len(traj.snapshots) == 1
    assert traj.snapshots[0].t == 0.0


def test_run_output_cadence_and_determinism():
    cfg = SimConfig(profile=ProfileSpec(length=20.0), cells=20, t_end=3.0, output_every=1.0,
                    init=(Region(x_end=10.0, level=0.4), Region(level=-0.4)))
    a, b = run(cfg), run(cfg)
    np.testing.assert_allclose(a.times, [0, 1, 2, 3], rtol=0, atol=1e-12)
    for s, t in zip(a.snapshots, b.snapshots):
        assert s.A.tobytes() == t.A.tobytes() and s.Q.tobytes() == t.Q.tobytes()
    assert not a.snapshots[-1].A.flags.writeable
    assert len(a.diagnostics) == len(a.snapshots)


def test_run_max_steps():
    cfg = SimConfig(profile=ProfileSpec(length=20.0), cells=20, t_end=1e6, max_steps=7)
    traj = run(cfg)
    assert traj.snapshots[-1].step == 7


def test_periodic_uniform_flow_is_steady():
    cfg = SimConfig(profile=ProfileSpec(length=20.0), cells=20, t_end=5.0,
                    bc_left=BoundaryCondition("periodic"), bc_right=BoundaryCondition("periodic"),
                    init=(Region(level=0.1, velocity=1.5),))
    traj = run(cfg)
    s0, s1 = traj.snapshots[0], traj.snapshots[-1]
    np.testing.assert_allclose(s1.A, s0.A, rtol=1e-13)
    np.testing.assert_allclose(s1.Q, s0.Q, rtol=1e-13)


def test_simulation_error_reports_step():
    cfg = SimConfig(profile=ProfileSpec(length=5.0), cells=5, t_end=1.0)
    sim = Simulation(cfg)
    sim.A = np.array([0.1, 0.1, 1.0, 0.1, 0.1])
    with pytest.raises(PositivityError) as exc:
        sim.advance(dt=10.0)
    assert exc.value.step == 1 and exc.value.cell == 2
    assert "step 1" in str(exc.value) and "cell 2" in str(exc.value)


def test_backends_give_same_trajectory(monkeypatch):
    from mixedpipe import kernels
    if kernels.compiled_backend is None:
        pytest.skip("compiled backend not built")
    cfg = SimConfig(profile=ProfileSpec(length=50.0, slope=0.01, radius_out=0.8), cells=50, t_end=5.0,
                    output_every=5.0, fluid=FluidConstants(Ks=70),
                    init=(Region(x_end=25.0, level=0.5), Region(level=-0.3)))
    a = run(cfg).snapshots[-1]
    for name in ("section_state", "advance", "circle_alpha"):
        monkeypatch.setattr(kernels, name, getattr(kernels.python_backend, name))
    b = run(cfg).snapshots[-1]
    np.testing.assert_allclose(a.A, b.A, rtol=1e-10)
    np.testing.assert_allclose(a.Q, b.Q, rtol=1e-8, atol=1e-10)
