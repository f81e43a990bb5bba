import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transonic.elliptic_fbp import SectorGrid, solve_fbp
from transonic.errors import RadialFloorError, StepFailureError
from transonic.perturbation import DeformationFamily, PerturbationData, UpstreamFamily
from transonic.transport import (build_char_field, eulerian_upwind, run_transport, to_elliptic_grid,
                                 trace_characteristic, trace_feet, transport_E,
                                 wall_distance_constant)

THETA = math.pi / 6
E0_PLUS = 0.007870008566248839


def standard_data(scale=1.0):
    return PerturbationData(DeformationFamily("radial", 5e-3 * scale, 1, 1.0, 2.0, THETA),
                            UpstreamFamily("cosine", 1e-2 * scale, 1, 1.0, 2.0, THETA))


@pytest.fixture(scope="module")
def zero_run(std, sol, grid):
    fbp = solve_fbp(std[0], sol, grid)
    return fbp, run_transport(std[0], sol, fbp)


@pytest.fixture(scope="module")
def perturbed_run(std, sol, grid):
    data = standard_data()
    fbp = solve_fbp(std[0], sol, grid, data)
    return fbp, run_transport(std[0], sol, fbp, data)


def test_zero_data_recovers_background(zero_run, sol, grid):
    fbp, tr = zero_run
    assert np.allclose(tr.e_shock, E0_PLUS, rtol=1e-12)
    assert np.max(np.abs(tr.e_nodes - E0_PLUS)) <= 1e-12 * E0_PLUS
    p0 = sol.p_plus(grid.radii(fbp.front.f))
    assert np.max(np.abs(tr.pressure.values - p0)) <= 1e-9
    assert np.max(np.abs(tr.field.w2)) <= 1e-12
    assert np.allclose(tr.feet, tr.field.theta[None, :], atol=1e-14)


def test_straight_characteristic(zero_run):
    field = zero_run[1].field
    ch = trace_characteristic(field, 1.8, 0.1)
    assert ch.foot == pytest.approx(0.1, abs=1e-14)
    assert np.allclose(ch.x[:, 0], 2 * 1.8 - ch.t)
    assert ch.x[0, 0] == pytest.approx(1.8) and ch.x[-1, 0] == pytest.approx(field.r_s)


def test_trace_outside_domain(zero_run):
    with pytest.raises(StepFailureError):
        trace_characteristic(zero_run[1].field, 2.5, 0.0)


def test_floor_violation(std, sol, zero_run):
    with pytest.raises(RadialFloorError):
        build_char_field(std[0], sol, zero_run[0], floor_fraction=100.0)


def test_perturbed_field_properties(perturbed_run):
    _, tr = perturbed_run
    f = tr.field
    assert f.radial_speed_min > f.omega0 > 0
    assert f.dupsilon_min > 0
    assert f.wall_slip < 1e-3
    assert np.all(f.w2[:, 0] == 0) and np.all(f.w2[:, -1] == 0)
    assert tr.feet_monotone
    assert np.all(np.diff(f.upsilon, axis=0) > 0)


def test_transport_constant_along_feet(perturbed_run):
    _, tr = perturbed_run
    feet = trace_feet(tr.field)
    assert np.array_equal(feet, tr.feet)
    e = transport_E(tr.field, lambda th: 1.0 + 0 * th, feet)
    assert np.all(e.values == 1.0)


def test_lagrangian_matches_eulerian(perturbed_run):
    _, tr = perturbed_run
    eu = eulerian_upwind(tr.field, tr.e_shock)
    gap = np.max(np.abs(eu - tr.e_mapped.values))
    assert gap <= 5e-3 * np.max(np.abs(tr.e_mapped.values))
    assert gap <= 5e-3 * np.ptp(tr.e_mapped.values)


def test_wall_distance(perturbed_run):
    assert wall_distance_constant(perturbed_run[1].field) <= 10.0


def test_pressure_close_to_background(perturbed_run, sol):
    fbp, tr = perturbed_run
    p0 = sol.p_plus(tr.pressure.radii)
    rel = np.max(np.abs(tr.pressure.values - p0) / p0)
    assert 0 < rel < 0.05
    assert np.all(tr.exit_pressure > 0)


def test_e_shock_linear_in_data(std, sol, grid):
    gaps = []
    for scale in (1.0, 0.5):
        data = standard_data(scale)
        fbp = solve_fbp(std[0], sol, grid, data)
        gaps.append(np.max(np.abs(run_transport(std[0], sol, fbp, data).e_shock - E0_PLUS)))
    assert gaps[0] / gaps[1] == pytest.approx(2.0, rel=0.05)


@settings(max_examples=10, deadline=None)
@given(k=st.integers(0, 3))
def test_grid_transfer_round_trip(zero_run, k):
    field = zero_run[1].field
    rt = field.rt[:, None]
    vals = np.broadcast_to(np.cos(k * rt), field.w2.shape)
    assert np.allclose(to_elliptic_grid(field, vals), np.cos(k * field.upsilon), atol=2e-3)
