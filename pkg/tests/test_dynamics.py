import math

import numpy as np
import pytest

from conftest import observed_order
from corpuscle_lab.errors import ConfigError, DomainError, NumericalError
from corpuscle_lab.physics.dynamics import (
    integrate_newton,
    lorentz_force,
    lorentz_force_from_potentials,
    step_count,
)
from corpuscle_lab.physics.fields import AnalyticPotentials
from corpuscle_lab.physics.polynomial import PolyScalarField, PolyVectorField

R0 = np.array([0.1, -0.2, 0.3])
V0 = np.array([0.3, 0.2, 0.1])


@pytest.fixture(scope="module")
def cyclotron_potentials():
    return AnalyticPotentials.from_uniform_fields(B=(0.0, 0.0, 1.0))


def cyclotron_position(t):
    # v0 = (0.5, 0, 0) in B = z with m = q = c = 1
    return 0.5 * np.array([math.sin(t), math.cos(t) - 1.0, 0.0])


def test_free_motion_is_a_straight_line(constants):
    traj = integrate_newton(AnalyticPotentials.zero(), R0, V0, 0.0, 1.0, 1e-2, constants)
    np.testing.assert_allclose(traj.r, R0 + np.outer(traj.times, V0), atol=1e-13)
    np.testing.assert_allclose(traj.position(0.123), R0 + 0.123 * V0, atol=1e-13)
    np.testing.assert_allclose(traj.s_p, 0.5 * (V0 @ V0) * traj.times, atol=1e-13)


def test_grid_ends_exactly_at_t1(constants):
    traj = integrate_newton(AnalyticPotentials.zero(), R0, V0, 0.0, 1.0, 0.3, constants)
    assert len(traj.times) == 5
    assert traj.times[-1] == 1.0
    assert traj.step == pytest.approx(0.25)


def test_cyclotron_orbit_closes(cyclotron_potentials, constants):
    period = 2 * math.pi
    traj = integrate_newton(cyclotron_potentials, (0, 0, 0), (0.5, 0, 0), 0.0, period, 1e-3, constants)
    assert np.linalg.norm(traj.r[-1] - traj.r[0]) <= 1e-8
    assert traj.phase_rate_gap() <= 1e-12


@pytest.mark.slow
def test_cyclotron_speed_does_not_drift(cyclotron_potentials, constants):
    traj = integrate_newton(cyclotron_potentials, (0, 0, 0), (0.5, 0, 0), 0.0, 20 * math.pi, 1e-3, constants)
    speeds = np.linalg.norm(traj.v, axis=1)
    assert np.max(np.abs(speeds - 0.5)) <= 1e-9


def test_crossed_fields_drift(constants):
    pot = AnalyticPotentials.from_uniform_fields(E=(0.1, 0.0, 0.0), B=(0.0, 0.0, 1.0))
    period = 2 * math.pi
    traj = integrate_newton(pot, (0, 0, 0), (0, 0, 0), 0.0, period, 1e-3, constants)
    np.testing.assert_allclose((traj.r[-1] - traj.r[0]) / period, [0.0, -0.1, 0.0], atol=1e-6)


def test_rk4_converges_at_fourth_order(cyclotron_potentials, constants):
    steps = np.array([0.1, 0.05, 0.025])
    errors = []
    for h in steps:
        traj = integrate_newton(cyclotron_potentials, (0, 0, 0), (0.5, 0, 0), 0.0, 2.0, h, constants)
        errors.append(np.linalg.norm(traj.r[-1] - cyclotron_position(2.0)))
    assert observed_order(steps, errors) >= 3.7


def test_lorentz_force_forms_agree(constants):
    A = PolyVectorField((
        PolyScalarField({(0, 1, 0): (-0.5, 0.2)}),
        PolyScalarField({(1, 0, 0): (0.5,), (0, 0, 2): (1.0,)}),
        PolyScalarField({(1, 1, 0): (0.3,)}),
    ))
    phi = PolyScalarField({(1, 0, 0): (-0.1,), (0, 2, 1): (0.4, 0.0, 1.0)})
    pot = AnalyticPotentials(phi, A)
    for t, r in ((0.0, R0), (0.7, -R0)):
        np.testing.assert_allclose(
            lorentz_force(pot, t, r, V0, constants),
            lorentz_force_from_potentials(pot, t, r, V0, constants),
            atol=1e-14,
        )


def test_time_outside_trajectory_is_rejected(preset_traj):
    preset_traj.position(1.0)
    with pytest.raises(DomainError):
        preset_traj.position(1.5)
    with pytest.raises(NumericalError):
        preset_traj.velocity(-0.1)


def test_bounds_are_enforced(preset_traj):
    preset_traj.check_bounds(1e6, 1e8)
    with pytest.raises(NumericalError):
        preset_traj.check_bounds(0.01, 1e8)


@pytest.mark.parametrize(("t0", "t1", "step", "multiple", "expected"), [
    (0.0, 1.0, 0.3, 1, 4),
    (0.0, 1.0, 0.1, 1, 10),
    (0.0, 1.0, 0.3, 10, 10),
    (0.0, 1.0, 1e-3, 10, 1000),
])
def test_step_count(t0, t1, step, multiple, expected):
    assert step_count(t0, t1, step, multiple) == expected


@pytest.mark.parametrize(("t0", "t1", "step"), [(0.0, 1.0, 0.0), (0.0, 1.0, -1e-3), (1.0, 1.0, 1e-3)])
def test_step_count_rejects_bad_grids(t0, t1, step):
    with pytest.raises(ConfigError):
        step_count(t0, t1, step)


def test_node_indices(preset_traj):
    np.testing.assert_array_equal(preset_traj.node_indices(11), np.arange(0, 1001, 100))
    with pytest.raises(ConfigError):
        preset_traj.node_indices(7)
