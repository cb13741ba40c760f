import numpy as np
import pytest

from conftest import observed_order, points_near
from corpuscle_lab.dependencies.run import get_nonlinearity
from corpuscle_lab.errors import ConfigError
from corpuscle_lab.physics.corpuscle import (
    HOMOGENEOUS_CUBIC,
    RAY_INTEGRAL,
    AmplitudeModulated,
    PhaseRotated,
    TimeCache,
    WaveCorpuscle,
    ZeroField,
    densities,
    nls_residual,
    phase,
    residual_scale,
)
from corpuscle_lab.physics.fields import AnalyticPotentials
from corpuscle_lab.physics.formfactor import FormFactor, gaussian_profile, scaled_nonlinearity, sech_profile
from corpuscle_lab.physics.polynomial import PolyScalarField
from corpuscle_lab.presets import timed_P3, uniform_b_P3

A = 0.1


def worst_relative_residual(field, pot, nl, points, constants, ff):
    scale = residual_scale(ff, constants)
    worst = 0.0
    for t, x in points:
        s = field.sample(t, x)
        res = nls_residual(s, pot, nl, t, x, constants)
        worst = max(worst, float(abs(res) / (scale * abs(s.psi))))
    return worst


def test_center_value_and_shape(corpuscle):
    for t in (0.0, 0.4, 1.0):
        center = corpuscle.traj.position(t)
        assert abs(complex(corpuscle.sample(t, center).psi)) == pytest.approx(A ** -1.5 * float(gaussian_profile().value(0.0)))
        y = np.array([0.05, -0.02, 0.11])
        assert abs(complex(corpuscle.sample(t, center + y).psi)) == pytest.approx(float(corpuscle.ff.value(np.linalg.norm(y))))


def test_phase_at_center_is_the_phase_integral(corpuscle):
    for t in (0.0, 0.5, 1.0):
        assert float(phase(corpuscle, t, np.zeros(3))) == pytest.approx(corpuscle.traj.phase_integral(t), abs=1e-13)


def test_tail_is_negligible(corpuscle):
    x = corpuscle.traj.position(0.5) + np.array([12 * A, 0.0, 0.0])
    assert abs(complex(corpuscle.sample(0.5, x).psi)) <= 1e-25


def test_gaussian_corpuscle_solves_nls_in_auxiliary_potentials(corpuscle, corpuscle_nl, corpuscle_points, constants):
    worst = worst_relative_residual(corpuscle, corpuscle.aux, corpuscle_nl, corpuscle_points, constants, corpuscle.ff)
    assert worst <= 1e-9


def test_sech_corpuscle_solves_nls(preset_traj, uniform_b, sech_nl, corpuscle_points, constants):
    wc = WaveCorpuscle(FormFactor(sech_profile(), A), preset_traj, uniform_b, uniform_b_P3(), constants)
    nl = scaled_nonlinearity(sech_nl, A)
    assert worst_relative_residual(wc, wc.aux, nl, corpuscle_points, constants, wc.ff) <= 1e-9


def test_eigenvalue_shift_is_carried_by_the_phase(preset_traj, uniform_b, corpuscle_points, constants):
    wc = WaveCorpuscle(FormFactor(gaussian_profile(), A, lam=0.7), preset_traj, uniform_b, uniform_b_P3(), constants)
    nl = get_nonlinearity(wc.ff)
    assert worst_relative_residual(wc, wc.aux, nl, corpuscle_points, constants, wc.ff) <= 1e-9


def test_quartic_P3_uses_ray_integral_phase(preset_traj, uniform_b, corpuscle_nl, corpuscle_points, constants):
    P3 = PolyScalarField({(3, 0, 0): (1,), (0, 0, 4): (0.5,), (2, 2, 0): (-0.3,)})
    wc = WaveCorpuscle(FormFactor(gaussian_profile(), A), preset_traj, uniform_b, P3, constants)
    assert wc.phase_branch == RAY_INTEGRAL
    assert worst_relative_residual(wc, wc.aux, corpuscle_nl, corpuscle_points, constants, wc.ff) <= 1e-9


def test_cubic_P3_uses_closed_phase(corpuscle):
    assert corpuscle.phase_branch == HOMOGENEOUS_CUBIC


def test_corrupted_field_is_not_a_solution(corpuscle, corpuscle_nl, corpuscle_points, constants):
    corrupted = AmplitudeModulated(corpuscle, 0.1)
    worst = worst_relative_residual(corrupted, corpuscle.aux, corpuscle_nl, corpuscle_points, constants, corpuscle.ff)
    assert worst >= 1e-3


def test_zero_field_has_zero_residual(uniform_b, corpuscle_nl, constants):
    x = np.array([[0.1, 0.2, 0.3], [0.0, 0.0, 0.0]])
    res = nls_residual(ZeroField(constants), uniform_b, corpuscle_nl, 0.5, x, constants)
    np.testing.assert_array_equal(res, np.zeros(2))


def test_momentum_density_is_current_times_m_over_q(corpuscle, corpuscle_points, constants):
    for t, x in corpuscle_points:
        _, J, P = densities(corpuscle, corpuscle.aux, t, x, constants)
        np.testing.assert_allclose(P, (constants.m / constants.q) * J, rtol=1e-15, atol=1e-13)


@pytest.mark.parametrize("gamma", [0.37, np.pi])
def test_densities_are_gauge_invariant(corpuscle, corpuscle_points, constants, gamma):
    rotated = PhaseRotated(corpuscle, gamma)
    for t, x in corpuscle_points[:10]:
        rho, J, P = densities(corpuscle, corpuscle.aux, t, x, constants)
        rho_r, J_r, P_r = densities(rotated, corpuscle.aux, t, x, constants)
        assert rho_r == pytest.approx(rho, rel=1e-12)
        np.testing.assert_allclose(J_r, J, rtol=1e-12, atol=1e-12 * float(rho))
        np.testing.assert_allclose(P_r, P, rtol=1e-12, atol=1e-12 * float(rho))


def test_auxiliary_potentials_have_second_order_zero(corpuscle, uniform_b):
    t = 0.5
    r = corpuscle.traj.position(t)
    direction = np.array([0.3, 0.5, 0.2]) / np.linalg.norm([0.3, 0.5, 0.2])
    radii = np.array([0.04, 0.02, 0.01])
    x = r + radii[:, None] * direction
    phi_gap = np.abs(corpuscle.aux.scalar(t, x) - uniform_b.scalar(t, x))
    A_gap = np.linalg.norm(corpuscle.aux.vector(t, x) - uniform_b.vector(t, x), axis=-1)
    assert observed_order(radii, phi_gap) >= 1.9
    assert observed_order(radii, A_gap) >= 1.9


def test_laplacian_matches_finite_differences(corpuscle):
    t = 0.3
    x = corpuscle.traj.position(t) + np.array([0.03, -0.05, 0.02])
    exact = complex(corpuscle.sample(t, x).laplacian_psi)
    steps = np.array([A / 10, A / 20, A / 40])
    errors = []
    for h in steps:
        shifts = h * np.eye(3)
        center = corpuscle.sample(t, x).psi
        fd = sum(
            corpuscle.sample(t, x + e).psi - 2 * center + corpuscle.sample(t, x - e).psi for e in shifts
        ) / (h * h)
        errors.append(abs(complex(fd) - exact))
    assert observed_order(steps, errors) >= 1.8


def test_light_speed_mismatch_is_rejected(preset_traj, constants):
    with pytest.raises(ConfigError):
        WaveCorpuscle(FormFactor(gaussian_profile(), A), preset_traj, AnalyticPotentials.zero(c=3.0), None, constants)


@pytest.mark.parametrize(
    "potentials, with_timed_P3",
    [("uniform_b", False), ("quadratic", False), ("quadratic", True)],
    ids=["uniform_b", "quadratic", "quadratic-timed_P3"],
)
def test_corpuscle_solves_nls_for_general_potentials(request, corpuscle_nl, rng, constants, potentials, with_timed_P3):
    pot = request.getfixturevalue(potentials)
    traj = request.getfixturevalue("preset_traj" if potentials == "uniform_b" else "quadratic_traj")
    wc = WaveCorpuscle(FormFactor(gaussian_profile(), A), traj, pot, timed_P3() if with_timed_P3 else None, constants)
    assert wc.phase_branch == HOMOGENEOUS_CUBIC
    points = points_near(traj, rng, 3.0 * A)
    assert worst_relative_residual(wc, wc.aux, corpuscle_nl, points, constants, wc.ff) <= 1e-9


@pytest.mark.parametrize("potentials", ["uniform_b", "quadratic"])
def test_true_potential_residual_is_second_order_in_the_offset(request, corpuscle_nl, constants, potentials):
    pot = request.getfixturevalue(potentials)
    traj = request.getfixturevalue("preset_traj" if potentials == "uniform_b" else "quadratic_traj")
    wc = WaveCorpuscle(FormFactor(gaussian_profile(), A), traj, pot, None, constants)
    t = 0.5
    direction = np.array([0.3, 0.5, 0.2]) / np.linalg.norm([0.3, 0.5, 0.2])
    radii = np.array([0.02, 0.04, 0.08])
    ratios = []
    for radius in radii:
        x = traj.position(t) + radius * direction
        s = wc.sample(t, x)
        ratios.append(float(abs(nls_residual(s, pot, corpuscle_nl, t, x, constants)) / abs(s.psi)))
    assert min(ratios) > 0.0
    assert observed_order(radii, ratios) >= 1.9


def test_eigenvalue_shifts_the_phase_linearly_in_time(preset_traj, uniform_b, constants):
    lam = 0.7
    plain = WaveCorpuscle(FormFactor(gaussian_profile(), A), preset_traj, uniform_b, uniform_b_P3(), constants)
    shifted = WaveCorpuscle(FormFactor(gaussian_profile(), A, lam=lam), preset_traj, uniform_b, uniform_b_P3(), constants)
    y = np.array([0.02, -0.01, 0.03])
    for t in (0.0, 0.4, 1.0):
        gap = float(phase(shifted, t, y)) - float(phase(plain, t, y))
        assert gap == pytest.approx(-constants.chi * lam * t / (2.0 * constants.m), abs=1e-13)


def test_time_cache_is_bounded():
    built = []

    def build(t):
        built.append(t)
        return object()

    cache = TimeCache(build, maxsize=4)
    for t in np.linspace(0.0, 1.0, 10):
        cache(t)
    assert len(cache) <= 4
    assert len(built) == 10
    last = cache(1.0)
    assert cache(1.0) is last
    assert len(built) == 10
