import logging
import math
from typing import Any, Callable

import numpy as np
from rich.console import Console
from rich.table import Table

from corpuscle_lab.dependencies.io import write_json
from corpuscle_lab.dependencies.run import OutOption, get_nonlinearity, get_run, reporting_errors, sample_offsets
from corpuscle_lab.errors import AcceptanceError, ConfigError, CorpuscleError
from corpuscle_lab.models.constants import PhysicalConstants
from corpuscle_lab.models.report import CheckFailure, SelftestResult
from corpuscle_lab.models.study import StudyConfig
from corpuscle_lab.physics.concentration import (
    ConcentrationSchedule,
    Neighborhood,
    adjacent_charge_and_center,
    concentration_study,
    fit_slope,
)
from corpuscle_lab.physics.conservation import continuity_residual, enmt_at_point, momentum_residual, structural_identity
from corpuscle_lab.physics.corpuscle import PhaseRotated, WaveCorpuscle, densities, nls_residual, residual_scale
from corpuscle_lab.physics.dynamics import integrate_newton, lorentz_force
from corpuscle_lab.physics.fields import (
    AnalyticPotentials,
    balance_residual,
    build_auxiliary_potentials,
    split_field_at_point,
    split_polynomial_field,
)
from corpuscle_lab.physics.formfactor import (
    FormFactor,
    algebraic_profile,
    charge_norm,
    decay_check,
    gaussian_profile,
    reconstruct_nonlinearity,
    sech_profile,
    surface_charge,
    surface_gradient,
)
from corpuscle_lab.physics.polynomial import PolyScalarField, PolyVectorField
from corpuscle_lab.physics.quadrature import BallQuadrature, SphereQuadrature
from corpuscle_lab.presets import quadratic_potentials, uniform_b_P3, uniform_b_potentials, uniform_b_study

logger = logging.getLogger(__name__)

console = Console()

SEED = 20240101
CORPUSCLE_SIZE = 0.1


def expect(condition: bool, message: str, **detail: Any) -> None:
    if not condition:
        raise AcceptanceError({"message": message, **detail})


def _preset_corpuscle(a: float = CORPUSCLE_SIZE, with_P3: bool = True) -> WaveCorpuscle:
    study = uniform_b_study()
    state = study.initial_state
    pot = uniform_b_potentials()
    traj = integrate_newton(pot, state.r0, state.v0, state.t0, state.t1, state.step, study.constants)
    P3 = uniform_b_P3() if with_P3 else None
    return WaveCorpuscle(FormFactor(gaussian_profile(), a), traj, pot, P3, study.constants)


def _preset_points(wc: WaveCorpuscle, count: int, radius: float, margin: float = 0.0):
    rng = np.random.default_rng(SEED)
    times = rng.uniform(wc.traj.t0 + margin, wc.traj.t1 - margin, count)
    offsets = sample_offsets(rng, count, radius)
    return [(float(t), wc.traj.position(float(t)) + y) for t, y in zip(times, offsets)]


def check_gaussian_reconstruction() -> None:
    profile = gaussian_profile()
    nl = reconstruct_nonlinearity(profile)
    s = np.geomspace(profile.value(4.0) ** 2, profile.value(0.0) ** 2, 200)
    closed = profile.gprime_closed(s)
    error = float(np.max(np.abs(nl.gprime(s) - closed) / np.maximum(1.0, np.abs(closed))))
    expect(error <= 1e-8, "Reconstructed G' departs from the closed form", error=error)


def check_charge_norm() -> None:
    for profile, a in ((gaussian_profile(), 0.1), (sech_profile(), 1.0)):
        value = charge_norm(FormFactor(profile, a))
        expect(abs(value - 1.0) <= 1e-8, "Profile is not normalized to unit charge", profile=profile.name, norm=value)


def check_decay() -> None:
    theta = np.linspace(0.0, 40.0, 401)
    expect(decay_check(gaussian_profile(), theta).passed, "Gaussian failed the decay check")
    expect(not decay_check(algebraic_profile(0.25), theta).passed, "Slowly decaying profile passed the decay check")


def _basis_field() -> PolyVectorField:
    return PolyVectorField((
        PolyScalarField({(0, 0, 0): (1,), (0, 2, 0): (1,), (1, 1, 1): (2,)}),
        PolyScalarField({(1, 0, 0): (3,), (0, 0, 2): (-1,), (3, 0, 0): (1,)}),
        PolyScalarField({(0, 1, 0): (1,), (1, 0, 1): (5,), (0, 1, 2): (-2,)}),
    ))


def check_surface_quadrature() -> None:
    traj = integrate_newton(AnalyticPotentials.zero(), (0.0, 0.0, 0.0), (0.3, 0.2, 0.1), 0.0, 1.0, 1e-2, PhysicalConstants())
    for a, R in ((0.1, 0.5), (0.05, 0.4), (0.02, 0.3)):
        ff = FormFactor(gaussian_profile(), a)
        points, _, weights = Neighborhood.build(traj, a, R).surface(0.5)
        radius = np.linalg.norm(points - traj.position(0.5), axis=-1)
        charge = float(np.sum(weights * ff.value(radius) ** 2))
        gradient = float(np.sum(weights * ff.d1(radius) ** 2))
        expected = surface_charge(ff, R), surface_gradient(ff, R)
        expect(abs(charge - expected[0]) <= 1e-10 * expected[0], "Surface charge quadrature disagrees", a=a, R=R)
        expect(abs(gradient - expected[1]) <= 1e-10 * expected[1], "Surface gradient quadrature disagrees", a=a, R=R)


def check_split_exact() -> None:
    V = _basis_field()
    potential, tangent = split_polynomial_field(V)
    expect(potential.gradient() + tangent == V, "grad(Pi) + tangent does not reconstruct V")
    again, _ = split_polynomial_field(tangent)
    expect(again.is_zero, "Splitting the tangent part left a gradient part")
    ys = sample_offsets(np.random.default_rng(SEED), 50, 2.0)
    radial = float(np.max(np.abs(np.sum(ys * tangent(0.0, ys), axis=-1))))
    expect(radial <= 1e-12, "Tangent part has a radial component", max_y_dot_tangent=radial)


def check_split_numeric() -> None:
    V = _basis_field()
    potential, tangent = split_polynomial_field(V)
    for y in sample_offsets(np.random.default_rng(SEED), 20, 1.0):
        pi_ray, tan_ray = split_field_at_point(lambda z: V(0.0, z), y)
        expect(abs(pi_ray - float(potential(0.0, y))) <= 1e-9, "Ray splitter disagrees on Pi", y=y.tolist())
        expect(np.allclose(tan_ray, tangent(0.0, y), rtol=0.0, atol=1e-9), "Ray splitter disagrees on the tangent part")


def check_balance_conditions() -> None:
    constants = PhysicalConstants()
    pot = quadratic_potentials()
    t, r, v = 0.3, np.array([0.1, 0.2, 0.0]), np.array([0.3, 0.2, 0.1])
    r_ddot = lorentz_force(pot, t, r, v, constants) / constants.m
    aux = build_auxiliary_potentials(pot, r, v, t, None, constants, acceleration=r_ddot)
    force, div = balance_residual(aux, r, v, r_ddot, t, sample_offsets(np.random.default_rng(SEED), 20, 0.5), constants)
    worst = float(np.max(np.abs(force)))
    expect(worst <= 1e-12, "Auxiliary potentials fail the balance conditions", force=worst)
    expect(float(np.max(np.abs(div))) <= 1e-12, "Auxiliary A_hat is not divergence free")

    radii = np.array([0.1, 0.2, 0.4])
    uncorrected, _ = balance_residual(pot, r, v, r_ddot, t, radii[:, None] * np.array([1.0, 0.0, 0.0]), constants)
    fit = fit_slope(radii, np.linalg.norm(uncorrected, axis=-1))
    expect(fit.slope is not None and fit.slope >= 0.9, "True potentials balance away from the center", slope=fit.slope)


def check_free_motion() -> None:
    constants = PhysicalConstants()
    r0, v0 = np.array([0.1, -0.2, 0.3]), np.array([0.3, 0.2, 0.1])
    traj = integrate_newton(AnalyticPotentials.zero(), r0, v0, 0.0, 1.0, 1e-2, constants)
    error = float(np.max(np.abs(traj.r - (r0 + np.outer(traj.times, v0)))))
    expect(error <= 1e-13, "Free motion is not a straight line", error=error)


def check_cyclotron() -> None:
    constants = PhysicalConstants()
    pot = AnalyticPotentials.from_uniform_fields(B=(0.0, 0.0, 1.0))
    period = 2.0 * math.pi
    traj = integrate_newton(pot, (0.0, 0.0, 0.0), (0.5, 0.0, 0.0), 0.0, period, 1e-3, constants)
    error = float(np.linalg.norm(traj.r[-1]))
    expect(error <= 1e-8, "Cyclotron orbit does not close after one period", error=error)
    expect(traj.phase_rate_gap() <= 1e-12, "Phase rate forms disagree", gap=traj.phase_rate_gap())


def check_self_residual() -> None:
    wc = _preset_corpuscle()
    nl = get_nonlinearity(wc.ff)
    scale = residual_scale(wc.ff, wc.constants)
    worst = 0.0
    for t, x in _preset_points(wc, 50, 3.0 * wc.ff.a):
        s = wc.sample(t, x)
        res = nls_residual(s, wc.aux, nl, t, x, wc.constants)
        worst = max(worst, float(abs(res) / (scale * abs(s.psi))))
    expect(worst <= 1e-9, "Corpuscle does not solve NLS in its auxiliary potentials", residual_over_scale=worst)


def check_true_potential_order() -> None:
    wc = _preset_corpuscle(with_P3=False)
    nl = get_nonlinearity(wc.ff)
    t = 0.5
    radii = np.array([0.02, 0.04, 0.08])
    x = wc.traj.position(t) + radii[:, None] * np.array([0.3, 0.5, 0.2]) / math.sqrt(0.38)
    s = wc.sample(t, x)
    ratio = np.abs(nls_residual(s, wc.pot, nl, t, x, wc.constants)) / np.abs(s.psi)
    fit = fit_slope(radii, ratio)
    expect(fit.slope is not None and fit.slope >= 1.9, "Residual in the true potentials is not second order", slope=fit.slope)


def check_gauge_invariance() -> None:
    wc = _preset_corpuscle()
    nl = get_nonlinearity(wc.ff)
    for gamma in (0.37, math.pi):
        rotated = PhaseRotated(wc, gamma)
        for t, x in _preset_points(wc, 10, 3.0 * wc.ff.a):
            base = enmt_at_point(wc.sample(t, x), wc.aux, nl, t, x, wc.constants).entries
            turned = enmt_at_point(rotated.sample(t, x), wc.aux, nl, t, x, wc.constants).entries
            gap = float(np.max(np.abs(turned - base)))
            expect(gap <= 1e-12 * float(np.max(np.abs(base))), "Energy-momentum tensor depends on the phase", gamma=gamma)
            rho, J, _ = densities(wc, wc.aux, t, x, wc.constants)
            rho_r, J_r, _ = densities(rotated, wc.aux, t, x, wc.constants)
            gap = float(abs(rho_r - rho) + np.max(np.abs(J_r - J)))
            expect(gap <= 1e-12 * float(rho), "Densities depend on the phase", gamma=gamma)


def check_current_momentum() -> None:
    wc = _preset_corpuscle()
    c = wc.constants
    for t, x in _preset_points(wc, 20, 3.0 * wc.ff.a):
        _, J, P = densities(wc, wc.aux, t, x, c)
        gap = float(np.linalg.norm(P - (c.m / c.q) * J))
        expect(gap <= 1e-13 * max(1.0, float(np.linalg.norm(P))), "P differs from (m/q) J", gap=gap)


def check_structural_identity() -> None:
    wc = _preset_corpuscle()
    nl = get_nonlinearity(wc.ff)
    for t, x in _preset_points(wc, 20, 3.0 * wc.ff.a):
        total, size = structural_identity(wc.sample(t, x), wc.aux, nl, t, x, wc.constants)
        expect(abs(total) <= 1e-12 * max(float(size), 1e-300), "Structural identity violated", t=t)


def check_balance_laws() -> None:
    wc = _preset_corpuscle()
    nl = get_nonlinearity(wc.ff)
    a, c = wc.ff.a, wc.constants
    h = a / 20.0
    peak = float(wc.ff.value(0.0) ** 2)
    speed = 1.0 + float(np.max(np.linalg.norm(wc.traj.v, axis=1)))
    for t, x in _preset_points(wc, 10, 2.0 * a, margin=2.0 * h):
        cont = float(abs(continuity_residual(wc, wc.aux, t, x, h, c)))
        mom = float(np.linalg.norm(momentum_residual(wc, wc.aux, nl, t, x, h, c)))
        expect(cont <= 1e-3 * c.q * peak * speed / a, "Continuity residual too large", t=t, residual=cont)
        expect(
            mom <= 1e-3 * (c.chi ** 2 / c.m) * peak * speed ** 2 / a ** 3,
            "Momentum residual too large", t=t, residual=mom,
        )


def check_quadrature() -> None:
    SphereQuadrature().validate()
    BallQuadrature(0.02, 0.5).validate()


def check_ball_charge() -> None:
    wc = _preset_corpuscle(a=0.02)
    nb = Neighborhood.build(wc.traj, 0.02, 0.5)
    for t in (0.0, 0.5, 1.0):
        rho_bar, center = adjacent_charge_and_center(wc, t, nb)
        expect(abs(rho_bar - 1.0) <= 1e-10, "Adjacent charge differs from q", t=t, rho_bar=rho_bar)
        offset = float(np.linalg.norm(center - wc.traj.position(t)))
        expect(offset <= 1e-10 * 0.02, "Adjacent center departs from r(t)", t=t, offset=offset)


def check_schedule() -> None:
    ConcentrationSchedule.power_law(0.02, 0.5, 5.0, 1.0, range(1, 7))
    try:
        ConcentrationSchedule.power_law(0.02, 0.5, 3.0, 1.0, range(1, 7))
    except ConfigError:
        return
    expect(False, "Schedule with a_n R_n^-4 growing was accepted")


def check_concentration_study() -> None:
    study = uniform_b_study()
    state = study.initial_state
    report = concentration_study(
        uniform_b_potentials(),
        gaussian_profile(),
        state.r0,
        state.v0,
        (state.t0, 0.2),
        ConcentrationSchedule.power_law(0.02, 0.5, 5.0, 1.0, (1, 2, 3)),
        uniform_b_P3(),
        study.constants,
        step=state.step,
        time_samples=3,
    )
    for record in report.records:
        expect(abs(record.rho_bar - 1.0) <= 1e-10, "Adjacent charge differs from q", n=record.n)
        expect(record.center_err <= 1e-10, "Adjacent center departs from r(t)", n=record.n)
    q0 = [record.Q0 for record in report.records]
    expect(q0[-1] <= q0[0], "Q0 does not decrease along the schedule", Q0=q0)


def check_config_roundtrip() -> None:
    study = uniform_b_study()
    again = StudyConfig.model_validate_json(study.model_dump_json())
    expect(again == study, "Study config does not survive a JSON round-trip")


# (name, check)
CHECKS: list[tuple[str, Callable[[], None]]] = [
    ("formfactor.gaussian_reconstruction", check_gaussian_reconstruction),
    ("formfactor.charge_norm", check_charge_norm),
    ("formfactor.decay", check_decay),
    ("formfactor.surface_quadrature", check_surface_quadrature),
    ("fields.split_exact", check_split_exact),
    ("fields.split_numeric", check_split_numeric),
    ("fields.balance", check_balance_conditions),
    ("dynamics.free_motion", check_free_motion),
    ("dynamics.cyclotron", check_cyclotron),
    ("corpuscle.self_residual", check_self_residual),
    ("corpuscle.true_potential_order", check_true_potential_order),
    ("corpuscle.gauge", check_gauge_invariance),
    ("corpuscle.current_momentum", check_current_momentum),
    ("conservation.structural_identity", check_structural_identity),
    ("conservation.balance_laws", check_balance_laws),
    ("concentration.quadrature", check_quadrature),
    ("concentration.ball_charge", check_ball_charge),
    ("concentration.schedule", check_schedule),
    ("concentration.study", check_concentration_study),
    ("cli.config_roundtrip", check_config_roundtrip),
]


def run_checks(checks: list[tuple[str, Callable[[], None]]] = CHECKS) -> SelftestResult:
    successful: list[str] = []
    failed: list[CheckFailure] = []
    for name, check in checks:
        try:
            check()
        except CorpuscleError as exc:
            failed.append(CheckFailure(name=name, error=type(exc).__name__, detail=exc.detail))
            logger.error("Check %s failed: %s", name, exc)
        else:
            successful.append(name)
            logger.info("Check %s passed", name)
    return SelftestResult.collect(successful, failed)


def selftest(out: OutOption = None):
    """Run the invariant checks of every module"""
    with reporting_errors():
        run = get_run(out=out)
        result = run_checks()
        write_json(run.path("selftest.json"), result.model_dump())

        table = Table(title="selftest")
        table.add_column("check")
        table.add_column("status")
        for name in result.successful:
            table.add_row(name, "[green]ok[/green]")
        for failure in result.failed:
            table.add_row(failure["name"], f"[red]{failure['error']}[/red]")
        console.print(table)

        if result.failed_count:
            raise AcceptanceError({
                "message": f"{result.failed_count} of {result.total_processed} checks failed",
                "failed": [failure["name"] for failure in result.failed],
            })
