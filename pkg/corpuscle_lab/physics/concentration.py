"""Concentration diagnostics over shrinking neighborhoods of the trajectory, and the scaling study."""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray

from corpuscle_lab.errors import ConfigError
from corpuscle_lab.models.constants import PhysicalConstants
from corpuscle_lab.physics.conservation import enmt_at_point, force_density
from corpuscle_lab.physics.corpuscle import (
    AuxiliaryPotentials,
    FieldProvider,
    WaveCorpuscle,
    densities,
)
from corpuscle_lab.physics.dynamics import Trajectory, integrate_newton
from corpuscle_lab.physics.fields import AnalyticPotentials, Potentials, limit_fields
from corpuscle_lab.physics.formfactor import (
    FormFactor,
    Nonlinearity,
    RadialProfile,
    charge_norm,
    reconstruct_nonlinearity,
    scaled_nonlinearity,
)
from corpuscle_lab.physics.polynomial import PolyScalarField
from corpuscle_lab.physics.quadrature import BallQuadrature, SphereQuadrature, TimeGrid

logger = logging.getLogger(__name__)

CENTER_FLOOR = 1e-30
REFINEMENT_TOL = 1e-6

Q_COLUMNS = ("Q0", "Q01", "Q20", "Q22", "Q23", "Q3")
PRIMED_COLUMNS = ("Pprime_int", "Q0prime", "Q2prime", "Q3prime")


@dataclass(frozen=True)
class Neighborhood:
    """The ball of radius R about r(t), with its surface and volume rules."""

    traj: Trajectory
    R: float
    sphere: SphereQuadrature
    ball: BallQuadrature

    @classmethod
    def build(
        cls, traj: Trajectory, a: float, R: float, sphere: SphereQuadrature | None = None, radial_nodes: int = 10
    ) -> "Neighborhood":
        sphere = sphere or SphereQuadrature()
        ball = BallQuadrature(a, R, sphere, radial_nodes)
        sphere.validate()
        ball.validate()
        return cls(traj, R, sphere, ball)

    def center(self, t: float) -> NDArray:
        return self.traj.position(t)

    def surface(self, t: float) -> tuple[NDArray, NDArray, NDArray]:
        """Surface points, outward normals and weights (including R^2)."""
        normals = self.sphere.normals
        return self.center(t) + self.R * normals, normals, self.R * self.R * self.sphere.weights

    def volume(self, t: float) -> tuple[NDArray, NDArray]:
        """Volume points and weights, plus the offsets from the center."""
        return self.center(t) + self.ball.offsets, self.ball.weights

    def refined(self) -> "Neighborhood":
        ball = self.ball.refined()
        return Neighborhood(self.traj, self.R, ball.sphere, ball)


@dataclass(frozen=True)
class ConcentrationSchedule:
    n_values: tuple[int, ...]
    a: tuple[float, ...]
    R: tuple[float, ...]

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if not (len(self.n_values) == a.size == R.size) or a.size < 2:
            raise ConfigError("Schedule needs at least two indices with matching a and R sequences")
        if np.any(a <= 0) or np.any(R <= 0):
            raise ConfigError("Schedule sizes a_n and R_n must be positive")
        if np.any(np.diff(a) >= 0) or np.any(np.diff(R) >= 0):
            raise ConfigError("Schedule sizes a_n and R_n must decrease")
        if np.any(np.diff(R / a) <= 0):
            raise ConfigError("Schedule ratio R_n/a_n must increase")
        if np.any(np.diff(a / R ** 4) >= 0):
            raise ConfigError("Schedule must have a_n R_n^-4 decreasing to 0")
        if np.any(R >= 1.0) or np.any(a >= R):
            raise ConfigError("Schedule must satisfy a_n < R_n < 1")

    @classmethod
    def power_law(
        cls, a0: float, R0: float, alpha: float, beta: float, n_values: Sequence[int]
    ) -> "ConcentrationSchedule":
        """a_n = a0 n^-alpha and R_n = R0 n^-beta."""
        if not (alpha > 0 and beta > 0):
            raise ConfigError("Schedule exponents must be positive")
        if not alpha > beta:
            raise ConfigError("Schedule needs alpha > beta so that R_n/a_n grows")
        if not alpha > 4 * beta:
            raise ConfigError("Schedule needs alpha > 4 beta so that a_n R_n^-4 tends to 0")
        n_values = tuple(int(n) for n in n_values)
        if any(n < 1 for n in n_values):
            raise ConfigError("Schedule indices start at 1")
        return cls(
            n_values,
            tuple(a0 * n ** -alpha for n in n_values),
            tuple(R0 * n ** -beta for n in n_values),
        )

    def theta(self, index: int) -> float:
        return self.R[index] / self.a[index]

    def __len__(self) -> int:
        return len(self.n_values)


def adjacent_charge_and_center(
    field: FieldProvider,
    t: float,
    nb: Neighborhood,
    constants: PhysicalConstants | None = None,
) -> tuple[float, NDArray | None]:
    """Charge in the ball and its centroid; the centroid is None when the charge is below 1e-30."""
    constants = constants or field.constants
    points, weights = nb.volume(t)
    density = constants.q * np.abs(field.sample(t, points).psi) ** 2
    rho_bar = float(density @ weights)
    if abs(rho_bar) < CENTER_FLOOR:
        logger.warning("Adjacent charge %.3g at t=%g is too small to define a center", rho_bar, t)
        return rho_bar, None
    shift = (nb.ball.offsets * (density * weights)[:, None]).sum(axis=0) / rho_bar
    return rho_bar, nb.center(t) + shift


@dataclass(frozen=True)
class TimeSlice:
    """Surface and volume integrals at one time."""

    t: float
    rho_bar: float
    center_err: float
    boundary_T: NDArray
    boundary_Pv: NDArray
    Q20: NDArray
    Q22: NDArray
    flux_gap: float
    Q30: NDArray
    Q31: NDArray
    momentum: NDArray
    force: NDArray
    limit_force: NDArray
    P_prime: NDArray
    P_prime_boundary: float
    boundary_P_prime_v: NDArray
    boundary_T_prime: NDArray
    f_prime: NDArray
    J_prime_moment: NDArray
    J_prime: NDArray
    J_prime_flux: float


def _momentum_gap(sample, pot, pot_aux, t, x, constants) -> NDArray:
    """P' = -(q/c)(A - A_aux)|psi|^2."""
    gap = pot.vector(t, x) - pot_aux.vector(t, x)
    return -(constants.q / constants.c) * gap * (np.abs(sample.psi) ** 2)[..., None]


def evaluate_slice(
    field: FieldProvider,
    pot: AnalyticPotentials,
    pot_aux: Potentials,
    nl: Nonlinearity,
    t: float,
    nb: Neighborhood,
    constants: PhysicalConstants,
) -> TimeSlice:
    started = time.perf_counter()
    q, m, c = constants.q, constants.m, constants.c
    r_hat = nb.center(t)
    v_hat = nb.traj.velocity(t)

    # Surface
    xs, normals, ws = nb.surface(t)
    sample = field.sample(t, xs)
    rho_s, J_s, P_s = densities(sample, pot, t, xs, constants)
    T_s = enmt_at_point(sample, pot, nl, t, xs, constants).entries[:, 1:, 1:]
    T_aux_s = enmt_at_point(sample, pot_aux, nl, t, xs, constants).entries[:, 1:, 1:]
    v_dot_n = normals @ v_hat
    n_dot_J = np.sum(normals * J_s, axis=-1)
    P_prime_s = _momentum_gap(sample, pot, pot_aux, t, xs, constants)
    J_prime_s = (q / m) * P_prime_s
    offsets_s = xs - r_hat

    # Volume
    xv, wv = nb.volume(t)
    sample_v = field.sample(t, xv)
    rho_v, J_v, P_v = densities(sample_v, pot, t, xv, constants)
    em = pot.fields(t, xv)
    limit = limit_fields(pot, r_hat, t)
    f_v = force_density(sample_v, pot, t, xv, constants).f
    f_aux_v = force_density(sample_v, pot_aux, t, xv, constants).f
    P_prime_v = _momentum_gap(sample_v, pot, pot_aux, t, xv, constants)

    rho_bar = float(rho_v @ wv)
    if abs(rho_bar) >= CENTER_FLOOR:
        shift = (nb.ball.offsets * (rho_v * wv)[:, None]).sum(axis=0) / rho_bar
        center_err = float(np.linalg.norm(shift))
    else:
        center_err = math.nan

    out = TimeSlice(
        t=float(t),
        rho_bar=rho_bar,
        center_err=center_err,
        boundary_T=np.einsum("ki,kij,k->j", normals, T_s, ws),
        boundary_Pv=(P_s * (v_dot_n * ws)[:, None]).sum(axis=0),
        Q20=-(offsets_s * (v_dot_n * rho_s * ws)[:, None]).sum(axis=0),
        Q22=(offsets_s * (n_dot_J * ws)[:, None]).sum(axis=0),
        flux_gap=float(((v_dot_n * rho_s - n_dot_J) * ws).sum()),
        Q30=((em.E - limit.E) * (rho_v * wv)[:, None]).sum(axis=0),
        Q31=(np.cross(J_v, em.B - limit.B) * wv[:, None]).sum(axis=0) / c,
        momentum=(P_v * wv[:, None]).sum(axis=0),
        force=(f_v * wv[:, None]).sum(axis=0),
        limit_force=(rho_bar / q) * (q * limit.E + (q / c) * np.cross(v_hat, limit.B)),
        P_prime=(P_prime_v * wv[:, None]).sum(axis=0),
        P_prime_boundary=float((np.linalg.norm(P_prime_s, axis=-1) * ws).sum()),
        boundary_P_prime_v=(P_prime_s * (v_dot_n * ws)[:, None]).sum(axis=0),
        boundary_T_prime=np.einsum("ki,kij,k->j", normals, T_s - T_aux_s, ws),
        f_prime=((f_v - f_aux_v) * wv[:, None]).sum(axis=0),
        J_prime_moment=(offsets_s * (np.sum(normals * J_prime_s, axis=-1) * ws)[:, None]).sum(axis=0),
        J_prime=(q / m) * (P_prime_v * wv[:, None]).sum(axis=0),
        J_prime_flux=float((np.sum(normals * J_prime_s, axis=-1) * ws).sum()),
    )
    logger.debug(
        "Slice t=%g: %d surface and %d volume nodes in %.3fs", t, len(ws), len(wv), time.perf_counter() - started
    )
    return out


def _sup(values: Any) -> float:
    values = np.asarray(values, dtype=float)
    if values.ndim > 1:
        values = np.linalg.norm(values, axis=-1)
    return float(np.max(np.abs(values))) if values.size else 0.0


@dataclass(frozen=True)
class QRecord:
    Q0: float
    Q01: float
    Q20: float
    Q22: float
    Q23: float
    Q3: float
    rho_drift: float
    center_err: float
    momentum_int: float
    force_defect: float


@dataclass(frozen=True)
class PrimedRecord:
    Pprime_int: float
    Pprime_boundary: float
    Q0prime: float
    Q2prime: float
    Q3prime: float


def assemble_q_record(slices: Sequence[TimeSlice], grid: TimeGrid) -> QRecord:
    stack = lambda name: np.array([getattr(s, name) for s in slices])  # noqa: E731
    rho = stack("rho_bar")
    return QRecord(
        Q0=_sup(grid.running(stack("boundary_T"))),
        Q01=_sup(grid.running(stack("boundary_Pv"))),
        Q20=_sup(stack("Q20")),
        Q22=_sup(stack("Q22")),
        Q23=_sup(grid.running(stack("flux_gap"))),
        Q3=_sup(grid.running(stack("Q30") + stack("Q31"))),
        rho_drift=_sup(rho - rho[0]),
        center_err=_sup(np.nan_to_num(stack("center_err"), nan=math.inf)),
        momentum_int=_sup(stack("momentum")),
        force_defect=_sup(stack("force") - stack("limit_force")),
    )


def assemble_primed_record(slices: Sequence[TimeSlice], grid: TimeGrid) -> PrimedRecord:
    stack = lambda name: np.array([getattr(s, name) for s in slices])  # noqa: E731
    P_prime = stack("P_prime")
    balance = (
        P_prime
        - P_prime[0]
        - grid.running(stack("boundary_P_prime_v"))
        + grid.running(stack("boundary_T_prime"))
        - grid.running(stack("f_prime"))
    )
    return PrimedRecord(
        Pprime_int=_sup(P_prime),
        Pprime_boundary=_sup(stack("P_prime_boundary")),
        Q0prime=_sup(balance),
        Q2prime=_sup(stack("J_prime_moment") - stack("J_prime")),
        Q3prime=_sup(stack("J_prime_flux")),
    )


def _slices(
    field: FieldProvider,
    pot: AnalyticPotentials,
    pot_aux: Potentials,
    nl: Nonlinearity,
    grid: TimeGrid,
    nb: Neighborhood,
    constants: PhysicalConstants,
) -> list[TimeSlice]:
    return [evaluate_slice(field, pot, pot_aux, nl, float(t), nb, constants) for t in grid.times]


def q_integrals(
    field: WaveCorpuscle,
    pot: AnalyticPotentials,
    traj: Trajectory,
    t0: float,
    t: float,
    nb: Neighborhood,
    time_samples: int = 11,
    nl: Nonlinearity | None = None,
) -> QRecord:
    """Surface and volume Q-integrals over [t0, t], as sups over the time grid."""
    nl = nl or scaled_nonlinearity(reconstruct_nonlinearity(field.ff.profile), field.ff.a)
    grid = TimeGrid.uniform(t0, t, time_samples)
    return assemble_q_record(_slices(field, pot, field.aux, nl, grid, nb, field.constants), grid)


def primed_diagnostics(
    wc: WaveCorpuscle,
    pot_true: AnalyticPotentials,
    pot_aux: Potentials,
    t0: float,
    t: float,
    nb: Neighborhood,
    time_samples: int = 11,
    nl: Nonlinearity | None = None,
) -> PrimedRecord:
    """Differences between the balance laws in the true and the auxiliary potentials."""
    nl = nl or scaled_nonlinearity(reconstruct_nonlinearity(wc.ff.profile), wc.ff.a)
    grid = TimeGrid.uniform(t0, t, time_samples)
    return assemble_primed_record(_slices(wc, pot_true, pot_aux, nl, grid, nb, wc.constants), grid)


@dataclass(frozen=True)
class IndexRecord:
    n: int
    a: float
    R: float
    theta: float
    rho_bar: float
    center_err: float
    Q0: float
    Q01: float
    Q20: float
    Q22: float
    Q23: float
    Q3: float
    Pprime_int: float
    Q0prime: float
    Q2prime: float
    Q3prime: float
    rho_drift: float
    force_defect: float
    momentum_int: float
    quadrature_flag: bool
    Pprime_boundary: float = 0.0


REPORT_COLUMNS = (
    "n", "a", "R", "theta", "rho_bar", "center_err",
    "Q0", "Q01", "Q20", "Q22", "Q23", "Q3",
    "Pprime_int", "Q0prime", "Q2prime", "Q3prime",
    "rho_drift", "force_defect", "momentum_int", "quadrature_flag",
)


@dataclass(frozen=True)
class SlopeFit:
    slope: float | None
    r_squared: float | None
    points: int


def fit_slope(x: Sequence[float], y: Sequence[float]) -> SlopeFit:
    """Least-squares slope of log y against log x over the positive values."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if keep.sum() < 2:
        return SlopeFit(None, None, int(keep.sum()))
    lx, ly = np.log(x[keep]), np.log(y[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = ly - (slope * lx + intercept)
    spread = np.sum((ly - ly.mean()) ** 2)
    r_squared = 1.0 - float(np.sum(residual ** 2)) / float(spread) if spread > 0 else 1.0
    return SlopeFit(float(slope), r_squared, int(keep.sum()))


def non_increasing_from(values: Sequence[float], start: int, floor: float) -> bool:
    """values[k+1] <= values[k] for k >= start, treating anything under `floor` as 0."""
    v = np.where(np.asarray(values, dtype=float) < floor, 0.0, np.asarray(values, dtype=float))
    tail = v[start:]
    return bool(np.all(np.diff(tail) <= 0.0))


def converged(values: Sequence[float], floor: float, ratio: float = 1e-4) -> bool:
    first, last = float(values[0]), float(values[-1])
    return last <= floor or last <= ratio * first


@dataclass
class ConcentrationReport:
    records: list[IndexRecord]
    rho_bar_inf: float
    p_inf: NDArray
    metadata: dict[str, Any] = field(default_factory=dict)

    def column(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.records]

    def summary(self, floor: float = 1e-12) -> dict[str, Any]:
        n = self.column("n")
        R = self.column("R")
        start = min(2, len(n) - 1)
        columns: dict[str, Any] = {}
        for name in Q_COLUMNS + PRIMED_COLUMNS + ("rho_drift", "force_defect", "center_err"):
            values = self.column(name)
            entry = {
                "slope_vs_n": asdict(fit_slope(n, values)),
                "non_increasing_from_3": non_increasing_from(values, start, floor),
                "converged": converged(values, floor),
            }
            if name in PRIMED_COLUMNS:
                entry["slope_vs_R"] = asdict(fit_slope(R, values))
            columns[name] = entry
        momentum = self.column("momentum_int")
        return {
            "columns": columns,
            "rho_bar_inf": self.rho_bar_inf,
            "p_inf": [float(x) for x in self.p_inf],
            "momentum_bound": max(momentum),
            "max_center_err": max(self.column("center_err")),
            "metadata": self.metadata,
        }


def concentration_study(
    pot_true: AnalyticPotentials,
    profile: RadialProfile,
    r0: Sequence[float],
    v0: Sequence[float],
    t_span: tuple[float, float],
    schedule: ConcentrationSchedule,
    P3: PolyScalarField | None,
    constants: PhysicalConstants,
    step: float = 1e-3,
    time_samples: int = 11,
    sphere: SphereQuadrature | None = None,
    radial_nodes: int = 10,
    threads: int | None = None,
    max_speed: float = 1e6,
    max_acceleration: float = 1e8,
    quad_nodes: int = 32,
) -> ConcentrationReport:
    """Run the corpuscle through every schedule index and collect the concentration diagnostics."""
    if time_samples < 3 or time_samples % 2 == 0:
        raise ConfigError(f"time_samples must be odd and >= 3, got {time_samples}")
    t0, t1 = t_span
    sphere = sphere or SphereQuadrature()
    multiple = time_samples - 1
    traj = integrate_newton(pot_true, r0, v0, t0, t1, step, constants, multiple=multiple)
    traj.check_bounds(max_speed, max_acceleration)
    grid = TimeGrid.from_trajectory(traj, time_samples)
    aux = AuxiliaryPotentials(pot_true, traj, P3, constants)
    base_nl = reconstruct_nonlinearity(profile)
    upsilon = charge_norm(FormFactor(profile, 1.0))

    def run_index(index: int) -> IndexRecord:
        n, a, R = schedule.n_values[index], schedule.a[index], schedule.R[index]
        logger.info("Schedule index n=%d started (a=%.3g, R=%.3g, theta=%.4g)", n, a, R, R / a)
        ff = FormFactor(profile, a)
        nl = scaled_nonlinearity(base_nl, a)
        wc = WaveCorpuscle(ff, traj, pot_true, P3, constants, quad_nodes)
        nb = Neighborhood.build(traj, a, R, sphere, radial_nodes)
        slices = _slices(wc, pot_true, aux, nl, grid, nb, constants)
        q_rec = assemble_q_record(slices, grid)
        p_rec = assemble_primed_record(slices, grid)

        refined_rho, _ = adjacent_charge_and_center(wc, t1, nb.refined(), constants)
        coarse_rho = slices[-1].rho_bar
        flag = abs(refined_rho - coarse_rho) > REFINEMENT_TOL * max(abs(refined_rho), CENTER_FLOOR)
        if flag:
            logger.warning("Quadrature refinement disagrees at n=%d: %.17g vs %.17g", n, coarse_rho, refined_rho)
        logger.info("Schedule index n=%d finished", n)
        return IndexRecord(
            n=n, a=a, R=R, theta=R / a,
            rho_bar=slices[0].rho_bar,
            center_err=q_rec.center_err,
            Q0=q_rec.Q0, Q01=q_rec.Q01, Q20=q_rec.Q20, Q22=q_rec.Q22, Q23=q_rec.Q23, Q3=q_rec.Q3,
            Pprime_int=p_rec.Pprime_int, Q0prime=p_rec.Q0prime, Q2prime=p_rec.Q2prime, Q3prime=p_rec.Q3prime,
            rho_drift=q_rec.rho_drift,
            force_defect=q_rec.force_defect,
            momentum_int=q_rec.momentum_int,
            quadrature_flag=bool(flag),
            Pprime_boundary=p_rec.Pprime_boundary,
        )

    with ThreadPoolExecutor(max_workers=threads) as pool:
        records = list(pool.map(run_index, range(len(schedule))))

    phase_branch = WaveCorpuscle(FormFactor(profile, schedule.a[0]), traj, pot_true, P3, constants).phase_branch
    return ConcentrationReport(
        records=records,
        rho_bar_inf=constants.q * upsilon,
        p_inf=constants.m * traj.v[0] * upsilon,
        metadata={
            "profile": profile.name,
            "nonlinearity": dict(base_nl.metadata),
            "phase_branch": phase_branch,
            "time_samples": time_samples,
            "steps": len(traj.times) - 1,
            "step": traj.step,
            "sphere_nodes": [sphere.n_polar, sphere.n_azimuth],
            "radial_nodes": radial_nodes,
            "sup_speed": traj.sup_speed,
            "sup_acceleration": traj.sup_acceleration,
        },
    )
