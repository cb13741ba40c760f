"""Newton-Lorentz point dynamics and the phase integral carried along the trajectory."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import CubicHermiteSpline

from corpuscle_lab.errors import ConfigError, DomainError, NumericalError
from corpuscle_lab.models.constants import PhysicalConstants
from corpuscle_lab.physics.fields import AnalyticPotentials, Potentials, em_fields
from corpuscle_lab.physics.polynomial import MAX_TIME_DEGREE, PolyScalarField

logger = logging.getLogger(__name__)


def lorentz_force(
    pot: Potentials, t: float, r: ArrayLike, v: ArrayLike, constants: PhysicalConstants
) -> NDArray:
    """qE + (q/c) v x B at the point r."""
    em = em_fields(pot, t, r)
    q, c = constants.q, constants.c
    return q * em.E + (q / c) * np.cross(np.asarray(v, dtype=float), em.B)


def lorentz_force_from_potentials(
    pot: AnalyticPotentials, t: float, r: ArrayLike, v: ArrayLike, constants: PhysicalConstants
) -> NDArray:
    """(q/c) grad(v.A) - q grad(phi) - (q/c) dA/dt - (q/c)(v.grad)A, all at the point r."""
    q, c = constants.q, constants.c
    v = np.asarray(v, dtype=float)
    jac = pot.A.jacobian(t, r)
    grad_phi = pot.phi.gradient()(t, r)
    dt_A = pot.A.dt()(t, r)
    return (q / c) * (jac.T @ v) - q * grad_phi - (q / c) * dt_A - (q / c) * (jac @ v)


class FieldKernel:
    """phi, A, E and B of polynomial potentials at a single point, with the monomials stacked."""

    def __init__(self, pot: AnalyticPotentials):
        self.c = pot.c
        grad_phi = pot.phi.gradient()
        dt_A = pot.A.dt()
        curl_A = pot.A.curl()
        rows: list[PolyScalarField] = [pot.phi, *pot.A, *grad_phi, *dt_A, *curl_A]
        grouped: dict[tuple, list[tuple[int, PolyScalarField]]] = {}
        for index, f in enumerate(rows):
            grouped.setdefault(f.frame, []).append((index, f))

        self._groups = []
        for frame, members in grouped.items():
            monomials = sorted({deg for _, f in members for deg in f.terms}) or [(0, 0, 0)]
            coeffs = np.zeros((len(members), len(monomials), MAX_TIME_DEGREE + 1))
            for row, (_, f) in enumerate(members):
                for k, deg in enumerate(monomials):
                    for p, value in enumerate(f.terms.get(deg, ())):
                        coeffs[row, k, p] = float(value)
            self._groups.append((
                np.asarray(frame[0]),
                np.asarray(frame[1]),
                frame[2],
                np.asarray(monomials, dtype=int),
                coeffs,
                [index for index, _ in members],
            ))

    def __call__(self, t: float, x: NDArray) -> tuple[float, NDArray, NDArray, NDArray]:
        out = np.empty(13)
        for origin, velocity, t_ref, exponents, coeffs, index in self._groups:
            tau = t - t_ref
            y = x - origin - velocity * tau
            monomials = np.prod(y ** exponents, axis=1)
            out[index] = (coeffs @ (tau ** np.arange(coeffs.shape[2]))) @ monomials
        E = -out[4:7] - out[7:10] / self.c
        return float(out[0]), out[1:4], E, out[10:13]


def _cross(a: NDArray, b: NDArray) -> NDArray:
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: NDArray
    r: NDArray
    v: NDArray
    s_p: NDArray
    a: NDArray
    s_rate: NDArray
    s_rate_alt: NDArray

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    @cached_property
    def _r_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.times, self.r, self.v, axis=0)

    @cached_property
    def _v_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.times, self.v, self.a, axis=0)

    @cached_property
    def _s_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.times, self.s_p, self.s_rate)

    def contains(self, t: float) -> bool:
        slack = 1e-12 * max(1.0, self.t1 - self.t0)
        return self.t0 - slack <= t <= self.t1 + slack

    def _check(self, t: float) -> float:
        if not self.contains(t):
            raise DomainError({
                "message": "Time outside the integrated trajectory",
                "t": t,
                "range": [self.t0, self.t1],
            })
        return min(max(float(t), self.t0), self.t1)

    def position(self, t: float) -> NDArray:
        return np.asarray(self._r_spline(self._check(t)))

    def velocity(self, t: float) -> NDArray:
        return np.asarray(self._v_spline(self._check(t)))

    def phase_integral(self, t: float) -> float:
        return float(self._s_spline(self._check(t)))

    def state(self, t: float) -> tuple[NDArray, NDArray, float]:
        return self.position(t), self.velocity(t), self.phase_integral(t)

    @property
    def sup_speed(self) -> float:
        return float(np.max(np.linalg.norm(self.v, axis=1)))

    @property
    def sup_acceleration(self) -> float:
        return float(np.max(np.linalg.norm(self.a, axis=1)))

    def check_bounds(self, max_speed: float, max_acceleration: float) -> None:
        """Reject trajectories whose speed or acceleration leaves the admitted bounds."""
        speed, accel = self.sup_speed, self.sup_acceleration
        if not (math.isfinite(speed) and speed <= max_speed and math.isfinite(accel) and accel <= max_acceleration):
            raise NumericalError({
                "message": "Trajectory violates the speed/acceleration bounds",
                "sup_speed": speed,
                "sup_acceleration": accel,
                "max_speed": max_speed,
                "max_acceleration": max_acceleration,
            })

    def phase_rate_gap(self) -> float:
        """Largest difference between the two forms of the phase rate at the nodes."""
        return float(np.max(np.abs(self.s_rate - self.s_rate_alt)))

    def node_indices(self, samples: int) -> NDArray:
        """Evenly strided node indices giving `samples` times including both ends."""
        intervals = len(self.times) - 1
        if samples < 2 or intervals % (samples - 1):
            raise ConfigError(f"Cannot take {samples} evenly strided samples from {intervals} steps")
        return np.arange(0, intervals + 1, intervals // (samples - 1))


def step_count(t0: float, t1: float, step: float, multiple: int = 1) -> int:
    """Number of equal steps no longer than `step`, rounded up to a multiple of `multiple`."""
    if not step > 0:
        raise ConfigError(f"Step must be positive, got {step}")
    if not t1 > t0:
        raise ConfigError(f"Need t1 > t0, got [{t0}, {t1}]")
    n = max(1, math.ceil((t1 - t0) / step - 1e-9))
    return multiple * math.ceil(n / multiple)


def integrate_newton(
    pot: AnalyticPotentials,
    r0: Sequence[float],
    v0: Sequence[float],
    t0: float,
    t1: float,
    step: float,
    constants: PhysicalConstants,
    multiple: int = 1,
) -> Trajectory:
    """Classical RK4 on (r, v, s_p); the step is shrunk so the grid ends exactly at t1."""
    n_steps = step_count(t0, t1, step, multiple)
    h = (t1 - t0) / n_steps
    m, q, c, chi = constants.m, constants.q, constants.c, constants.chi
    kernel = FieldKernel(pot)

    def rhs(t: float, state: NDArray) -> tuple[NDArray, float]:
        r, v = state[:3], state[3:6]
        phi, A, E, B = kernel(t, r)
        acc = (q / m) * (E + _cross(v, B) / c)
        s_rate = (0.5 * m * (v @ v) + (q / c) * (v @ A) - q * phi) / chi
        derivative = np.empty(7)
        derivative[:3] = v
        derivative[3:6] = acc
        derivative[6] = s_rate
        tilde = v + (q / (m * c)) * A
        s_alt = (0.5 * m * (tilde @ tilde) - (q * q / (2.0 * m * c * c)) * (A @ A) - q * phi) / chi
        return derivative, s_alt

    times = t0 + h * np.arange(n_steps + 1)
    times[-1] = t1
    states = np.empty((n_steps + 1, 7))
    rates = np.empty((n_steps + 1, 7))
    alt = np.empty(n_steps + 1)
    states[0, :3] = np.asarray(r0, dtype=float)
    states[0, 3:6] = np.asarray(v0, dtype=float)
    states[0, 6] = 0.0

    for i in range(n_steps):
        t, y = times[i], states[i]
        k1, alt[i] = rhs(t, y)
        rates[i] = k1
        k2, _ = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3, _ = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4, _ = rhs(t + h, y + h * k3)
        nxt = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(nxt)):
            raise NumericalError({
                "message": "Non-finite trajectory state",
                "last_valid_time": float(t),
                "state": y.tolist(),
            })
        states[i + 1] = nxt
    rates[-1], alt[-1] = rhs(times[-1], states[-1])

    trajectory = Trajectory(
        times=times,
        r=states[:, :3].copy(),
        v=states[:, 3:6].copy(),
        s_p=states[:, 6].copy(),
        a=rates[:, 3:6].copy(),
        s_rate=rates[:, 6].copy(),
        s_rate_alt=alt,
    )
    logger.info(
        "Integrated trajectory on [%g, %g] with %d steps: sup|v|=%.6g sup|a|=%.6g",
        t0, t1, n_steps, trajectory.sup_speed, trajectory.sup_acceleration,
    )
    return trajectory
