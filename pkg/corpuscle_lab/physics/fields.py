"""Electromagnetic potentials, fields, vector-field splitting and auxiliary potentials."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Protocol, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from corpuscle_lab.errors import ConfigError, NumericalError
from corpuscle_lab.models.constants import PhysicalConstants
from corpuscle_lab.physics.polynomial import (
    MAX_VECTOR_DEGREE,
    ZERO3,
    Frame,
    PolyScalarField,
    PolyVectorField,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EMFieldSample:
    E: NDArray
    B: NDArray


class Potentials(Protocol):
    """Anything that evaluates phi, A, div A and the E/B fields at (t, x)."""

    c: float

    def scalar(self, t: float, x: ArrayLike) -> NDArray: ...

    def vector(self, t: float, x: ArrayLike) -> NDArray: ...

    def divergence(self, t: float, x: ArrayLike) -> NDArray: ...

    def fields(self, t: float, x: ArrayLike) -> EMFieldSample: ...


@dataclass(frozen=True, eq=False)
class AnalyticPotentials:
    phi: PolyScalarField
    A: PolyVectorField
    c: float = 1.0

    @classmethod
    def zero(cls, c: float = 1.0) -> "AnalyticPotentials":
        return cls(PolyScalarField.zero(), PolyVectorField.zero(), c)

    @classmethod
    def from_uniform_fields(
        cls, E: Sequence[float] = ZERO3, B: Sequence[float] = ZERO3, c: float = 1.0
    ) -> "AnalyticPotentials":
        """phi = -E.x and the symmetric gauge A = B x x / 2."""
        E = np.asarray(E, dtype=float)
        B = np.asarray(B, dtype=float)
        phi = sum(
            (PolyScalarField.coordinate(a).scale(-E[a]) for a in range(3) if E[a] != 0.0),
            PolyScalarField.zero(),
        )
        half = 0.5 * np.array([
            [0.0, -B[2], B[1]],
            [B[2], 0.0, -B[0]],
            [-B[1], B[0], 0.0],
        ])
        return cls(phi, PolyVectorField.linear(half), c)

    @cached_property
    def _grad_phi(self) -> PolyVectorField:
        return self.phi.gradient()

    @cached_property
    def _dt_A(self) -> PolyVectorField:
        return self.A.dt()

    @cached_property
    def _curl_A(self) -> PolyVectorField:
        return self.A.curl()

    @cached_property
    def _div_A(self) -> PolyScalarField:
        return self.A.divergence()

    def scalar(self, t: float, x: ArrayLike) -> NDArray:
        return self.phi(t, x)

    def vector(self, t: float, x: ArrayLike) -> NDArray:
        return self.A(t, x)

    def divergence(self, t: float, x: ArrayLike) -> NDArray:
        return self._div_A(t, x)

    def fields(self, t: float, x: ArrayLike) -> EMFieldSample:
        E = -self._grad_phi(t, x) - self._dt_A(t, x) / self.c
        B = self._curl_A(t, x)
        return EMFieldSample(E=E, B=B)

    @property
    def degree(self) -> int:
        return max(self.phi.degree, self.A.degree)


def em_fields(pot: Potentials, t: float, x: ArrayLike) -> EMFieldSample:
    """E = -grad(phi) - (1/c) dA/dt and B = curl(A), evaluated exactly."""
    return pot.fields(t, x)


def split_polynomial_field(V: PolyVectorField) -> tuple[PolyScalarField, PolyVectorField]:
    """Split V into a gradient part grad(Pi) and a sphere-tangent part with y . V_tangent = 0."""
    if V.degree > MAX_VECTOR_DEGREE:
        raise ConfigError(
            f"Splitting supports vector fields of spatial degree <= {MAX_VECTOR_DEGREE}, got {V.degree}"
        )
    frame = V.frame
    potential = PolyScalarField.zero(frame)
    tangent = PolyVectorField.zero(frame)
    for j in range(V.degree + 1):
        part = V.homogeneous(j)
        if part.is_zero:
            continue
        weight = Fraction(1, j + 1)
        potential = potential + part.coordinate_dot().scale(weight)
        tangent = tangent - part.curl().cross_coordinates().scale(weight)
    return potential, tangent


def _gauss_legendre_unit(nodes: int) -> tuple[NDArray, NDArray]:
    xi, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (xi + 1.0), 0.5 * w


def ray_potential(V: Callable[[NDArray], NDArray], y: NDArray, quad_nodes: int = 32) -> NDArray:
    """Pi(y) = int_0^1 y . V(s y) ds for a batch of points y (..., 3)."""
    s, w = _gauss_legendre_unit(quad_nodes)
    y = np.asarray(y, dtype=float)
    samples = np.asarray(V(s[:, None] * y[..., None, :] if y.ndim > 1 else s[:, None] * y), dtype=float)
    if not np.all(np.isfinite(samples)):
        raise NumericalError({"message": "Non-finite field value on the splitting ray", "y": y.tolist()})
    if y.ndim > 1:
        return np.einsum("...kj,...j,k->...", samples, y, w)
    return float(np.einsum("kj,j,k->", samples, y, w))


def split_field_at_point(
    V: Callable[[NDArray], NDArray], y: ArrayLike, quad_nodes: int = 32
) -> tuple[float, NDArray]:
    """Numerical splitting at one point by Gauss-Legendre quadrature along rays."""
    y = np.asarray(y, dtype=float)
    radius = float(np.linalg.norm(y))
    if radius == 0.0:
        return 0.0, np.zeros(3)
    value = np.asarray(V(y), dtype=float)
    if not np.all(np.isfinite(value)):
        raise NumericalError({"message": "Non-finite field value at the splitting point", "y": y.tolist()})

    # Fourth-order central differences over perturbed rays
    delta = 1e-3 * max(1.0, radius)
    offsets = np.array([2.0, 1.0, -1.0, -2.0]) * delta
    stencil = np.array([-1.0, 8.0, -8.0, 1.0]) / (12.0 * delta)
    rays = y[None, None, :] + offsets[None, :, None] * np.eye(3)[:, None, :]
    potentials = ray_potential(V, rays.reshape(-1, 3), quad_nodes).reshape(3, 4)
    grad = potentials @ stencil
    return ray_potential(V, y, quad_nodes), value - grad


def linearize_potentials(
    pot: AnalyticPotentials,
    r_hat: Sequence[float],
    t: float,
    velocity: Sequence[float] | None = None,
) -> AnalyticPotentials:
    """Constant plus linear part of the potentials at r_hat, as a snapshot at time t.

    With `velocity` the expansion point moves along the trajectory, so the time
    derivative of the result matches the moving linearization; without it the
    point is held fixed.
    """
    r_hat = tuple(float(v) for v in r_hat)
    v = tuple(float(w) for w in velocity) if velocity is not None else ZERO3
    frame: Frame = (r_hat, v, float(t))

    def linear_jets(f: PolyScalarField) -> PolyScalarField:
        rate = f.dt() + f.directional(v)
        return PolyScalarField.from_jets(
            f.taylor(t, r_hat).truncate(1), rate.taylor(t, r_hat).truncate(1), frame
        )

    A = PolyVectorField(tuple(linear_jets(component) for component in pot.A))  # type: ignore[arg-type]
    return AnalyticPotentials(linear_jets(pot.phi), A, pot.c)


def check_light_speed(pot: Potentials, constants: PhysicalConstants) -> None:
    if pot.c != constants.c:
        raise ConfigError(
            f"Potentials are expressed with c = {pot.c} but the constants carry c = {constants.c}"
        )


def _trajectory_relative(P3: PolyScalarField | None, t: float, frame: Frame) -> tuple[PolyScalarField, ...]:
    """Value and first two coefficient rates of P3 at time t, re-expressed in `frame`."""
    if P3 is None or P3.is_zero:
        zero = PolyScalarField.zero(frame)
        return zero, zero, zero
    if any(P3.origin) or any(P3.velocity):
        raise ConfigError("P3 is trajectory-relative and must have zero origin and velocity")
    if any(sum(deg) not in (3, 4) for deg in P3.terms):
        raise ConfigError("P3 may contain only monomials of degree 3 (and optionally 4)")
    rate = P3.coefficient_rate()
    jets = (P3, rate, rate.coefficient_rate())
    return tuple(PolyScalarField.in_frame(f.coefficients_at(t).terms, frame) for f in jets)


def build_auxiliary_potentials(
    pot: AnalyticPotentials,
    r: Sequence[float],
    v: Sequence[float],
    t: float,
    P3: PolyScalarField | None,
    constants: PhysicalConstants,
    acceleration: Sequence[float] | None = None,
) -> AnalyticPotentials:
    """Auxiliary potentials at time t, for which the wave-corpuscle is an exact solution.

    A_aux = A(t,r) + (y.grad)A(t,r) + grad P3 and phi_aux = phi(t,r) + y.grad phi(t,r) + phi2,
    with y = x - r.  The result is a snapshot riding on the trajectory: it is exact
    in value, in every spatial derivative and in the first time derivative at t.
    """
    check_light_speed(pot, constants)
    m, q, c = constants.m, constants.q, constants.c
    r = tuple(float(w) for w in r)
    v = tuple(float(w) for w in v)
    if acceleration is None:
        em = pot.fields(t, r)
        acceleration = (q / m) * (em.E + np.cross(v, em.B) / c)
    a = tuple(float(w) for w in acceleration)

    moving: Frame = (r, v, float(t))
    frozen: Frame = (r, ZERO3, float(t))

    A = pot.A
    dA = A.dt()
    A_rate = dA + A.directional(v)
    A_accel = dA.dt() + dA.directional(v).scale(2) + A.directional(v).directional(v) + A.directional(a)
    lin = A.taylor(t, r).truncate(1)
    lin_rate = A_rate.taylor(t, r).truncate(1)
    lin_accel = A_accel.taylor(t, r).truncate(1)

    A1 = lin.linear_matrix()
    A1_rate = lin_rate.linear_matrix()
    A1_accel = lin_accel.linear_matrix()
    A_hat = PolyVectorField.linear(0.5 * (A1 - A1.T), frozen)
    A_hat_rate = PolyVectorField.linear(0.5 * (A1_rate - A1_rate.T), frozen)
    P2_rate = PolyVectorField.linear(A1_rate, frozen).coordinate_dot().scale(0.5)
    P2_accel = PolyVectorField.linear(A1_accel, frozen).coordinate_dot().scale(0.5)

    P3_value, P3_rate, P3_accel = _trajectory_relative(P3, t, frozen)
    grad_P3 = P3_value.gradient()
    grad_P3_rate = P3_rate.gradient()

    k = q / (2.0 * m * c * c)
    phi2 = (
        A_hat.dot(A_hat).scale(-k)
        - (P2_rate + P3_rate).scale(1.0 / c)
        + grad_P3.dot_vector(v).scale(1.0 / c)
    )
    phi2_rate = (
        A_hat.dot(A_hat_rate).scale(-2.0 * k)
        - (P2_accel + P3_accel).scale(1.0 / c)
        + (grad_P3.dot_vector(a) + grad_P3_rate.dot_vector(v)).scale(1.0 / c)
    )

    phi = pot.phi
    phi_lin = phi.taylor(t, r).truncate(1)
    phi_lin_rate = (phi.dt() + phi.directional(v)).taylor(t, r).truncate(1)
    phi_aux = PolyScalarField.from_jets(phi_lin + phi2, phi_lin_rate + phi2_rate, moving)

    A_aux = PolyVectorField(tuple(
        PolyScalarField.from_jets(lin[i] + grad_P3[i], lin_rate[i] + grad_P3_rate[i], moving)
        for i in range(3)
    ))  # type: ignore[arg-type]
    return AnalyticPotentials(phi_aux, A_aux, c)


def balance_residual(
    pot: AnalyticPotentials,
    r: Sequence[float],
    v: Sequence[float],
    r_ddot: Sequence[float],
    t: float,
    y: ArrayLike,
    constants: PhysicalConstants,
) -> tuple[NDArray, NDArray]:
    """Residuals of the shape-preservation balance conditions at offsets y from r.

    force = m r'' - [(q/c) grad(v.A) - q^2/(2mc^2) grad|A_hat|^2 - q grad(phi) - (q/c) d_t A_grad]
    with every term taken in the frame moving with r and d_t at fixed y; the second
    residual is div(A_hat).
    """
    check_light_speed(pot, constants)
    m, q, c = constants.m, constants.q, constants.c
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    x = r + np.asarray(y, dtype=float)

    A_local = pot.A.taylor(t, r)
    A_rate = (pot.A.dt() + pot.A.directional(v)).taylor(t, r)
    _, A_hat = split_polynomial_field(A_local)
    Pi_rate, _ = split_polynomial_field(A_rate)
    phi_local = pot.phi.taylor(t, r)

    grad_vA = np.einsum("...ij,i->...j", A_local.jacobian(t, x), v)
    A_hat_value = A_hat(t, x)
    grad_A_hat2 = 2.0 * np.einsum("...ij,...i->...j", A_hat.jacobian(t, x), A_hat_value)
    grad_phi = phi_local.gradient()(t, x)
    dt_A_grad = Pi_rate.gradient()(t, x)

    force = (q / c) * grad_vA - (q * q / (2.0 * m * c * c)) * grad_A_hat2 - q * grad_phi - (q / c) * dt_A_grad
    return m * np.asarray(r_ddot, dtype=float) - force, A_hat.divergence()(t, x)


def limit_fields(pot: AnalyticPotentials, r_hat: Sequence[float], t: float) -> EMFieldSample:
    """E_inf and B_inf: the fields of the linearized potentials at r_hat."""
    r_hat = np.asarray(r_hat, dtype=float)
    return linearize_potentials(pot, r_hat, t).fields(t, r_hat)
