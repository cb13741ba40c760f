"""Wave-corpuscles psi = exp(iS) psi_a(|x - r(t)|), their densities and the NLS residual."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Generic, Protocol, TypeVar

import numpy as np
from numpy.typing import ArrayLike, NDArray

from corpuscle_lab.models.constants import PhysicalConstants
from corpuscle_lab.physics.dynamics import Trajectory, lorentz_force
from corpuscle_lab.physics.fields import (
    AnalyticPotentials,
    EMFieldSample,
    Potentials,
    build_auxiliary_potentials,
    check_light_speed,
    ray_potential,
)
from corpuscle_lab.physics.formfactor import FormFactor, Nonlinearity
from corpuscle_lab.physics.polynomial import PolyScalarField

logger = logging.getLogger(__name__)

HOMOGENEOUS_CUBIC = "homogeneous-cubic"
RAY_INTEGRAL = "ray-integral"

T = TypeVar("T")


TIME_CACHE_SIZE = 1024


class TimeCache(Generic[T]):
    """Bounded, thread-safe memo of per-time objects; the least recently used time is evicted first."""

    def __init__(self, build: Callable[[float], T], maxsize: int = TIME_CACHE_SIZE):
        self._cached = lru_cache(maxsize=maxsize)(build)

    def __call__(self, t: float) -> T:
        return self._cached(float(t))

    def __len__(self) -> int:
        return self._cached.cache_info().currsize


class AuxiliaryPotentials:
    """Auxiliary potentials along a trajectory, evaluated through exact per-time snapshots."""

    def __init__(
        self,
        pot: AnalyticPotentials,
        traj: Trajectory,
        P3: PolyScalarField | None,
        constants: PhysicalConstants,
    ):
        check_light_speed(pot, constants)
        self.pot = pot
        self.traj = traj
        self.P3 = P3
        self.constants = constants
        self.c = pot.c
        self.snapshot = TimeCache(self._build)

    def _build(self, t: float) -> AnalyticPotentials:
        r, v, _ = self.traj.state(t)
        accel = lorentz_force(self.pot, t, r, v, self.constants) / self.constants.m
        return build_auxiliary_potentials(self.pot, r, v, t, self.P3, self.constants, acceleration=accel)

    def scalar(self, t: float, x: ArrayLike) -> NDArray:
        return self.snapshot(t).scalar(t, x)

    def vector(self, t: float, x: ArrayLike) -> NDArray:
        return self.snapshot(t).vector(t, x)

    def divergence(self, t: float, x: ArrayLike) -> NDArray:
        return self.snapshot(t).divergence(t, x)

    def fields(self, t: float, x: ArrayLike) -> EMFieldSample:
        return self.snapshot(t).fields(t, x)


@dataclass(frozen=True)
class FieldSample:
    psi: NDArray
    grad_psi: NDArray
    dt_psi: NDArray
    laplacian_psi: NDArray

    def scaled(self, factor: complex) -> "FieldSample":
        return FieldSample(
            self.psi * factor, self.grad_psi * factor, self.dt_psi * factor, self.laplacian_psi * factor
        )


class FieldProvider(Protocol):
    constants: PhysicalConstants

    def sample(self, t: float, x: ArrayLike) -> FieldSample: ...


@dataclass(frozen=True)
class CenterState:
    """Trajectory state and the potentials' jets at the center r(t)."""

    t: float
    r: NDArray
    v: NDArray
    a: NDArray
    s_p: float
    s_rate: float
    phi0: float
    A0: NDArray
    A1: NDArray
    A0_rate: NDArray
    A1_rate: NDArray


@dataclass(frozen=True, eq=False)
class WaveCorpuscle:
    ff: FormFactor
    traj: Trajectory
    pot: AnalyticPotentials
    P3: PolyScalarField | None
    constants: PhysicalConstants
    quad_nodes: int = 32

    def __post_init__(self):
        check_light_speed(self.pot, self.constants)

    @cached_property
    def aux(self) -> AuxiliaryPotentials:
        return AuxiliaryPotentials(self.pot, self.traj, self.P3, self.constants)

    @cached_property
    def phase_branch(self) -> str:
        if self.P3 is None or self.P3.is_homogeneous(3):
            return HOMOGENEOUS_CUBIC
        return RAY_INTEGRAL

    @cached_property
    def _P3(self) -> PolyScalarField:
        return self.P3 if self.P3 is not None else PolyScalarField.zero()

    @cached_property
    def _grad_P3(self):
        return self._P3.gradient()

    @cached_property
    def _lap_P3(self) -> PolyScalarField:
        return self._P3.laplacian()

    @cached_property
    def _rate_P3(self) -> PolyScalarField:
        return self._P3.coefficient_rate()

    @cached_property
    def _A_rate(self):
        return self.pot.A.dt()

    @cached_property
    def center(self) -> TimeCache[CenterState]:
        return TimeCache(self._center)

    def _center(self, t: float) -> CenterState:
        m, q, c, chi = self.constants.m, self.constants.q, self.constants.c, self.constants.chi
        r, v, s_p = self.traj.state(t)
        a = lorentz_force(self.pot, t, r, v, self.constants) / m
        A_local = self.pot.A.taylor(t, r).truncate(1)
        A_rate = (self._A_rate + self.pot.A.directional(v)).taylor(t, r).truncate(1)
        A0 = A_local.constant_vector()
        phi0 = float(self.pot.phi(t, r))
        s_rate = (0.5 * m * (v @ v) + (q / c) * (v @ A0) - q * phi0) / chi
        return CenterState(
            t=float(t), r=r, v=v, a=a, s_p=s_p, s_rate=float(s_rate), phi0=phi0,
            A0=A0, A1=A_local.linear_matrix(),
            A0_rate=A_rate.constant_vector(), A1_rate=A_rate.linear_matrix(),
        )

    def _eigen_rate(self) -> float:
        return self.constants.chi * self.ff.lam / (2.0 * self.constants.m)

    def _quadratic_phase(self, st: CenterState, y: NDArray) -> NDArray:
        """y.A1 y / 2 + P3(y), by the closed formula or by the ray integral."""
        if self.phase_branch == HOMOGENEOUS_CUBIC:
            quad = 0.5 * np.einsum("...i,ij,...j->...", y, st.A1, y)
            return quad + np.sum(self._grad_P3(st.t, y) * y, axis=-1) / 3.0
        sym = 0.5 * (st.A1 + st.A1.T)
        return ray_potential(lambda z: z @ sym.T + self._grad_P3(st.t, z), y, self.quad_nodes)

    def local(self, t: float, x: ArrayLike) -> tuple[CenterState, NDArray]:
        st = self.center(t)
        return st, np.asarray(x, dtype=float) - st.r

    def _phase_value(self, st: CenterState, y: NDArray) -> NDArray:
        m, q, c, chi = self.constants.m, self.constants.q, self.constants.c, self.constants.chi
        linear = m * (y @ st.v) + (q / c) * (y @ st.A0)
        return (linear + (q / c) * self._quadratic_phase(st, y)) / chi + st.s_p - self._eigen_rate() * st.t

    def phase(self, t: float, x: ArrayLike) -> NDArray:
        st, y = self.local(t, x)
        return self._phase_value(st, y)

    def _phase_jets(self, st: CenterState, y: NDArray) -> tuple[NDArray, NDArray, NDArray, NDArray]:
        """S, grad S, laplacian S and dS/dt at fixed x."""
        m, q, c, chi = self.constants.m, self.constants.q, self.constants.c, self.constants.chi
        t = st.t
        sym = 0.5 * (st.A1 + st.A1.T)
        S = self._phase_value(st, y)
        grad_S = (m * st.v + (q / c) * (st.A0 + y @ sym.T + self._grad_P3(t, y))) / chi
        lap_S = (q / (chi * c)) * (np.trace(st.A1) + self._lap_P3(t, y))
        moving = (
            m * (y @ st.a)
            + (q / c) * (y @ st.A0_rate + 0.5 * np.einsum("...i,ij,...j->...", y, st.A1_rate, y) + self._rate_P3(t, y))
        ) / chi
        dt_S = moving + st.s_rate - self._eigen_rate() - grad_S @ st.v
        return S, grad_S, lap_S, dt_S

    def phase_gradient(self, t: float, x: ArrayLike) -> NDArray:
        st, y = self.local(t, x)
        return self._phase_jets(st, y)[1]

    def sample(self, t: float, x: ArrayLike) -> FieldSample:
        """psi and its derivatives, assembled from the profile and the polynomial phase."""
        st, y = self.local(t, x)
        S, grad_S, lap_S, dt_S = self._phase_jets(st, y)
        radius = np.linalg.norm(y, axis=-1)
        f = self.ff.value(radius)
        f1 = self.ff.d1(radius)
        lap_f = self.ff.laplacian(radius)
        safe = np.where(radius > 0, radius, 1.0)
        unit = np.where((radius > 0)[..., None], y / safe[..., None], 0.0)

        rotor = np.exp(1j * S)
        radial_S = np.sum(unit * grad_S, axis=-1)
        grad_psi = rotor[..., None] * (f1[..., None] * unit + 1j * f[..., None] * grad_S)
        laplacian_psi = rotor * (
            lap_f + 2j * f1 * radial_S + 1j * f * lap_S - f * np.sum(grad_S * grad_S, axis=-1)
        )
        dt_psi = rotor * (-f1 * (unit @ st.v) + 1j * f * dt_S)
        return FieldSample(rotor * f, grad_psi, dt_psi, laplacian_psi)

    def evaluate_psi(self, t: float, x: ArrayLike) -> FieldSample:
        return self.sample(t, x)

    def amplitude(self, t: float, x: ArrayLike) -> NDArray:
        _, y = self.local(t, x)
        return self.ff.value(np.linalg.norm(y, axis=-1))


def phase(wc: WaveCorpuscle, t: float, y: ArrayLike) -> NDArray:
    """Phase S at the offset y from the center r(t)."""
    return wc.phase(t, wc.traj.position(t) + np.asarray(y, dtype=float))


def evaluate_psi(wc: WaveCorpuscle, t: float, x: ArrayLike) -> FieldSample:
    return wc.sample(t, x)


@dataclass(frozen=True)
class PhaseRotated:
    """psi multiplied by the constant phase exp(i gamma)."""

    provider: FieldProvider
    gamma: float

    @property
    def constants(self) -> PhysicalConstants:
        return self.provider.constants

    def sample(self, t: float, x: ArrayLike) -> FieldSample:
        return self.provider.sample(t, x).scaled(np.exp(1j * self.gamma))


@dataclass(frozen=True)
class AmplitudeModulated:
    """psi multiplied by (1 + alpha t); not a solution for alpha != 0."""

    provider: FieldProvider
    alpha: float

    @property
    def constants(self) -> PhysicalConstants:
        return self.provider.constants

    def sample(self, t: float, x: ArrayLike) -> FieldSample:
        base = self.provider.sample(t, x)
        factor = 1.0 + self.alpha * t
        return FieldSample(
            base.psi * factor,
            base.grad_psi * factor,
            base.dt_psi * factor + self.alpha * base.psi,
            base.laplacian_psi * factor,
        )


@dataclass(frozen=True)
class ZeroField:
    constants: PhysicalConstants

    def sample(self, t: float, x: ArrayLike) -> FieldSample:
        shape = np.asarray(x, dtype=float).shape[:-1]
        zero = np.zeros(shape, dtype=complex)
        return FieldSample(zero, np.zeros(shape + (3,), dtype=complex), zero.copy(), zero.copy())


def _sample_of(field: FieldProvider | FieldSample, t: float, x: ArrayLike) -> FieldSample:
    return field if isinstance(field, FieldSample) else field.sample(t, x)


def densities(
    field: FieldProvider,
    pot: Potentials,
    t: float,
    x: ArrayLike,
    constants: PhysicalConstants | None = None,
) -> tuple[NDArray, NDArray, NDArray]:
    """Charge density rho, current J and momentum density P of the field in the given potentials."""
    constants = constants or field.constants
    m, q, c, chi = constants.m, constants.q, constants.c, constants.chi
    s = _sample_of(field, t, x)
    A = pot.vector(t, x)
    density = np.abs(s.psi) ** 2
    flux = np.imag(np.conj(s.psi)[..., None] * s.grad_psi)
    rho = q * density
    J = (q * chi / m) * flux - (q * q / (m * c)) * A * density[..., None]
    P = chi * flux - (q / c) * A * density[..., None]
    return rho, J, P


def covariant_terms(
    s: FieldSample, pot: Potentials, t: float, x: ArrayLike, constants: PhysicalConstants
) -> tuple[NDArray, NDArray, NDArray]:
    """Covariant derivatives (d_t + i q phi/chi) psi, (grad - i kappa A) psi and the covariant laplacian."""
    q, c, chi = constants.q, constants.c, constants.chi
    kappa = q / (chi * c)
    phi = pot.scalar(t, x)
    A = pot.vector(t, x)
    div_A = pot.divergence(t, x)
    dt_cov = s.dt_psi + 1j * (q / chi) * phi * s.psi
    grad_cov = s.grad_psi - 1j * kappa * A * s.psi[..., None]
    lap_cov = (
        s.laplacian_psi
        - 1j * kappa * div_A * s.psi
        - 2j * kappa * np.sum(A * s.grad_psi, axis=-1)
        - kappa * kappa * np.sum(A * A, axis=-1) * s.psi
    )
    return dt_cov, grad_cov, lap_cov


def nls_residual(
    field: FieldProvider | FieldSample,
    pot: Potentials,
    nl: Nonlinearity,
    t: float,
    x: ArrayLike,
    constants: PhysicalConstants,
) -> NDArray:
    """i chi D_t psi - (chi^2/2m)[-D^2 psi + G'(|psi|^2) psi]; zero for an exact solution."""
    check_light_speed(pot, constants)
    m, chi = constants.m, constants.chi
    s = _sample_of(field, t, x)
    dt_cov, _, lap_cov = covariant_terms(s, pot, t, x, constants)
    return 1j * chi * dt_cov - (chi * chi / (2.0 * m)) * (-lap_cov + nl.g_times_psi(s.psi))


def residual_scale(ff: FormFactor, constants: PhysicalConstants) -> float:
    """chi^2 / (2 m a^2), the natural size of each term of the residual per unit |psi|."""
    return constants.chi ** 2 / (2.0 * constants.m * ff.a ** 2)
