"""Lagrangian density, energy-momentum tensor, Lorentz force density and the local balance laws.

Index 0 is time. The tensor rows are normalised so that the balance laws read
d_t rho + div J = 0 and d_t P^j + d_i T^{ij} = f^j, i.e. with d_t rather than
d_0 = c^-1 d_t; the metric signature is (+, -, -, -).
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from corpuscle_lab.models.constants import PhysicalConstants
from corpuscle_lab.physics.corpuscle import (
    FieldProvider,
    FieldSample,
    covariant_terms,
    densities,
)
from corpuscle_lab.physics.fields import Potentials
from corpuscle_lab.physics.formfactor import Nonlinearity

logger = logging.getLogger(__name__)

# Fourth-order central first derivative
STENCIL_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
STENCIL_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0


@dataclass(frozen=True)
class EnMT:
    entries: NDArray
    u: NDArray
    p: NDArray


@dataclass(frozen=True)
class ForceDensity4:
    f0: NDArray
    f: NDArray


def _sample_at(field: FieldProvider | FieldSample, t: float, x: ArrayLike) -> FieldSample:
    return field if isinstance(field, FieldSample) else field.sample(t, x)


def _kinetic(grad_cov: NDArray) -> NDArray:
    return np.sum(np.abs(grad_cov) ** 2, axis=-1)


def lagrangian_density(
    sample: FieldSample,
    pot: Potentials,
    nl: Nonlinearity,
    t: float,
    x: ArrayLike,
    constants: PhysicalConstants,
) -> NDArray:
    """L = i(chi/2)[psi* D_t psi - psi (D_t psi)*] - (chi^2/2m)[|D psi|^2 + G(|psi|^2)]."""
    m, chi = constants.m, constants.chi
    dt_cov, grad_cov, _ = covariant_terms(sample, pot, t, x, constants)
    z = np.conj(sample.psi) * dt_cov
    value = 0.5j * chi * (z - np.conj(z)) - (chi * chi / (2.0 * m)) * (
        _kinetic(grad_cov) + nl.g(np.abs(sample.psi) ** 2)
    )
    return np.real(value)


def enmt_at_point(
    sample: FieldSample,
    pot: Potentials,
    nl: Nonlinearity,
    t: float,
    x: ArrayLike,
    constants: PhysicalConstants,
) -> EnMT:
    """Energy density u, momentum density p and the full tensor T^{mu nu}."""
    m, chi = constants.m, constants.chi
    dt_cov, grad_cov, _ = covariant_terms(sample, pot, t, x, constants)
    psi_bar = np.conj(sample.psi)
    density = np.abs(sample.psi) ** 2

    u = (chi * chi / (2.0 * m)) * (_kinetic(grad_cov) + nl.g(density))
    p = chi * np.imag(psi_bar[..., None] * grad_cov)
    # chi |psi|^2 dS/dt + q phi |psi|^2
    W = chi * np.imag(psi_bar * dt_cov)

    stress = (chi * chi / m) * np.real(grad_cov[..., :, None] * np.conj(grad_cov)[..., None, :])
    stress = stress - (u + W)[..., None, None] * np.eye(3)
    flux = -(chi * chi / m) * np.real(dt_cov[..., None] * np.conj(grad_cov))

    shape = np.shape(u)
    entries = np.zeros(shape + (4, 4))
    entries[..., 0, 0] = u
    entries[..., 0, 1:] = p
    entries[..., 1:, 0] = flux
    entries[..., 1:, 1:] = stress
    return EnMT(entries=entries, u=u, p=p)


def force_density(
    sample: FieldSample,
    pot: Potentials,
    t: float,
    x: ArrayLike,
    constants: PhysicalConstants,
) -> ForceDensity4:
    """f = rho E + (1/c) J x B and f0 = (1/c) J . E."""
    rho, J, _ = densities(sample, pot, t, x, constants)
    em = pot.fields(t, x)
    c = constants.c
    f = rho[..., None] * em.E + np.cross(J, em.B) / c
    f0 = np.sum(J * em.E, axis=-1) / c
    return ForceDensity4(f0=f0, f=f)


def structural_identity(
    sample: FieldSample,
    pot: Potentials,
    nl: Nonlinearity,
    t: float,
    x: ArrayLike,
    constants: PhysicalConstants,
) -> tuple[NDArray, NDArray]:
    """Gauge-derivative identity of L, summed termwise; returns (total, sum of |terms|)."""
    m, chi = constants.m, constants.chi
    dt_cov, grad_cov, _ = covariant_terms(sample, pot, t, x, constants)
    psi = sample.psi
    psi_bar = np.conj(psi)
    dt_bar = np.conj(dt_cov)
    grad_bar = np.conj(grad_cov)
    gprime = nl.gprime(np.where(np.abs(psi) > 0, np.abs(psi) ** 2, nl.s_max))
    k = chi * chi / (2.0 * m)

    dL_dpsi_t = 0.5j * chi * psi_bar
    dL_dpsibar_t = -0.5j * chi * psi
    dL_dpsi_j = -k * grad_bar
    dL_dpsibar_j = -k * grad_cov
    dL_dpsi = -0.5j * chi * dt_bar - k * gprime * psi_bar
    dL_dpsibar = 0.5j * chi * dt_cov - k * gprime * psi

    terms = [
        dL_dpsi_t * dt_cov,
        -dL_dpsibar_t * dt_bar,
        np.sum(dL_dpsi_j * grad_cov, axis=-1),
        -np.sum(dL_dpsibar_j * grad_bar, axis=-1),
        dL_dpsi * psi,
        -dL_dpsibar * psi_bar,
    ]
    total = sum(terms)
    magnitude = sum(np.abs(term) for term in terms)
    return total, magnitude


def _spatial_stencil(x: NDArray, h: float) -> NDArray:
    """Points x + k h e_i for k in (-2, -1, 1, 2), shaped (..., 3, 4, 3)."""
    return x[..., None, None, :] + h * STENCIL_OFFSETS[None, :, None] * np.eye(3)[:, None, :]


def continuity_residual(
    field: FieldProvider,
    pot: Potentials,
    t: float,
    x: ArrayLike,
    h: float,
    constants: PhysicalConstants | None = None,
) -> NDArray:
    """d_t rho + div J by fourth-order central differences of exactly evaluated rho and J."""
    constants = constants or field.constants
    x = np.asarray(x, dtype=float)
    rho_t = np.stack(
        [densities(field, pot, t + k * h, x, constants)[0] for k in STENCIL_OFFSETS], axis=-1
    )
    dt_rho = rho_t @ STENCIL_WEIGHTS / h
    stencil = _spatial_stencil(x, h)
    _, J, _ = densities(field, pot, t, stencil, constants)
    # J[..., i, k, j]: component j at the k-th offset along axis i
    div_J = np.einsum("...iki,k->...", J, STENCIL_WEIGHTS) / h
    return dt_rho + div_J


def momentum_residual(
    field: FieldProvider,
    pot: Potentials,
    nl: Nonlinearity,
    t: float,
    x: ArrayLike,
    h: float,
    constants: PhysicalConstants | None = None,
) -> NDArray:
    """d_t P^j + d_i T^{ij} - f^j by fourth-order central differences; f is evaluated exactly."""
    constants = constants or field.constants
    x = np.asarray(x, dtype=float)
    P_t = np.stack(
        [densities(field, pot, t + k * h, x, constants)[2] for k in STENCIL_OFFSETS], axis=-1
    )
    dt_P = P_t @ STENCIL_WEIGHTS / h
    stencil = _spatial_stencil(x, h)
    tensor = enmt_at_point(field.sample(t, stencil), pot, nl, t, stencil, constants).entries[..., 1:, 1:]
    # tensor[..., i, k, a, b] = T^{ab} at the k-th offset along axis i; need sum_i d_i T^{ij}
    div_T = np.einsum("...ikij,k->...j", tensor, STENCIL_WEIGHTS) / h
    force = force_density(field.sample(t, x), pot, t, x, constants).f
    return dt_P + div_T - force


@dataclass(frozen=True)
class SweepRow:
    t: float
    x: NDArray
    u: float
    p: NDArray
    continuity: float
    momentum: NDArray


def residual_sweep(
    field: FieldProvider,
    pot: Potentials,
    nl: Nonlinearity,
    points: Sequence[tuple[float, ArrayLike]],
    h: float,
    constants: PhysicalConstants | None = None,
    threads: int | None = None,
) -> list[SweepRow]:
    """Continuity and momentum residuals over (t, x) points, in input order."""
    constants = constants or field.constants

    def evaluate(point: tuple[float, ArrayLike]) -> SweepRow:
        t, x = point
        x = np.asarray(x, dtype=float)
        tensor = enmt_at_point(field.sample(t, x), pot, nl, t, x, constants)
        return SweepRow(
            t=float(t),
            x=x,
            u=float(tensor.u),
            p=np.asarray(tensor.p),
            continuity=float(continuity_residual(field, pot, t, x, h, constants)),
            momentum=np.asarray(momentum_residual(field, pot, nl, t, x, h, constants)),
        )

    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(evaluate, points))
    logger.debug("Residual sweep over %d points with h=%g", len(rows), h)
    return rows
