"""Quadrature on spheres, balls and time grids."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import cumulative_simpson, simpson

from corpuscle_lab.errors import ConfigError, NumericalError
from corpuscle_lab.physics.dynamics import Trajectory

logger = logging.getLogger(__name__)

VALIDATION_TOL = 1e-12


@dataclass(frozen=True)
class SphereQuadrature:
    """Gauss-Legendre in cos(polar angle) times a uniform azimuthal rule on the unit sphere."""

    n_polar: int = 24
    n_azimuth: int = 48

    def __post_init__(self):
        if self.n_polar < 2 or self.n_azimuth < 3:
            raise ConfigError(f"Sphere rule needs n_polar >= 2 and n_azimuth >= 3, got {self.n_polar}x{self.n_azimuth}")

    @cached_property
    def _rule(self) -> tuple[NDArray, NDArray]:
        mu, w_mu = np.polynomial.legendre.leggauss(self.n_polar)
        angle = 2.0 * math.pi * (np.arange(self.n_azimuth) + 0.5) / self.n_azimuth
        sin_polar = np.sqrt(1.0 - mu * mu)
        normals = np.stack([
            np.outer(sin_polar, np.cos(angle)),
            np.outer(sin_polar, np.sin(angle)),
            np.outer(mu, np.ones_like(angle)),
        ], axis=-1).reshape(-1, 3)
        weights = np.outer(w_mu, np.full(self.n_azimuth, 2.0 * math.pi / self.n_azimuth)).reshape(-1)
        return normals, weights

    @property
    def normals(self) -> NDArray:
        return self._rule[0]

    @property
    def weights(self) -> NDArray:
        return self._rule[1]

    def refined(self, extra: int = 8) -> "SphereQuadrature":
        return SphereQuadrature(self.n_polar + extra, self.n_azimuth + extra)

    def validate(self) -> None:
        """Compare with exact moments of the unit sphere."""
        n = self.normals
        checks = {
            "1": (np.ones(len(n)), 4.0 * math.pi),
            "y1^2": (n[:, 0] ** 2, 4.0 * math.pi / 3.0),
            "y1^2 y2^2": (n[:, 0] ** 2 * n[:, 1] ** 2, 4.0 * math.pi / 15.0),
            "y1^4": (n[:, 0] ** 4, 4.0 * math.pi / 5.0),
            "y3": (n[:, 2], 0.0),
        }
        for name, (values, exact) in checks.items():
            got = float(values @ self.weights)
            if abs(got - exact) > VALIDATION_TOL * max(1.0, abs(exact)):
                raise NumericalError({
                    "message": "Sphere quadrature failed its moment check",
                    "moment": name,
                    "value": got,
                    "exact": exact,
                })


def radial_edges(a: float, R: float) -> NDArray:
    """Panel edges: unit width in a up to 8a, then doubling up to R."""
    if not (a > 0 and R > 0):
        raise ConfigError(f"Radial panels need a > 0 and R > 0, got a={a}, R={R}")
    edges = [0.0]
    while edges[-1] + a <= min(8.0 * a, R) * (1.0 + 1e-12):
        edges.append(edges[-1] + a)
    while edges[-1] < R * (1.0 - 1e-12):
        edges.append(min(2.0 * edges[-1] if edges[-1] > 0 else R, R))
    edges[-1] = R
    return np.asarray(edges)


@dataclass(frozen=True)
class BallQuadrature:
    """Radial Gauss-Legendre panels times a sphere rule, for the ball of radius R about the origin."""

    a: float
    R: float
    sphere: SphereQuadrature = SphereQuadrature()
    radial_nodes: int = 10

    @cached_property
    def _radial(self) -> tuple[NDArray, NDArray]:
        xi, w = np.polynomial.legendre.leggauss(self.radial_nodes)
        edges = radial_edges(self.a, self.R)
        lo, hi = edges[:-1, None], edges[1:, None]
        radii = (0.5 * (hi - lo) * xi + 0.5 * (hi + lo)).reshape(-1)
        weights = (0.5 * (hi - lo) * w).reshape(-1)
        return radii, weights

    @cached_property
    def _rule(self) -> tuple[NDArray, NDArray]:
        radii, w_r = self._radial
        offsets = (radii[:, None, None] * self.sphere.normals[None, :, :]).reshape(-1, 3)
        weights = np.outer(w_r * radii * radii, self.sphere.weights).reshape(-1)
        return offsets, weights

    @property
    def offsets(self) -> NDArray:
        return self._rule[0]

    @property
    def weights(self) -> NDArray:
        return self._rule[1]

    @property
    def size(self) -> int:
        return len(self.weights)

    def refined(self, extra_radial: int = 4, extra_sphere: int = 8) -> "BallQuadrature":
        return BallQuadrature(self.a, self.R, self.sphere.refined(extra_sphere), self.radial_nodes + extra_radial)

    def validate(self) -> None:
        exact = 4.0 * math.pi * self.R ** 3 / 3.0
        got = float(np.sum(self.weights))
        if abs(got - exact) > VALIDATION_TOL * exact:
            raise NumericalError({
                "message": "Ball quadrature failed its volume check",
                "value": got,
                "exact": exact,
                "R": self.R,
            })


@dataclass(frozen=True)
class TimeGrid:
    """Sample times with Simpson weights for definite and running integrals."""

    times: NDArray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 1 or np.any(np.diff(times) <= 0):
            raise ConfigError("Time grid must be a non-empty increasing sequence")
        object.__setattr__(self, "times", times)

    @classmethod
    def from_trajectory(cls, traj: Trajectory, samples: int) -> "TimeGrid":
        return cls(traj.times[traj.node_indices(samples)])

    @classmethod
    def uniform(cls, t0: float, t1: float, samples: int) -> "TimeGrid":
        if t1 == t0:
            return cls(np.array([float(t0)]))
        return cls(np.linspace(t0, t1, samples))

    def integral(self, values: ArrayLike) -> NDArray:
        values = np.asarray(values, dtype=float)
        if self.times.size == 1:
            return np.zeros(values.shape[1:])
        return simpson(values, x=self.times, axis=0)

    def running(self, values: ArrayLike) -> NDArray:
        """int_{t0}^{t_k} at every grid time, starting from 0."""
        values = np.asarray(values, dtype=float)
        if self.times.size == 1:
            return np.zeros_like(values)
        return cumulative_simpson(values, x=self.times, axis=0, initial=0.0)
