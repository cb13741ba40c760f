"""Radial ground states, their a-scaling, charge normalization and the nonlinearity they determine."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import IntegrationWarning, quad
from scipy.special import erfc, xlogy

from corpuscle_lab.errors import ConfigError, NumericalError

logger = logging.getLogger(__name__)

RadialFn = Callable[[NDArray], NDArray]

GAUSSIAN_C = math.pi ** -0.75
SECH_C = math.sqrt(3.0 / math.pi ** 3)

BISECTION_TOL = 1e-14
BISECTION_MAX_ITER = 200
G_ABS_TOL = 1e-12


@dataclass(frozen=True)
class RadialProfile:
    name: str
    value: RadialFn
    d1: RadialFn
    d2: RadialFn
    gprime_closed: RadialFn | None = None
    g_closed: RadialFn | None = None
    params: Mapping[str, float] = field(default_factory=dict)

    def laplacian(self, theta: ArrayLike) -> NDArray:
        """Radial Laplacian psi'' + 2 psi'/theta, with the limit 3 psi''(0) at the center."""
        theta = np.asarray(theta, dtype=float)
        d1 = self.d1(theta)
        d2 = self.d2(theta)
        near = theta <= 1e-8
        safe = np.where(near, 1.0, theta)
        return np.where(near, 3.0 * d2, d2 + 2.0 * d1 / safe)

    def scaled(self, factor: float) -> "RadialProfile":
        """Profile multiplied by a constant factor (closed forms are dropped)."""
        return RadialProfile(
            name=f"{self.name}*{factor:g}",
            value=lambda th: factor * self.value(th),
            d1=lambda th: factor * self.d1(th),
            d2=lambda th: factor * self.d2(th),
            params={**self.params, "factor": factor},
        )


def gaussian_profile() -> RadialProfile:
    """C exp(-theta^2/2) with C = pi^(-3/4), normalized to unit charge."""

    def value(theta):
        theta = np.asarray(theta, dtype=float)
        return GAUSSIAN_C * np.exp(-0.5 * theta * theta)

    def d1(theta):
        theta = np.asarray(theta, dtype=float)
        return -theta * value(theta)

    def d2(theta):
        theta = np.asarray(theta, dtype=float)
        return (theta * theta - 1.0) * value(theta)

    def gprime(s):
        with np.errstate(divide="ignore"):
            return -np.log(np.asarray(s, dtype=float) / GAUSSIAN_C ** 2) - 3.0

    def g(s):
        s = np.asarray(s, dtype=float)
        return -xlogy(s, s) + s * (-1.5 * math.log(math.pi) - 2.0)

    return RadialProfile("gaussian", value, d1, d2, gprime, g)


def _sech(theta: NDArray) -> NDArray:
    e = np.exp(-np.abs(theta))
    return 2.0 * e / (1.0 + e * e)


def sech_profile() -> RadialProfile:
    """C sech(theta) with C^2 = 3/pi^3, normalized to unit charge."""

    def value(theta):
        return SECH_C * _sech(np.asarray(theta, dtype=float))

    def d1(theta):
        theta = np.asarray(theta, dtype=float)
        return -SECH_C * _sech(theta) * np.tanh(theta)

    def d2(theta):
        theta = np.asarray(theta, dtype=float)
        sech = _sech(theta)
        tanh = np.tanh(theta)
        return SECH_C * sech * (tanh * tanh - sech * sech)

    def gprime(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.clip(np.sqrt(s) / SECH_C, 0.0, 1.0)
            theta = np.arccosh(1.0 / ratio)
            tanh = np.tanh(theta)
            small = theta < 1e-6
            tanh_over = np.where(small, 1.0 - theta * theta / 3.0, tanh / np.where(small, 1.0, theta))
            return tanh * tanh - ratio * ratio - 2.0 * tanh_over

    return RadialProfile("sech", value, d1, d2, gprime, None)


def algebraic_profile(p: float) -> RadialProfile:
    """(1 + theta^2)^(-p), unnormalized; used for decay and divergence checks."""
    if p <= 0:
        raise ConfigError(f"Algebraic profile exponent must be positive, got {p}")

    def value(theta):
        theta = np.asarray(theta, dtype=float)
        return (1.0 + theta * theta) ** (-p)

    def d1(theta):
        theta = np.asarray(theta, dtype=float)
        return -2.0 * p * theta * (1.0 + theta * theta) ** (-p - 1.0)

    def d2(theta):
        theta = np.asarray(theta, dtype=float)
        base = 1.0 + theta * theta
        return -2.0 * p * base ** (-p - 1.0) + 4.0 * p * (p + 1.0) * theta * theta * base ** (-p - 2.0)

    return RadialProfile(f"algebraic(p={p:g})", value, d1, d2, params={"p": p})


@dataclass(frozen=True)
class FormFactor:
    profile: RadialProfile
    a: float
    lam: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigError(f"Size parameter a must be positive, got {self.a}")

    def value(self, r: ArrayLike) -> NDArray:
        return self.a ** -1.5 * self.profile.value(np.asarray(r, dtype=float) / self.a)

    def d1(self, r: ArrayLike) -> NDArray:
        return self.a ** -2.5 * self.profile.d1(np.asarray(r, dtype=float) / self.a)

    def d2(self, r: ArrayLike) -> NDArray:
        return self.a ** -3.5 * self.profile.d2(np.asarray(r, dtype=float) / self.a)

    def laplacian(self, r: ArrayLike) -> NDArray:
        return self.a ** -3.5 * self.profile.laplacian(np.asarray(r, dtype=float) / self.a)

    def with_size(self, a: float) -> "FormFactor":
        return replace(self, a=a)


@dataclass(frozen=True)
class Nonlinearity:
    """G'(s) and its antiderivative G(s), with a constant extension of G' above s_max."""

    gprime: RadialFn
    g: RadialFn
    s_max: float
    extension_value: float
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def shifted(self, lam: float) -> "Nonlinearity":
        """G' + lam, the nonlinearity of the eigenvalue form of the ground-state equation."""
        return Nonlinearity(
            gprime=lambda s: self.gprime(s) + lam,
            g=lambda s: self.g(s) + lam * np.asarray(s, dtype=float),
            s_max=self.s_max,
            extension_value=self.extension_value + lam,
            metadata={**self.metadata, "shift": lam},
        )

    def negated(self) -> "Nonlinearity":
        return Nonlinearity(
            gprime=lambda s: -self.gprime(s),
            g=lambda s: -self.g(s),
            s_max=self.s_max,
            extension_value=-self.extension_value,
            metadata={**self.metadata, "negated": True},
        )

    def g_times_psi(self, psi: ArrayLike) -> NDArray:
        """G'(|psi|^2) psi, continued by 0 at psi = 0."""
        psi = np.asarray(psi)
        s = np.abs(psi) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.gprime(np.where(s > 0, s, self.s_max)) * psi
        return np.where(s > 0, out, 0.0)


def _inverse_radius(profile: RadialProfile, s: NDArray, r_max: float) -> NDArray:
    """Solve profile(r)^2 = s for r >= 0 by bisection."""
    lo = np.zeros_like(s)
    hi = np.full_like(s, r_max)
    for _ in range(64):
        beyond = profile.value(hi) ** 2 > s
        if not beyond.any():
            break
        hi = np.where(beyond, 2.0 * hi, hi)
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        inside = profile.value(mid) ** 2 > s
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
        if np.max(hi - lo, initial=0.0) <= BISECTION_TOL:
            break
    return 0.5 * (lo + hi)


def reconstruct_nonlinearity(profile: RadialProfile, r_max: float = 12.0, n_samples: int = 512) -> Nonlinearity:
    """Determine G' from the profile through laplacian(psi) = G'(psi^2) psi."""
    theta = np.linspace(0.0, r_max, n_samples + 1)[1:]
    slope = profile.d1(theta)
    values = profile.value(theta)
    if np.any(slope > 0) or np.any(values < 0):
        bad = float(theta[np.argmax((slope > 0) | (values < 0))])
        raise NumericalError({"message": "Profile is not positive and monotone decreasing", "theta": bad})

    s_max = float(profile.value(0.0) ** 2)
    extension_value = float(profile.laplacian(0.0) / profile.value(0.0))

    def base_gprime(s: NDArray) -> NDArray:
        radius = _inverse_radius(profile, s, r_max)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = profile.laplacian(radius) / profile.value(radius)
        return np.where(np.isfinite(ratio), ratio, np.inf)

    def gprime(s: ArrayLike) -> NDArray:
        s = np.asarray(s, dtype=float)
        flat = s.reshape(-1)
        out = np.full(flat.shape, extension_value)
        inside = flat < s_max
        if inside.any():
            out[inside] = base_gprime(flat[inside])
        return out.reshape(s.shape)

    if profile.g_closed is not None:
        g_inside = profile.g_closed
        g_source = "closed-form"
    else:

        def g_scalar(s: float) -> float:
            if s <= 0.0:
                return 0.0
            return quad(lambda u: float(gprime(u)), 0.0, s, epsabs=G_ABS_TOL, limit=200)[0]

        g_inside = np.vectorize(g_scalar, otypes=[float])
        g_source = "quadrature"
    g_top = float(g_inside(s_max))

    def g(s: ArrayLike) -> NDArray:
        s = np.asarray(s, dtype=float)
        above = s > s_max
        return np.where(above, g_top + extension_value * (s - s_max), g_inside(np.minimum(s, s_max)))

    logger.debug("Reconstructed nonlinearity for %s: s_max=%g, G'(s_max)=%g", profile.name, s_max, extension_value)
    return Nonlinearity(
        gprime=gprime,
        g=g,
        s_max=s_max,
        extension_value=extension_value,
        metadata={
            "profile": profile.name,
            "source": "reconstructed",
            "antiderivative": g_source,
            "extension": "constant",
            "r_max": r_max,
        },
    )


def scaled_nonlinearity(base: Nonlinearity, a: float) -> Nonlinearity:
    """G_a'(s) = a^-2 G'(a^3 s) and G_a(s) = a^-5 G(a^3 s)."""
    if not a > 0:
        raise ConfigError(f"Size parameter a must be positive, got {a}")
    a3 = a ** 3
    return Nonlinearity(
        gprime=lambda s: base.gprime(a3 * np.asarray(s, dtype=float)) / (a * a),
        g=lambda s: base.g(a3 * np.asarray(s, dtype=float)) / a ** 5,
        s_max=base.s_max / a3,
        extension_value=base.extension_value / (a * a),
        metadata={**base.metadata, "a": a},
    )


def charge_norm(ff: FormFactor, theta_cut: float = 40.0) -> float:
    """Total charge 4 pi int psi_a(r)^2 r^2 dr; rejects profiles whose tail does not converge."""
    a = ff.a

    def integrand(r: float) -> float:
        return 4.0 * math.pi * float(ff.value(r)) ** 2 * r * r

    cut = a * theta_cut
    breaks = [a * k for k in (0.5, 1.0, 2.0, 4.0, 8.0, 16.0) if a * k < cut]
    main = quad(integrand, 0.0, cut, points=breaks, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        tail, tail_err = quad(integrand, cut, np.inf, limit=400)
    diverging = any(issubclass(w.category, IntegrationWarning) for w in caught)
    if diverging or not np.isfinite(tail) or tail > 1e-8 * max(main, 1e-300):
        raise NumericalError({
            "message": f"Charge norm of profile {ff.profile.name} has a non-negligible tail",
            "main": main,
            "tail_bound": float(tail) + float(tail_err),
            "theta_cut": theta_cut,
        })
    return main + tail


@dataclass(frozen=True)
class DecayReport:
    sup_value: float
    sup_derivative: float
    value_tail_slope: float
    derivative_tail_slope: float
    passed: bool

    @property
    def value_ok(self) -> bool:
        return math.isfinite(self.sup_value) and self.value_tail_slope <= TAIL_SLOPE_LIMIT

    @property
    def derivative_ok(self) -> bool:
        return math.isfinite(self.sup_derivative) and self.derivative_tail_slope <= TAIL_SLOPE_LIMIT


TAIL_SLOPE_LIMIT = 0.05


def _tail_slope(theta: NDArray, weighted: NDArray) -> float:
    keep = weighted > 0
    if keep.sum() < 2:
        return -math.inf
    return float(np.polyfit(np.log(theta[keep]), np.log(weighted[keep]), 1)[0])


def decay_check(profile: RadialProfile, theta_grid: Sequence[float]) -> DecayReport:
    """Sup of theta^2 |psi| and theta^3 |psi'| and whether both stop growing in the tail."""
    theta = np.asarray(theta_grid, dtype=float)
    if theta.ndim != 1 or theta.size < 8 or np.any(np.diff(theta) <= 0) or theta[-1] < 20:
        raise ConfigError("decay_check needs an increasing grid of at least 8 points reaching theta >= 20")
    w_value = theta ** 2 * np.abs(profile.value(theta))
    w_deriv = theta ** 3 * np.abs(profile.d1(theta))
    tail = slice(theta.size - max(theta.size // 4, 2), theta.size)
    value_slope = _tail_slope(theta[tail], w_value[tail])
    deriv_slope = _tail_slope(theta[tail], w_deriv[tail])
    sup_value = float(np.max(w_value))
    sup_deriv = float(np.max(w_deriv))
    passed = (
        math.isfinite(sup_value)
        and math.isfinite(sup_deriv)
        and value_slope <= TAIL_SLOPE_LIMIT
        and deriv_slope <= TAIL_SLOPE_LIMIT
    )
    return DecayReport(sup_value, sup_deriv, value_slope, deriv_slope, passed)


def surface_charge(ff: FormFactor, R: float) -> float:
    """Integral of psi_a^2 over the sphere |y| = R: 4 pi a R^-2 theta^4 psi_1(theta)^2."""
    theta = R / ff.a
    return float(4.0 * math.pi * ff.a * R ** -2 * theta ** 4 * ff.profile.value(theta) ** 2)


def surface_gradient(ff: FormFactor, R: float) -> float:
    """Integral of |grad psi_a|^2 over the sphere |y| = R: 4 pi a R^-4 theta^6 psi_1'(theta)^2."""
    theta = R / ff.a
    return float(4.0 * math.pi * ff.a * R ** -4 * theta ** 6 * ff.profile.d1(theta) ** 2)


def tail_mass(ff: FormFactor, R: float) -> float:
    """Charge (per unit q) outside the ball of radius R."""
    theta = R / ff.a
    if ff.profile.name == "gaussian":
        return float(2.0 / math.sqrt(math.pi) * theta * math.exp(-theta * theta) + erfc(theta))
    return quad(lambda s: 4.0 * math.pi * float(ff.profile.value(s)) ** 2 * s * s, theta, np.inf, limit=200)[0]


def ball_charge_fraction(ff: FormFactor, R: float, total: float = 1.0) -> float:
    return total - tail_mass(ff, R)
