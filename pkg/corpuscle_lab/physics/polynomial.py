"""Polynomial fields in three space variables with polynomial time coefficients.

A field is a finite sum  sum_alpha c_alpha(tau) * y**alpha  where

    y   = x - origin - velocity * (t - t_ref)
    tau = t - t_ref

so a field may be expanded about a point that moves with constant velocity.
Spatial derivatives and the time derivative at fixed x stay inside the family,
which keeps every field, splitting and balance evaluation exact.

Coefficients are plain Python numbers; ints and Fractions stay exact under
the algebra, floats behave as floats.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import factorial
from numbers import Number
from typing import Any, Iterator, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from corpuscle_lab.errors import ConfigError

Monomial = tuple[int, int, int]
Coefficients = tuple[Any, ...]
Vector3 = tuple[float, float, float]
Frame = tuple[Vector3, Vector3, float]

MAX_SCALAR_DEGREE = 4
MAX_VECTOR_DEGREE = 3
MAX_TIME_DEGREE = 3

ZERO3: Vector3 = (0.0, 0.0, 0.0)
DEFAULT_FRAME: Frame = (ZERO3, ZERO3, 0.0)


def _number(value: Any) -> Any:
    if isinstance(value, bool):
        raise ConfigError(f"Invalid coefficient {value!r}")
    if isinstance(value, (Fraction, int)):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError as exc:
            raise ConfigError(f"Invalid coefficient {value!r}") from exc
    return float(value)


def _vec3(values: Sequence[float]) -> Vector3:
    values = tuple(float(v) for v in np.asarray(values, dtype=float).reshape(-1))
    if len(values) != 3:
        raise ValueError(f"Expected a 3-vector, got {len(values)} components")
    return values  # type: ignore[return-value]


def _trim(coeffs: Sequence[Any]) -> Coefficients:
    coeffs = list(coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


def _add(a: Coefficients, b: Coefficients) -> Coefficients:
    n = max(len(a), len(b))
    return _trim([(a[k] if k < len(a) else 0) + (b[k] if k < len(b) else 0) for k in range(n)])


def _scale(a: Coefficients, k: Any) -> Coefficients:
    return _trim([c * k for c in a])


def _convolve(a: Coefficients, b: Coefficients) -> Coefficients:
    if not a or not b:
        return ()
    out: list[Any] = [0] * (len(a) + len(b) - 1)
    for i, ca in enumerate(a):
        for j, cb in enumerate(b):
            out[i + j] = out[i + j] + ca * cb
    out_t = _trim(out)
    if len(out_t) - 1 > MAX_TIME_DEGREE:
        raise ConfigError(f"Time degree {len(out_t) - 1} exceeds the cap {MAX_TIME_DEGREE}")
    return out_t


def _rate(a: Coefficients) -> Coefficients:
    return _trim([k * a[k] for k in range(1, len(a))])


def _at(a: Coefficients, tau: float) -> float:
    value = 0.0
    for c in reversed(a):
        value = value * tau + float(c)
    return value


def _at_exact(a: Coefficients, tau: float) -> Any:
    if tau == 0.0 or len(a) <= 1:
        return a[0] if a else 0
    return _at(a, tau)


def multi_indices(max_degree: int) -> Iterator[Monomial]:
    """All (i, j, k) with i + j + k <= max_degree, lowest total degree first."""
    for total in range(max_degree + 1):
        for i in range(total, -1, -1):
            for j in range(total - i, -1, -1):
                yield (i, j, total - i - j)


def _powers(y: NDArray, degree: int) -> list[list[NDArray]]:
    table = []
    for axis in range(3):
        column = [np.ones(y.shape[:-1])]
        for _ in range(degree):
            column.append(column[-1] * y[..., axis])
        table.append(column)
    return table


def _same_frame(a: Frame, b: Frame) -> bool:
    return a[0] == b[0] and a[1] == b[1] and a[2] == b[2]


def common_frame(*fields: "PolyScalarField") -> Frame:
    """Frame shared by the non-zero fields; zero fields adapt to any frame."""
    frame: Frame | None = None
    for f in fields:
        if f.is_zero:
            continue
        if frame is None:
            frame = f.frame
        elif not _same_frame(frame, f.frame):
            raise ValueError("Fields are expanded in different frames")
    return frame if frame is not None else fields[0].frame


@dataclass(frozen=True, eq=False)
class PolyScalarField:
    terms: Mapping[Monomial, Coefficients] = field(default_factory=dict)
    origin: Vector3 = ZERO3
    velocity: Vector3 = ZERO3
    t_ref: float = 0.0

    def __post_init__(self):
        clean: dict[Monomial, Coefficients] = {}
        for deg, coeffs in dict(self.terms).items():
            deg = tuple(int(d) for d in deg)
            if len(deg) != 3 or min(deg) < 0:
                raise ConfigError(f"Invalid multi-degree {deg}")
            if sum(deg) > MAX_SCALAR_DEGREE:
                raise ConfigError(
                    f"Spatial degree {sum(deg)} of monomial {deg} exceeds the cap {MAX_SCALAR_DEGREE}"
                )
            if isinstance(coeffs, (Number, str)):
                coeffs = (coeffs,)
            coeffs = _trim([_number(c) for c in coeffs])
            if len(coeffs) - 1 > MAX_TIME_DEGREE:
                raise ConfigError(f"Time degree {len(coeffs) - 1} exceeds the cap {MAX_TIME_DEGREE}")
            merged = _add(clean.get(deg, ()), coeffs)
            if merged:
                clean[deg] = merged
            else:
                clean.pop(deg, None)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "origin", _vec3(self.origin))
        object.__setattr__(self, "velocity", _vec3(self.velocity))
        object.__setattr__(self, "t_ref", float(self.t_ref))

    # Construction

    @classmethod
    def in_frame(cls, terms: Mapping[Monomial, Coefficients], frame: Frame) -> "PolyScalarField":
        return cls(terms, frame[0], frame[1], frame[2])

    @classmethod
    def zero(cls, frame: Frame = DEFAULT_FRAME) -> "PolyScalarField":
        return cls.in_frame({}, frame)

    @classmethod
    def constant(cls, value: Any, frame: Frame = DEFAULT_FRAME) -> "PolyScalarField":
        return cls.in_frame({(0, 0, 0): (value,)}, frame)

    @classmethod
    def coordinate(cls, axis: int, frame: Frame = DEFAULT_FRAME) -> "PolyScalarField":
        deg = [0, 0, 0]
        deg[axis] = 1
        return cls.in_frame({tuple(deg): (1,)}, frame)

    @classmethod
    def from_jets(cls, value: "PolyScalarField", rate: "PolyScalarField", frame: Frame) -> "PolyScalarField":
        """Field equal to value + tau * rate, both given with time-independent coefficients."""
        terms: dict[Monomial, Coefficients] = {}
        for deg in set(value.terms) | set(rate.terms):
            v = value.terms.get(deg, (0,))
            r = rate.terms.get(deg, (0,))
            terms[deg] = (v[0], r[0])
        return cls.in_frame(terms, frame)

    def _like(self, terms: Mapping[Monomial, Coefficients]) -> "PolyScalarField":
        return PolyScalarField.in_frame(terms, self.frame)

    # Structure

    @property
    def frame(self) -> Frame:
        return (self.origin, self.velocity, self.t_ref)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(deg) for deg in self.terms), default=-1)

    @property
    def time_degree(self) -> int:
        return max((len(c) - 1 for c in self.terms.values()), default=-1)

    def is_homogeneous(self, degree: int) -> bool:
        return all(sum(deg) == degree for deg in self.terms)

    def homogeneous(self, degree: int) -> "PolyScalarField":
        return self._like({d: c for d, c in self.terms.items() if sum(d) == degree})

    def truncate(self, max_degree: int) -> "PolyScalarField":
        return self._like({d: c for d, c in self.terms.items() if sum(d) <= max_degree})

    def coefficient(self, deg: Monomial, power: int = 0) -> Any:
        coeffs = self.terms.get(tuple(deg), ())
        return coeffs[power] if power < len(coeffs) else 0

    # Evaluation

    def local(self, t: float, x: ArrayLike) -> tuple[NDArray, float]:
        tau = float(t) - self.t_ref
        x = np.asarray(x, dtype=float)
        y = x - np.asarray(self.origin) - np.asarray(self.velocity) * tau
        return y, tau

    def __call__(self, t: float, x: ArrayLike) -> NDArray:
        y, tau = self.local(t, x)
        out = np.zeros(y.shape[:-1])
        if not self.terms:
            return out
        powers = _powers(y, self.degree)
        for (i, j, k), coeffs in self.terms.items():
            out = out + _at(coeffs, tau) * (powers[0][i] * powers[1][j] * powers[2][k])
        return out

    # Calculus

    def partial(self, axis: int) -> "PolyScalarField":
        return self._partials[axis]

    @cached_property
    def _partials(self) -> tuple["PolyScalarField", "PolyScalarField", "PolyScalarField"]:
        out = []
        for axis in range(3):
            terms = {}
            for deg, coeffs in self.terms.items():
                if deg[axis] == 0:
                    continue
                lowered = list(deg)
                lowered[axis] -= 1
                terms[tuple(lowered)] = _scale(coeffs, deg[axis])
            out.append(self._like(terms))
        return tuple(out)  # type: ignore[return-value]

    def gradient(self) -> "PolyVectorField":
        return PolyVectorField(self._partials)

    def laplacian(self) -> "PolyScalarField":
        return sum((self.partial(a).partial(a) for a in range(3)), PolyScalarField.zero(self.frame))

    def coefficient_rate(self) -> "PolyScalarField":
        """d/dtau of the coefficients, i.e. the time derivative at fixed y."""
        return self._like({d: _rate(c) for d, c in self.terms.items()})

    def directional(self, w: Sequence[float]) -> "PolyScalarField":
        """(w . grad) of the field for a constant vector w."""
        out = PolyScalarField.zero(self.frame)
        for axis, wa in enumerate(_vec3(w)):
            if wa != 0.0:
                out = out + self.partial(axis).scale(wa)
        return out

    def dt(self) -> "PolyScalarField":
        """Time derivative at fixed x."""
        return self.coefficient_rate() - self.directional(self.velocity)

    def taylor(self, t: float, center: Sequence[float]) -> "PolyScalarField":
        """Exact re-expansion about `center`, frozen at time t."""
        center = _vec3(center)
        cache: dict[Monomial, PolyScalarField] = {(0, 0, 0): self}
        terms: dict[Monomial, Coefficients] = {}
        for deg in multi_indices(max(self.degree, 0)):
            if deg not in cache:
                axis = next(a for a in range(3) if deg[a] > 0)
                parent = list(deg)
                parent[axis] -= 1
                cache[deg] = cache[tuple(parent)].partial(axis)
            value = float(cache[deg](t, center))
            if value != 0.0:
                scale = factorial(deg[0]) * factorial(deg[1]) * factorial(deg[2])
                terms[deg] = (value / scale,)
        return PolyScalarField(terms, center, ZERO3, float(t))

    def coefficients_at(self, t: float) -> "PolyScalarField":
        """Same field with the coefficients frozen at time t."""
        tau = float(t) - self.t_ref
        origin = tuple(o + w * tau for o, w in zip(self.origin, self.velocity))
        terms = {d: (_at_exact(c, tau),) for d, c in self.terms.items()}
        return PolyScalarField(terms, origin, self.velocity, float(t))

    # Algebra

    def scale(self, k: Any) -> "PolyScalarField":
        if k == 0:
            return PolyScalarField.zero(self.frame)
        return self._like({d: _scale(c, k) for d, c in self.terms.items()})

    def times_coordinate(self, axis: int) -> "PolyScalarField":
        terms = {}
        for deg, coeffs in self.terms.items():
            raised = list(deg)
            raised[axis] += 1
            terms[tuple(raised)] = coeffs
        return self._like(terms)

    def __add__(self, other: Any) -> "PolyScalarField":
        if isinstance(other, Number):
            other = PolyScalarField.constant(other, self.frame)
        if not isinstance(other, PolyScalarField):
            return NotImplemented
        frame = common_frame(self, other)
        terms = dict(self.terms)
        for deg, coeffs in other.terms.items():
            terms[deg] = _add(terms.get(deg, ()), coeffs)
        return PolyScalarField.in_frame(terms, frame)

    __radd__ = __add__

    def __neg__(self) -> "PolyScalarField":
        return self.scale(-1)

    def __sub__(self, other: Any) -> "PolyScalarField":
        if isinstance(other, Number):
            return self + (-other)
        if not isinstance(other, PolyScalarField):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: Any) -> "PolyScalarField":
        return (-self) + other

    def __mul__(self, other: Any) -> "PolyScalarField":
        if isinstance(other, Number):
            return self.scale(other)
        if not isinstance(other, PolyScalarField):
            return NotImplemented
        frame = common_frame(self, other)
        terms: dict[Monomial, Coefficients] = {}
        for da, ca in self.terms.items():
            for db, cb in other.terms.items():
                deg = (da[0] + db[0], da[1] + db[1], da[2] + db[2])
                terms[deg] = _add(terms.get(deg, ()), _convolve(ca, cb))
        return PolyScalarField.in_frame(terms, frame)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolyScalarField):
            return NotImplemented
        if self.is_zero and other.is_zero:
            return True
        return _same_frame(self.frame, other.frame) and self.terms == other.terms

    __hash__ = None  # type: ignore[assignment]

    # Serialization

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "terms": [
                {"deg": list(deg), "t_coeffs": [_json_number(c) for c in coeffs]}
                for deg, coeffs in sorted(self.terms.items())
            ],
            "origin": list(self.origin),
        }
        if any(self.velocity):
            doc["velocity"] = list(self.velocity)
        if self.t_ref:
            doc["t_ref"] = self.t_ref
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "PolyScalarField":
        try:
            terms: dict[Monomial, Coefficients] = {}
            for term in doc.get("terms", []):
                deg = tuple(term["deg"])
                coeffs = tuple(_number(c) for c in term.get("t_coeffs", ()))
                terms[deg] = _add(terms.get(deg, ()), coeffs)
            return cls(
                terms,
                doc.get("origin", ZERO3),
                doc.get("velocity", ZERO3),
                doc.get("t_ref", 0.0),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"Malformed polynomial field document: {exc}") from exc


def _json_number(value: Any) -> Any:
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    return value


@dataclass(frozen=True, eq=False)
class PolyVectorField:
    components: tuple[PolyScalarField, PolyScalarField, PolyScalarField]

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != 3:
            raise ValueError(f"A vector field needs 3 components, got {len(comps)}")
        frame = common_frame(*comps)
        comps = tuple(c if not c.is_zero else PolyScalarField.zero(frame) for c in comps)
        object.__setattr__(self, "components", comps)

    @classmethod
    def zero(cls, frame: Frame = DEFAULT_FRAME) -> "PolyVectorField":
        return cls(tuple(PolyScalarField.zero(frame) for _ in range(3)))  # type: ignore[arg-type]

    @classmethod
    def constant(cls, vector: Sequence[Any], frame: Frame = DEFAULT_FRAME) -> "PolyVectorField":
        return cls(tuple(PolyScalarField.constant(v, frame) for v in vector))  # type: ignore[arg-type]

    @classmethod
    def linear(cls, matrix: ArrayLike, frame: Frame = DEFAULT_FRAME) -> "PolyVectorField":
        """The field M y."""
        rows = []
        for i in range(3):
            terms = {}
            for j in range(3):
                value = matrix[i][j]
                if value != 0:
                    deg = [0, 0, 0]
                    deg[j] = 1
                    terms[tuple(deg)] = (value if isinstance(value, (int, Fraction)) else float(value),)
            rows.append(PolyScalarField.in_frame(terms, frame))
        return cls(tuple(rows))  # type: ignore[arg-type]

    def _map(self, fn) -> "PolyVectorField":
        return PolyVectorField(tuple(fn(c) for c in self.components))  # type: ignore[arg-type]

    def __getitem__(self, axis: int) -> PolyScalarField:
        return self.components[axis]

    def __iter__(self):
        return iter(self.components)

    @property
    def frame(self) -> Frame:
        return common_frame(*self.components)

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.components)

    @property
    def degree(self) -> int:
        return max(c.degree for c in self.components)

    @property
    def time_degree(self) -> int:
        return max(c.time_degree for c in self.components)

    def homogeneous(self, degree: int) -> "PolyVectorField":
        return self._map(lambda c: c.homogeneous(degree))

    def truncate(self, max_degree: int) -> "PolyVectorField":
        return self._map(lambda c: c.truncate(max_degree))

    def __call__(self, t: float, x: ArrayLike) -> NDArray:
        return np.stack([c(t, x) for c in self.components], axis=-1)

    def jacobian(self, t: float, x: ArrayLike) -> NDArray:
        """J[..., i, j] = d V_i / d x_j."""
        return np.stack(
            [np.stack([c.partial(j)(t, x) for j in range(3)], axis=-1) for c in self.components],
            axis=-2,
        )

    def divergence(self) -> PolyScalarField:
        return self[0].partial(0) + self[1].partial(1) + self[2].partial(2)

    def curl(self) -> "PolyVectorField":
        return PolyVectorField((
            self[2].partial(1) - self[1].partial(2),
            self[0].partial(2) - self[2].partial(0),
            self[1].partial(0) - self[0].partial(1),
        ))

    def coefficient_rate(self) -> "PolyVectorField":
        return self._map(lambda c: c.coefficient_rate())

    def dt(self) -> "PolyVectorField":
        return self._map(lambda c: c.dt())

    def directional(self, w: Sequence[float]) -> "PolyVectorField":
        return self._map(lambda c: c.directional(w))

    def taylor(self, t: float, center: Sequence[float]) -> "PolyVectorField":
        return self._map(lambda c: c.taylor(t, center))

    def coefficients_at(self, t: float) -> "PolyVectorField":
        return self._map(lambda c: c.coefficients_at(t))

    def scale(self, k: Any) -> "PolyVectorField":
        return self._map(lambda c: c.scale(k))

    def __add__(self, other: "PolyVectorField") -> "PolyVectorField":
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return PolyVectorField(tuple(a + b for a, b in zip(self.components, other.components)))  # type: ignore[arg-type]

    def __neg__(self) -> "PolyVectorField":
        return self.scale(-1)

    def __sub__(self, other: "PolyVectorField") -> "PolyVectorField":
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return self + (-other)

    def __mul__(self, k: Any) -> "PolyVectorField":
        if not isinstance(k, Number):
            return NotImplemented
        return self.scale(k)

    __rmul__ = __mul__

    def dot(self, other: "PolyVectorField") -> PolyScalarField:
        return self[0] * other[0] + self[1] * other[1] + self[2] * other[2]

    def dot_vector(self, w: Sequence[float]) -> PolyScalarField:
        out = PolyScalarField.zero(self.frame)
        for c, wa in zip(self.components, _vec3(w)):
            if wa != 0.0:
                out = out + c.scale(wa)
        return out

    def coordinate_dot(self) -> PolyScalarField:
        """The scalar field y . V(y)."""
        return sum(
            (c.times_coordinate(a) for a, c in enumerate(self.components)),
            PolyScalarField.zero(self.frame),
        )

    def cross_coordinates(self) -> "PolyVectorField":
        """The field y x V(y)."""
        v0, v1, v2 = self.components
        return PolyVectorField((
            v2.times_coordinate(1) - v1.times_coordinate(2),
            v0.times_coordinate(2) - v2.times_coordinate(0),
            v1.times_coordinate(0) - v0.times_coordinate(1),
        ))

    def linear_matrix(self) -> NDArray:
        """M[i, j] = coefficient of y_j in component i (tau**0 part)."""
        out = np.zeros((3, 3))
        for i, c in enumerate(self.components):
            for j, deg in enumerate(((1, 0, 0), (0, 1, 0), (0, 0, 1))):
                out[i, j] = float(c.coefficient(deg))
        return out

    def constant_vector(self) -> NDArray:
        return np.array([float(c.coefficient((0, 0, 0))) for c in self.components])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return all(a == b for a, b in zip(self.components, other.components))

    __hash__ = None  # type: ignore[assignment]

    def to_list(self) -> list[dict[str, Any]]:
        return [c.to_dict() for c in self.components]

    @classmethod
    def from_list(cls, docs: Sequence[Mapping[str, Any]]) -> "PolyVectorField":
        if len(docs) != 3:
            raise ConfigError(f"A vector field needs 3 component documents, got {len(docs)}")
        return cls(tuple(PolyScalarField.from_dict(d) for d in docs))  # type: ignore[arg-type]
