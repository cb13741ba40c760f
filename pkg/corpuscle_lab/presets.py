from corpuscle_lab.models.constants import PhysicalConstants
from corpuscle_lab.models.study import StudyConfig
from corpuscle_lab.physics.fields import AnalyticPotentials
from corpuscle_lab.physics.polynomial import PolyScalarField, PolyVectorField

# Uniform B = (0, 0, B0) in the symmetric gauge A = B x x / 2, plus a uniform E along x
UNIFORM_B0 = 1.0
UNIFORM_E = (0.1, 0.0, 0.0)

# (monomial exponents, time coefficients)
P3_TERMS = [
    ((3, 0, 0), (1.0,)),
]

POTENTIAL_TERMS = {
    "phi": [((1, 0, 0), (-UNIFORM_E[0],))],
    "A0": [((0, 1, 0), (-0.5 * UNIFORM_B0,))],
    "A1": [((1, 0, 0), (0.5 * UNIFORM_B0,))],
    "A2": [],
}

INITIAL_STATE = {
    "r0": (0.0, 0.0, 0.0),
    "v0": (0.3, 0.2, 0.1),
    "t0": 0.0,
    "t1": 1.0,
    "step": 1e-3,
}

# Quadratic phi and a linear A whose gradient is not antisymmetric, both time dependent
QUADRATIC_TERMS = {
    "phi": [
        ((1, 0, 0), (-0.2,)),
        ((2, 0, 0), (0.3, 0.1)),
        ((1, 1, 0), (-0.2,)),
        ((0, 0, 2), (0.0, 0.1)),
    ],
    "A0": [((0, 1, 0), (0.2,)), ((0, 0, 1), (0.0, 0.1))],
    "A1": [((1, 0, 0), (-0.1,)), ((0, 0, 1), (0.3,)), ((0, 0, 0), (0.0, 0.05))],
    "A2": [((1, 0, 0), (0.15,)), ((0, 1, 0), (0.0, 0.1))],
}

TIMED_P3_TERMS = [
    ((3, 0, 0), (1.0, 0.5)),
    ((1, 1, 1), (0.0, 0.3)),
]


def _document(terms) -> dict:
    return {"terms": [{"deg": list(deg), "t_coeffs": list(coeffs)} for deg, coeffs in terms]}


def uniform_b_study() -> StudyConfig:
    """The bundled uniform-B concentration study"""
    return StudyConfig(
        constants=PhysicalConstants(),
        potentials={
            "phi": _document(POTENTIAL_TERMS["phi"]),
            "A": [_document(POTENTIAL_TERMS[name]) for name in ("A0", "A1", "A2")],
        },
        P3=_document(P3_TERMS),
        profile={"name": "gaussian"},
        schedule={"a0": 0.02, "R0": 0.5, "alpha": 5.0, "beta": 1.0, "n_values": [1, 2, 3, 4, 5, 6]},
        initial_state=INITIAL_STATE,
        time_samples=11,
        output={"directory": "out/uniform_b"},
        seed=0,
    )


def uniform_b_potentials(c: float = 1.0) -> AnalyticPotentials:
    return AnalyticPotentials.from_uniform_fields(E=UNIFORM_E, B=(0.0, 0.0, UNIFORM_B0), c=c)


def uniform_b_P3() -> PolyScalarField:
    return PolyScalarField.from_dict(_document(P3_TERMS))


def quadratic_potentials(c: float = 1.0) -> AnalyticPotentials:
    phi = PolyScalarField.from_dict(_document(QUADRATIC_TERMS["phi"]))
    A = PolyVectorField(tuple(
        PolyScalarField.from_dict(_document(QUADRATIC_TERMS[name])) for name in ("A0", "A1", "A2")
    ))
    return AnalyticPotentials(phi, A, c)


def timed_P3() -> PolyScalarField:
    """A homogeneous cubic P3 with time-dependent coefficients."""
    return PolyScalarField.from_dict(_document(TIMED_P3_TERMS))
