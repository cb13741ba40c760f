from fractions import Fraction

import numpy as np
import pytest

from corpuscle_lab.errors import ConfigError
from corpuscle_lab.physics.polynomial import PolyScalarField, PolyVectorField


def x2y():
    return PolyScalarField({(2, 1, 0): (1,)})


def test_evaluation_at_points():
    f = PolyScalarField({(2, 1, 0): (1,), (0, 0, 1): (3.0,), (0, 0, 0): (-1,)})
    x = np.array([[1.0, 2.0, 3.0], [0.5, -1.0, 0.0]])
    np.testing.assert_allclose(f(0.0, x), [1 * 2 + 9 - 1, 0.25 * -1 - 1])


def test_gradient_and_laplacian_are_exact():
    f = x2y()
    grad = f.gradient()
    assert grad[0] == PolyScalarField({(1, 1, 0): (2,)})
    assert grad[1] == PolyScalarField({(2, 0, 0): (1,)})
    assert grad[2].is_zero
    assert f.laplacian() == PolyScalarField({(0, 1, 0): (2,)})


def test_time_polynomial_coefficients():
    # (1 + 2 tau) x
    f = PolyScalarField({(1, 0, 0): (1, 2)})
    assert f(0.5, [3.0, 0.0, 0.0]) == pytest.approx(6.0)
    assert f.dt() == PolyScalarField({(1, 0, 0): (2,)})


def test_moving_frame_time_derivative_matches_difference():
    f = PolyScalarField({(2, 0, 0): (1, 0.5), (0, 1, 1): (-1,)}, origin=(0.1, 0, 0), velocity=(0.3, -0.2, 0.4))
    x = np.array([0.7, -0.4, 1.1])
    t, h = 0.3, 1e-4
    fd = (f(t + h, x) - f(t - h, x)) / (2 * h)
    assert float(f.dt()(t, x)) == pytest.approx(float(fd), rel=1e-7)


def test_taylor_reexpansion_reproduces_field():
    f = PolyScalarField({(3, 0, 0): (1,), (1, 1, 0): (2,), (0, 0, 2): (-1, 1)})
    shifted = f.taylor(0.5, (0.2, -0.3, 0.7))
    x = np.array([[0.1, 0.2, 0.3], [1.0, -1.0, 2.0]])
    np.testing.assert_allclose(shifted(0.5, x), f(0.5, x), rtol=1e-13)


def test_rational_coefficients_stay_exact():
    f = PolyScalarField.from_dict({"terms": [{"deg": [1, 0, 0], "t_coeffs": ["1/3"]}]})
    assert f.coefficient((1, 0, 0)) == Fraction(1, 3)
    assert f.to_dict()["terms"][0]["t_coeffs"] == ["1/3"]
    assert PolyScalarField.from_dict(f.to_dict()) == f


def test_moving_frame_serialization_keeps_velocity():
    f = PolyScalarField({(1, 0, 0): (1,)}, velocity=(1.0, 0.0, 0.0), t_ref=0.5)
    doc = f.to_dict()
    assert doc["velocity"] == [1.0, 0.0, 0.0]
    assert doc["t_ref"] == 0.5
    assert PolyScalarField.from_dict(doc) == f


@pytest.mark.parametrize("doc", [
    {"terms": [{"deg": [5, 0, 0], "t_coeffs": [1]}]},
    {"terms": [{"deg": [1, 0, 0], "t_coeffs": [1, 1, 1, 1, 1]}]},
    {"terms": [{"deg": [1, 0], "t_coeffs": [1]}]},
    {"terms": [{"deg": [1, 0, 0], "t_coeffs": ["one"]}]},
    {"terms": [{"t_coeffs": [1]}]},
])
def test_malformed_documents_are_rejected(doc):
    with pytest.raises(ConfigError):
        PolyScalarField.from_dict(doc)


def test_jacobian_orientation():
    # V = (y, 0, 0): dV_0/dx_1 = 1
    V = PolyVectorField((PolyScalarField({(0, 1, 0): (1,)}), PolyScalarField(), PolyScalarField()))
    J = V.jacobian(0.0, [0.3, 0.4, 0.5])
    assert J[0, 1] == 1.0
    assert J[1, 0] == 0.0


def test_curl_of_symmetric_gauge_is_uniform_field():
    B = np.array([0.2, -0.5, 1.0])
    half = 0.5 * np.array([[0, -B[2], B[1]], [B[2], 0, -B[0]], [-B[1], B[0], 0]])
    A = PolyVectorField.linear(half)
    np.testing.assert_allclose(A.curl()(0.0, [[1.0, 2.0, 3.0]])[0], B, atol=1e-15)
    assert A.divergence().is_zero


def test_coordinate_dot_and_cross():
    V = PolyVectorField.constant((1, 2, 3))
    y = np.array([0.5, -1.0, 2.0])
    assert float(V.coordinate_dot()(0.0, y)) == pytest.approx(y @ [1, 2, 3])
    np.testing.assert_allclose(V.cross_coordinates()(0.0, y), np.cross(y, [1, 2, 3]))


def test_product_respects_degree_cap():
    cubic = PolyScalarField({(3, 0, 0): (1,)})
    with pytest.raises(ConfigError):
        cubic * cubic
