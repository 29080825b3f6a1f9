import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from eymah.errors import ShapeError
from eymah.fields import ANALYTIC, FiniteDifference, TensorField, central_weights, scalar, zeros


@pytest.mark.parametrize("order, expected", [
    (2, [-0.5, 0.5]),
    (4, [1 / 12, -2 / 3, 2 / 3, -1 / 12]),
])
def test_central_weights_match_textbook_stencils(order, expected):
    _, w = central_weights(order)
    np.testing.assert_allclose(w, expected, atol=1e-14)


@pytest.mark.parametrize("order", [0, 3, -2])
def test_central_weights_reject_bad_order(order):
    with pytest.raises(ValueError):
        central_weights(order)


def test_finite_difference_rejects_nonpositive_step():
    with pytest.raises(ValueError):
        FiniteDifference(0.0)


@given(
    order=st.sampled_from([2, 4, 6]),
    coeffs=st.lists(st.floats(-2, 2), min_size=7, max_size=7),
)
def test_stencil_is_exact_on_polynomials_up_to_its_order(order, coeffs):
    offsets, w = central_weights(order)
    c = np.array(coeffs[: order + 1])
    poly = np.polynomial.Polynomial(c)
    h = 0.1
    approx = np.dot(w, poly(0.3 + offsets * h)) / h
    assert approx == pytest.approx(poly.deriv()(0.3), abs=1e-9)


def test_finite_difference_converges_at_its_order():
    f = TensorField(lambda z: jnp.sin(z[0]) * jnp.exp(z[1]), 0, 2)
    z = jnp.array([0.3, -0.2])
    exact = np.asarray(f.d(z))
    errs = [np.abs(np.asarray(f.with_backend(FiniteDifference(h, 4)).d(z)) - exact).max() for h in (0.1, 0.05)]
    assert np.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.2)


def test_derivative_index_comes_first():
    f = TensorField(lambda z: jnp.array([z[0] * z[1], z[1] ** 2, 0.0]), 1, 3)
    D = np.asarray(f.d(jnp.array([1.0, 2.0, 3.0])))
    # D[a, i] = d f_i / d z_a
    np.testing.assert_allclose(D[:, 0], [2.0, 1.0, 0.0])
    np.testing.assert_allclose(D[:, 1], [0.0, 4.0, 0.0])


def test_field_arithmetic_and_shape_checks():
    a = scalar(lambda z: z[0], 2)
    b = scalar(lambda z: z[1], 2)
    z = jnp.array([2.0, 5.0])
    assert float((a - b.scale(2.0))(z)) == -8.0
    assert float((-a)(z)) == -2.0
    with pytest.raises(ShapeError):
        a + zeros(1, 2)
    with pytest.raises(ValueError):
        TensorField(lambda z: z, 1, 2, symmetry="hermitian")


def test_sample_vectorizes_over_points():
    f = TensorField(lambda z: jnp.outer(z, z), 2, 3, "symmetric", ANALYTIC)
    pts = np.arange(6.0).reshape(2, 3)
    out = f.sample(pts)
    assert out.shape == (2, 3, 3)
    np.testing.assert_allclose(out[1], np.outer(pts[1], pts[1]))
