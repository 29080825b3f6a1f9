import jax
import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eymah.errors import AlgebraError, ShapeError
from eymah.fields import TensorField
from eymah.gauge import (
    AdValuedForm,
    LieAlgebraSpec,
    algebra_preset,
    codifferential,
    codifferential_via_star,
    cov_ext_deriv,
    curvature_form,
    stress_energy,
    stress_energy_pointwise,
    su2,
    twisted_hodge_laplacian,
    u1,
    zero_form,
)
from eymah.geometry import euclidean_metric

vec3 = st.lists(st.floats(-3, 3), min_size=3, max_size=3).map(np.array)


def test_presets_and_their_properties():
    assert su2().dim == 3 and not su2().is_abelian
    assert u1().dim == 1 and u1().is_abelian
    assert algebra_preset("SU2") == su2()
    with pytest.raises(AlgebraError):
        algebra_preset("so(3,1)")


def test_structure_constant_validation():
    c = np.zeros((2, 2, 2))
    c[0, 0, 1] = 1.0  # not antisymmetric
    with pytest.raises(AlgebraError, match="antisymmetric"):
        LieAlgebraSpec("bad", c, np.eye(2))
    eps = su2().structure_constants
    with pytest.raises(AlgebraError, match="Ad-invariant"):
        LieAlgebraSpec("skewed", eps, np.diag([1.0, 2.0, 3.0]))
    with pytest.raises(AlgebraError, match="positive definite"):
        LieAlgebraSpec("indefinite", np.zeros((2, 2, 2)), np.diag([1.0, -1.0]))
    with pytest.raises(AlgebraError, match="shapes"):
        LieAlgebraSpec("shape", np.zeros((2, 2, 2)), np.eye(3))


def test_jacobi_failure_is_reported():
    c = np.zeros((3, 3, 3))
    # [e1, e2] = e3, [e1, e3] = e1 violates Jacobi
    for a, b, k in ((2, 0, 1), (0, 0, 2)):
        c[a, b, k], c[a, k, b] = 1.0, -1.0
    with pytest.raises(AlgebraError, match="Jacobi"):
        LieAlgebraSpec("broken", c, np.eye(3))


@given(X=vec3, Y=vec3, Z=vec3)
def test_su2_bracket_is_antisymmetric_and_invariant(X, Y, Z):
    alg = su2()
    br = lambda a, b: np.asarray(alg.bracket(jnp.asarray(a), jnp.asarray(b)))
    np.testing.assert_allclose(br(X, Y), -br(Y, X), atol=1e-12)
    np.testing.assert_allclose(br(X, Y), np.cross(X, Y), atol=1e-12)
    q = alg.inner_product
    assert br(X, Y) @ q @ Z == pytest.approx(-(Y @ q @ br(X, Z)), abs=1e-9)


def _poly_connection(seed, m=4, alg=None):
    alg = alg or su2()
    rng = np.random.default_rng(seed)
    W0 = rng.normal(size=(m, alg.dim))
    W1 = rng.normal(size=(m, alg.dim, m)) * 0.5
    W2 = rng.normal(size=(m, alg.dim, m, m)) * 0.3
    fn = lambda z: W0 + jnp.einsum("iak,k->ia", W1, z) + jnp.einsum("iakl,k,l->ia", W2, z, z)
    return AdValuedForm(fn, 1, m, alg)


def _poly_metric(seed, m=4):
    rng = np.random.default_rng(seed + 1)
    C = rng.normal(size=(m, m, m)) * 0.1

    def fn(z):
        A = jnp.eye(m) + jnp.einsum("ijk,k->ij", C, z) + 0.1 * jnp.outer(z, z)
        return 0.5 * (A + A.T)

    return TensorField(fn, 2, m, "symmetric")


def test_curvature_of_a_constant_connection_is_the_bracket():
    alg = su2()
    W = np.random.default_rng(0).normal(size=(4, 3))
    Om = curvature_form(AdValuedForm(lambda z: jnp.asarray(W), 1, 4, alg))
    got = np.asarray(Om(jnp.zeros(4)))
    expected = np.einsum("abc,ib,jc->ija", alg.structure_constants, W, W)
    np.testing.assert_allclose(got, expected, atol=1e-13)


def test_abelian_curvature_is_the_exterior_derivative():
    w = _poly_connection(3, alg=u1())
    z = jnp.array([0.1, -0.3, 0.2, 0.05])
    J = np.asarray(jax.jacfwd(w.fn)(z))[:, 0, :]  # J[i, k] = d_k w_i
    np.testing.assert_allclose(np.asarray(curvature_form(w)(z))[..., 0], J.T - J, atol=1e-13)


def test_covariant_exterior_derivative_squares_to_curvature():
    # d_w d_w phi = [Omega, phi] on algebra-valued functions
    alg = su2()
    w = _poly_connection(5)
    rng = np.random.default_rng(9)
    P0, P1 = rng.normal(size=3), rng.normal(size=(3, 4))
    phi = AdValuedForm(lambda z: P0 + P1 @ z + jnp.sin(z[0]) * P0, 0, 4, alg)
    z = jnp.array([0.2, 0.1, -0.1, 0.3])
    lhs = np.asarray(cov_ext_deriv(w, cov_ext_deriv(w, phi))(z))
    rhs = np.einsum("abc,ijb,c->ija", alg.structure_constants, np.asarray(curvature_form(w)(z)), np.asarray(phi(z)))
    np.testing.assert_allclose(lhs, rhs, atol=1e-11)


@settings(max_examples=8)
@given(seed=st.integers(0, 1000), degree=st.sampled_from([1, 2]))
def test_index_and_hodge_codifferentials_agree(seed, degree):
    g = _poly_metric(seed)
    w = _poly_connection(seed)
    phi = w if degree == 1 else curvature_form(w)
    z = jnp.asarray(np.random.default_rng(seed).uniform(-0.3, 0.3, 4))
    a = np.asarray(codifferential(g, w, phi)(z))
    b = np.asarray(codifferential_via_star(g, w, phi)(z))
    np.testing.assert_allclose(a, b, atol=1e-10 * max(1.0, np.abs(a).max()))


def test_flat_abelian_hodge_laplacian_is_minus_the_coordinate_laplacian():
    g = euclidean_metric(3)
    alg = u1()
    b = AdValuedForm(lambda z: jnp.stack([z[0] ** 2 * z[1], z[2] ** 3, z[0] * z[1] * z[2]])[:, None], 1, 3, alg)
    z = jnp.array([0.3, -0.7, 1.1])
    lap = np.asarray(twisted_hodge_laplacian(g, zero_form(1, 3, alg), b)(z))[:, 0]
    y, t = -0.7, 1.1
    np.testing.assert_allclose(lap, [-2 * y, -6 * t, 0.0], atol=1e-12)


def test_codifferential_rejects_functions():
    alg = su2()
    with pytest.raises(ShapeError):
        codifferential(euclidean_metric(3), zero_form(1, 3, alg), zero_form(0, 3, alg))


@settings(max_examples=25)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 5))
def test_stress_energy_trace_and_sign(seed, n):
    m = n + 1
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(m, m))
    G = B @ B.T + m * np.eye(m)
    O = rng.normal(size=(m, m, 3))
    O = O - O.transpose(1, 0, 2)
    Q, K, Kt, kappa = (np.asarray(v) for v in stress_energy_pointwise(jnp.asarray(G), jnp.asarray(O), jnp.eye(3), n))
    gi = np.linalg.inv(G)
    assert Q <= 0
    assert np.sum(gi * K) == pytest.approx(0.5 * (n - 3) * Q, abs=1e-10 * abs(Q))
    assert kappa == pytest.approx(np.sum(gi * K), abs=1e-10 * abs(Q))
    np.testing.assert_allclose(K, K.T, atol=1e-12)
    # K~ removes kappa/(n-1) times the metric
    np.testing.assert_allclose(Kt, K - kappa / (n - 1) * G, atol=1e-12)


@settings(max_examples=10)
@given(seed=st.integers(0, 10_000), angle=st.floats(-3.0, 3.0))
def test_stress_energy_is_gauge_invariant(seed, angle):
    # a constant gauge rotation acts on the algebra index only
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
    rng = np.random.default_rng(seed)
    W0, W1 = rng.normal(size=(4, 3)), rng.normal(size=(4, 3, 4)) * 0.5
    fn = lambda z: W0 + jnp.einsum("iak,k->ia", W1, z)
    w = AdValuedForm(fn, 1, 4, su2())
    wr = w.with_fn(lambda z: fn(z) @ R.T)
    g = _poly_metric(seed)
    z = jnp.array([0.1, 0.2, -0.1, 0.0])
    np.testing.assert_allclose(
        np.asarray(curvature_form(wr)(z)), np.asarray(curvature_form(w)(z)) @ R.T, atol=1e-11
    )
    np.testing.assert_allclose(
        np.asarray(stress_energy(g, wr).K(z)), np.asarray(stress_energy(g, w).K(z)), atol=1e-10
    )
