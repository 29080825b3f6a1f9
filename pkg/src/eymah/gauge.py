"""Lie-algebra-valued forms on a trivial bundle and the Yang-Mills stress tensor.

A ``k``-form with values in a ``d``-dimensional Lie algebra is a callable
``z -> array`` of shape ``(m,)*k + (d,)`` holding fully antisymmetric
components ``phi^a_{i1..ik}`` with the algebra index last. Pairings use
``<phi, psi> = q_ab phi^a_I psi^{b,I} / k!``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from .errors import AlgebraError, ShapeError
from .fields import ANALYTIC, TensorField
from .geometry import covariant_derivative_fn, hodge_star_fn


@dataclass(frozen=True, eq=False)
class LieAlgebraSpec:
    """Structure constants ``c[a, b, c] = c^a_{bc}`` and an Ad-invariant inner product ``q``."""

    name: str
    structure_constants: np.ndarray
    inner_product: np.ndarray
    tol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        c = np.asarray(self.structure_constants, dtype=float)
        q = np.asarray(self.inner_product, dtype=float)
        d = q.shape[0]
        if c.shape != (d, d, d) or q.shape != (d, d):
            raise AlgebraError(f"inconsistent shapes: c {c.shape}, q {q.shape}")
        if np.abs(c + c.transpose(0, 2, 1)).max(initial=0) > self.tol:
            raise AlgebraError("structure constants not antisymmetric in lower indices")
        jac = (
            np.einsum("ail,ljk->aijk", c, c)
            + np.einsum("ajl,lki->aijk", c, c)
            + np.einsum("akl,lij->aijk", c, c)
        )
        if np.abs(jac).max(initial=0) > self.tol:
            raise AlgebraError("Jacobi identity fails")
        if np.abs(q - q.T).max() > self.tol or np.linalg.eigvalsh(q)[0] <= 0:
            raise AlgebraError("inner product not symmetric positive definite")
        # q([X,Y],Z) + q(Y,[X,Z]) = 0 on basis triples
        T = np.einsum("axy,az->xyz", c, q)
        if np.abs(T + T.transpose(0, 2, 1)).max(initial=0) > self.tol:
            raise AlgebraError("inner product not Ad-invariant")
        object.__setattr__(self, "structure_constants", c)
        object.__setattr__(self, "inner_product", q)

    @property
    def dim(self) -> int:
        return self.inner_product.shape[0]

    @property
    def is_abelian(self) -> bool:
        return not np.any(self.structure_constants)

    def bracket(self, X, Y):
        return jnp.einsum("abc,b,c->a", self.structure_constants, X, Y)

    def __eq__(self, other):
        return (
            isinstance(other, LieAlgebraSpec)
            and self.dim == other.dim
            and np.array_equal(self.structure_constants, other.structure_constants)
            and np.array_equal(self.inner_product, other.inner_product)
        )

    def __hash__(self):
        return hash((self.name, self.dim))


def u1() -> LieAlgebraSpec:
    return LieAlgebraSpec("u(1)", np.zeros((1, 1, 1)), np.eye(1))


def su2() -> LieAlgebraSpec:
    """Basis ``T_a`` with ``[T_a, T_b] = eps_abc T_c``; ``q`` makes the basis orthonormal.

    ``q`` is minus one half of the Killing form in this basis.
    """
    eps = np.zeros((3, 3, 3))
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[a, b, c], eps[a, c, b] = 1.0, -1.0
    return LieAlgebraSpec("su(2)", eps, np.eye(3))


def algebra_preset(name: str) -> LieAlgebraSpec:
    presets = {"u1": u1, "u(1)": u1, "su2": su2, "su(2)": su2}
    try:
        return presets[name.lower()]()
    except KeyError:
        raise AlgebraError(f"unknown Lie algebra preset {name!r}; choose u1 or su2") from None


@dataclass(frozen=True)
class AdValuedForm:
    fn: Callable
    degree: int
    dim: int
    algebra: LieAlgebraSpec
    backend: object = ANALYTIC

    def __post_init__(self):
        if not 0 <= self.degree <= self.dim:
            raise ShapeError(f"form degree {self.degree} out of range for dimension {self.dim}")

    def __call__(self, z):
        return self.fn(z)

    @property
    def d_partial(self):
        return self.backend.jacobian(self.fn)

    @cached_property
    def _batched(self):
        return jax.jit(jax.vmap(self.fn))

    def sample(self, points) -> np.ndarray:
        return np.asarray(self._batched(jnp.asarray(points, dtype=float)))

    def with_fn(self, fn, **changes) -> "AdValuedForm":
        return replace(self, fn=fn, **changes)

    def with_backend(self, backend) -> "AdValuedForm":
        return replace(self, backend=backend)

    def __add__(self, other: "AdValuedForm") -> "AdValuedForm":
        _check_pair(self, other)
        if self.degree != other.degree:
            raise ShapeError("cannot add forms of different degree")
        f, g = self.fn, other.fn
        return self.with_fn(lambda z: f(z) + g(z))

    def scale(self, c) -> "AdValuedForm":
        f = self.fn
        return self.with_fn(lambda z: c * f(z))

    def __sub__(self, other):
        return self + other.scale(-1.0)


def zero_form(degree: int, dim: int, algebra: LieAlgebraSpec, backend=ANALYTIC) -> AdValuedForm:
    shape = (dim,) * degree + (algebra.dim,)
    return AdValuedForm(lambda z: jnp.zeros(shape, dtype=z.dtype), degree, dim, algebra, backend)


def _check_pair(a: AdValuedForm, b: AdValuedForm):
    if a.algebra != b.algebra:
        raise AlgebraError(f"algebra mismatch: {a.algebra.name} vs {b.algebra.name}")
    if a.dim != b.dim:
        raise ShapeError("forms live on charts of different dimension")


# --- exterior algebra -------------------------------------------------------------


def _alternate_front(P, k: int):
    """``sum_j (-1)^j`` of ``P`` with its leading axis moved to slot ``j`` among ``k+1`` form slots."""
    return sum(((-1) ** j) * jnp.moveaxis(P, 0, j) for j in range(k + 1))


def exterior_derivative_fn(fn, k: int, backend):
    d = backend.jacobian(fn)

    def dphi(z):
        return _alternate_front(d(z), k)

    return dphi


def wedge_bracket_fn(alpha_fn, phi_fn, k: int, algebra: LieAlgebraSpec):
    """``[alpha ^ phi]`` for an algebra-valued 1-form ``alpha`` and ``k``-form ``phi``."""
    c = jnp.asarray(algebra.structure_constants)

    def fn(z):
        A = alpha_fn(z)  # (i, b)
        P = phi_fn(z)  # (I, c)
        outer = jnp.einsum("abc,ib,...c->i...a", c, A, P)
        return _alternate_front(outer, k)

    return fn


def exterior_derivative(phi: AdValuedForm) -> AdValuedForm:
    if phi.degree >= phi.dim:
        raise ShapeError("exterior derivative of a top-degree form")
    return phi.with_fn(exterior_derivative_fn(phi.fn, phi.degree, phi.backend), degree=phi.degree + 1)


def curvature_form(omega: AdValuedForm) -> AdValuedForm:
    """``Omega = d omega + (1/2)[omega ^ omega]``."""
    if omega.degree != 1:
        raise ShapeError("connection must be a 1-form")
    dw = exterior_derivative_fn(omega.fn, 1, omega.backend)
    br = wedge_bracket_fn(omega.fn, omega.fn, 1, omega.algebra)

    def fn(z):
        return dw(z) + 0.5 * br(z)

    return omega.with_fn(fn, degree=2)


def cov_ext_deriv(omega: AdValuedForm, phi: AdValuedForm) -> AdValuedForm:
    """``d_omega phi = d phi + [omega ^ phi]``."""
    _check_pair(omega, phi)
    if omega.degree != 1:
        raise ShapeError("connection must be a 1-form")
    if phi.degree >= phi.dim:
        raise ShapeError(f"cannot raise degree {phi.degree} on a {phi.dim}-dimensional chart")
    k = phi.degree
    dphi = exterior_derivative_fn(phi.fn, k, phi.backend)
    br = wedge_bracket_fn(omega.fn, phi.fn, k, omega.algebra)

    def fn(z):
        return dphi(z) + br(z)

    return phi.with_fn(fn, degree=k + 1)


def codifferential(g: TensorField, omega: AdValuedForm, phi: AdValuedForm) -> AdValuedForm:
    """Formal adjoint of ``d_omega``: ``-nabla^j phi_{jI} - [omega^j, phi_{jI}]``."""
    _check_pair(omega, phi)
    k = phi.degree
    if k == 0:
        raise ShapeError("codifferential of a 0-form")
    c = jnp.asarray(omega.algebra.structure_constants)
    nabla = covariant_derivative_fn(g, phi.fn, k, passive=1)

    def fn(z):
        gi = jnp.linalg.inv(g(z))
        N = nabla(z)  # (a, j, I, c)
        lap = jnp.tensordot(gi, N, axes=([0, 1], [0, 1]))
        wu = gi @ omega(z)  # omega^{b, j}
        br = jnp.einsum("ebc,jb,j...c->...e", c, wu, phi(z))
        return -lap - br

    return phi.with_fn(fn, degree=k - 1, backend=g.backend)


def codifferential_via_star(g: TensorField, omega: AdValuedForm, phi: AdValuedForm) -> AdValuedForm:
    """Adjoint of ``d_omega`` written as ``(-1)^{m(k+1)+1} * d_omega *`` for Riemannian ``m``."""
    _check_pair(omega, phi)
    m, k = g.dim, phi.degree
    if k == 0:
        raise ShapeError("codifferential of a 0-form")
    star_phi = phi.with_fn(hodge_star_fn(g, phi.fn, k, passive=1), degree=m - k, backend=g.backend)
    inner = cov_ext_deriv(omega.with_backend(g.backend), star_phi)
    outer = hodge_star_fn(g, inner.fn, m - k + 1, passive=1)
    sign = (-1) ** (m * (k + 1) + 1)
    return phi.with_fn(lambda z: sign * outer(z), degree=k - 1, backend=g.backend)


def twisted_hodge_laplacian(g: TensorField, omega: AdValuedForm, phi: AdValuedForm) -> AdValuedForm:
    """``d_omega d*_omega + d*_omega d_omega`` on ``k``-forms."""
    _check_pair(omega, phi)
    k, m = phi.degree, phi.dim
    parts = []
    if k > 0:
        parts.append(cov_ext_deriv(omega, codifferential(g, omega, phi)))
    if k < m:
        parts.append(codifferential(g, omega, cov_ext_deriv(omega, phi)))
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out.with_fn(out.fn, backend=g.backend)


# --- stress-energy --------------------------------------------------------------


@dataclass(frozen=True)
class StressEnergyPackage:
    Q: TensorField
    K: TensorField
    K_tilde: TensorField
    kappa: TensorField


def stress_energy_pointwise(G, Omega, q, n: int):
    """Return ``(Q, K, K_tilde, kappa)`` from metric and curvature values at one point."""
    gi = jnp.linalg.inv(G)
    F = jnp.einsum("ab,ija->ijb", q, Omega)
    qO = jnp.einsum("ijb,kmb->ijkm", F, Omega)  # q(Omega_ij, Omega_km)
    Q = -0.25 * jnp.einsum("ik,jm,ijkm->", gi, gi, qO)
    half_contr = 0.5 * jnp.einsum("km,ikjm->ij", gi, qO)
    K = half_contr + 0.5 * Q * G
    kappa = 0.5 * (n - 3) * Q
    K_tilde = K - kappa / (n - 1) * G
    return Q, K, K_tilde, kappa


def stress_energy(g: TensorField, omega: AdValuedForm) -> StressEnergyPackage:
    if omega.degree != 1:
        raise ShapeError("connection must be a 1-form")
    n = g.dim - 1
    Om = curvature_form(omega)
    q = jnp.asarray(omega.algebra.inner_product)

    def part(i):
        return lambda z: stress_energy_pointwise(g(z), Om(z), q, n)[i]

    mk = lambda fn, rank, sym: TensorField(fn, rank, g.dim, sym, g.backend)
    return StressEnergyPackage(
        Q=mk(part(0), 0, "none"),
        K=mk(part(1), 2, "symmetric"),
        K_tilde=mk(part(2), 2, "symmetric"),
        kappa=mk(part(3), 0, "none"),
    )


def yang_mills_current_fn(g: TensorField, omega: AdValuedForm):
    """``J_j = (1/2) q(Omega_{jk}, (d*_omega Omega)^k)``, the divergence of the stress tensor off-shell."""
    Om = curvature_form(omega)
    dstar = codifferential(g, omega, Om)
    q = jnp.asarray(omega.algebra.inner_product)

    def fn(z):
        gi = jnp.linalg.inv(g(z))
        return 0.5 * jnp.einsum("jka,ab,kl,lb->j", Om(z), q, gi, dstar(z))

    return fn


def form_l2_density(g: TensorField, phi: AdValuedForm, psi: AdValuedForm):
    """Pointwise ``<phi, psi> dvol`` density with respect to coordinate measure."""
    _check_pair(phi, psi)
    k = phi.degree
    q = jnp.asarray(phi.algebra.inner_product)

    def fn(z):
        G = g(z)
        gi = jnp.linalg.inv(G)
        P = jnp.tensordot(phi(z), q, axes=([k], [0]))
        U = psi(z)
        for s in range(k):
            U = jnp.moveaxis(jnp.tensordot(gi, U, axes=([1], [s])), 0, s)
        return jnp.sum(P * U) / math.factorial(k) * jnp.sqrt(jnp.linalg.det(G))

    return fn
