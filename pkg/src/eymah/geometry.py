"""Riemannian tensor calculus on the Poincare ball and half-space charts.

Conventions (all tensors fully covariant, derivative index first):

* ``Gamma[k, i, j]`` is the Christoffel symbol of the Levi-Civita connection.
* ``riemann[r, s, m, n] = g_{ra} R^a_{smn}`` with
  ``R^r_{smn} = d_m Gamma^r_{ns} - d_n Gamma^r_{ms} + Gamma^r_{ml} Gamma^l_{ns} - Gamma^r_{nl} Gamma^l_{ms}``,
  so ``Ric_{sn} = g^{rm} riemann[r, s, m, n]`` and round spheres have positive curvature.
* ``divergence(h)_j = -nabla^i h_ij``; ``delta_star`` is its formal adjoint.
* The rough Laplacian ``nabla* nabla = -g^{ab} nabla_a nabla_b`` is non-negative.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import jax.numpy as jnp
import numpy as np

from .errors import ChartError, ShapeError, SingularMetricError
from .fields import ANALYTIC, TensorField

BALL = "ball"
HALF_SPACE = "half-space"


@dataclass(frozen=True)
class ChartSpec:
    """Global chart of hyperbolic space.

    ``ball``: coordinates ``w`` with ``|w| < 1``; the special defining function is
    ``x = 2(1 - |w|)/(1 + |w|) = 2 exp(-r)``.
    ``half-space``: coordinates ``z = (t, y)`` with ``t > 0``; ``x = t``.
    """

    model: str
    dim_interior: int

    def __post_init__(self):
        if self.model not in (BALL, HALF_SPACE):
            raise ChartError(f"unknown chart model {self.model!r}")
        if self.dim_interior < 3:
            raise ShapeError("interior dimension n+1 must be at least 3")

    @property
    def n(self) -> int:
        return self.dim_interior - 1

    @property
    def defining_function_description(self) -> str:
        if self.model == BALL:
            return "x = 2(1-|w|)/(1+|w|)"
        return "x = t"

    def conformal_radius(self, z):
        """The function whose inverse square multiplies the Euclidean metric."""
        if self.model == BALL:
            return 0.5 * (1.0 - jnp.sum(z * z))
        return z[0]

    def defining_function(self, z):
        if self.model == BALL:
            rho = _safe_norm(z)
            return 2.0 * (1.0 - rho) / (1.0 + rho)
        return z[0]

    def contains(self, z) -> bool:
        z = np.asarray(z)
        if self.model == BALL:
            return bool(np.sum(z * z) < 1.0)
        return bool(z[0] > 0)


def _safe_norm(w):
    """Euclidean norm with a finite derivative at the origin."""
    s = jnp.sum(w * w)
    pos = s > 0
    return jnp.where(pos, jnp.sqrt(jnp.where(pos, s, 1.0)), 0.0)


def hyperbolic_metric(chart: ChartSpec, backend=ANALYTIC) -> TensorField:
    """Hyperbolic metric ``rfrak^{-2} delta`` of sectional curvature -1."""
    m = chart.dim_interior

    def fn(z):
        return jnp.eye(m, dtype=z.dtype) / chart.conformal_radius(z) ** 2

    return TensorField(fn, 2, m, "symmetric", backend)


def euclidean_metric(dim: int, backend=ANALYTIC) -> TensorField:
    def fn(z):
        return jnp.eye(dim, dtype=z.dtype)

    return TensorField(fn, 2, dim, "symmetric", backend)


def compactified_metric(chart: ChartSpec, g: TensorField) -> TensorField:
    """``x^2 g`` for the chart's special defining function."""

    def fn(z):
        return chart.defining_function(z) ** 2 * g(z)

    return g.with_fn(fn)


def _require(field: TensorField, rank: int, what: str):
    if field.rank != rank:
        raise ShapeError(f"{what} must have rank {rank}, got rank {field.rank}")


def validate_metric(g: TensorField, points) -> None:
    """Raise ``SingularMetricError`` at the first point where ``g`` is not positive definite."""
    vals = g.sample(np.atleast_2d(points))
    for p, G in zip(np.atleast_2d(points), vals):
        if not np.all(np.isfinite(G)):
            raise SingularMetricError("metric not finite", location=tuple(p))
        ev = np.linalg.eigvalsh(0.5 * (G + G.T))
        if ev[0] <= 0:
            raise SingularMetricError(
                f"metric not positive definite (min eigenvalue {ev[0]:.3e})", location=tuple(p)
            )


# --- pointwise building blocks -------------------------------------------------


def christoffel_fn(g: TensorField):
    dg = g.d

    def fn(z):
        gi = jnp.linalg.inv(g(z))
        d = dg(z)
        T = d + jnp.swapaxes(d, 0, 1) - jnp.transpose(d, (1, 2, 0))
        return 0.5 * jnp.einsum("kl,ijl->kij", gi, T)

    return fn


def covariant_derivative_fn(g: TensorField, fn, rank: int, passive: int = 0, gamma=None):
    """``nabla T`` for a covariant rank-``rank`` tensor with ``passive`` trailing fiber axes.

    Fiber axes (e.g. Lie algebra components) are not differentiated covariantly.
    """
    del passive  # fiber axes ride along untouched
    gamma = gamma or christoffel_fn(g)
    dT = g.backend.jacobian(fn)

    def nabla(z):
        out = dT(z)
        if rank == 0:
            return out
        G = gamma(z)
        T = fn(z)
        for s in range(rank):
            X = jnp.tensordot(G, T, axes=([0], [s]))  # (a, i_s, rest...)
            out = out - jnp.moveaxis(X, 1, s + 1)
        return out

    return nabla


def raise_all_fn(g: TensorField, fn, rank: int):
    """Raise the first ``rank`` indices of a tensor-valued function."""

    def up(z):
        gi = jnp.linalg.inv(g(z))
        T = fn(z)
        for s in range(rank):
            T = jnp.moveaxis(jnp.tensordot(gi, T, axes=([1], [s])), 0, s)
        return T

    return up


def metric_inner(g_inv, S, T, rank: int):
    """Full contraction ``S_{I} T^{I}`` with ``rank`` metric indices (trailing axes contracted flat)."""
    U = T
    for s in range(rank):
        U = jnp.moveaxis(jnp.tensordot(g_inv, U, axes=([1], [s])), 0, s)
    return jnp.sum(S * U)


# --- curvature -----------------------------------------------------------------


@dataclass(frozen=True)
class CurvaturePackage:
    """Curvature quantities of one metric, sharing a single Christoffel evaluation."""

    metric: TensorField
    christoffel: TensorField
    riemann: TensorField
    ricci: TensorField
    scalar: TensorField
    einstein: TensorField

    def evaluate(self, points) -> dict[str, np.ndarray]:
        validate_metric(self.metric, points)
        out = {}
        for name in ("christoffel", "riemann", "ricci", "scalar", "einstein"):
            out[name] = getattr(self, name).sample(points)
        return out


def curvature(g: TensorField) -> CurvaturePackage:
    _require(g, 2, "metric")
    m = g.dim
    gamma = christoffel_fn(g)
    dgamma = g.backend.jacobian(gamma)

    def riem_up(z):
        G = gamma(z)
        dG = dgamma(z)
        return (
            jnp.einsum("mrns->rsmn", dG)
            - jnp.einsum("nrms->rsmn", dG)
            + jnp.einsum("rml,lns->rsmn", G, G)
            - jnp.einsum("rnl,lms->rsmn", G, G)
        )

    def riem(z):
        return jnp.einsum("ra,asmn->rsmn", g(z), riem_up(z))

    def ric(z):
        R = jnp.einsum("rsrn->sn", riem_up(z))
        return 0.5 * (R + R.T)

    def scal(z):
        return jnp.sum(jnp.linalg.inv(g(z)) * ric(z))

    def ein(z):
        return ric(z) - 0.5 * scal(z) * g(z)

    mk = lambda fn, rank, sym: TensorField(fn, rank, m, sym, g.backend)
    return CurvaturePackage(
        metric=g,
        christoffel=mk(gamma, 3, "none"),
        riemann=mk(riem, 4, "none"),
        ricci=mk(ric, 2, "symmetric"),
        scalar=mk(scal, 0, "none"),
        einstein=mk(ein, 2, "symmetric"),
    )


# --- first-order operators ------------------------------------------------------


def covariant_derivative(g: TensorField, T: TensorField) -> TensorField:
    return TensorField(
        covariant_derivative_fn(g, T.fn, T.rank), T.rank + 1, g.dim, "none", g.backend
    )


def trace(g: TensorField, h: TensorField) -> TensorField:
    _require(h, 2, "trace argument")

    def fn(z):
        return jnp.sum(jnp.linalg.inv(g(z)) * h(z))

    return TensorField(fn, 0, g.dim, "none", g.backend)


def divergence(g: TensorField, h: TensorField) -> TensorField:
    """``(delta h)_j = -g^{ia} nabla_a h_ij``."""
    _require(h, 2, "divergence argument")
    nabla = covariant_derivative_fn(g, h.fn, 2)

    def fn(z):
        return -jnp.einsum("ai,aij->j", jnp.linalg.inv(g(z)), nabla(z))

    return TensorField(fn, 1, g.dim, "none", g.backend)


def delta_star(g: TensorField, eta: TensorField) -> TensorField:
    """Symmetrized covariant derivative, equal to half the Lie derivative of ``g``."""
    _require(eta, 1, "delta_star argument")
    nabla = covariant_derivative_fn(g, eta.fn, 1)

    def fn(z):
        N = nabla(z)
        return 0.5 * (N + N.T)

    return TensorField(fn, 2, g.dim, "symmetric", g.backend)


def differential(f: TensorField) -> TensorField:
    _require(f, 0, "differential argument")
    return TensorField(f.d, 1, f.dim, "none", f.backend)


def bianchi(g: TensorField, h: TensorField) -> TensorField:
    """Bianchi operator ``delta h + (1/2) d tr_g h``."""
    _require(h, 2, "bianchi argument")
    div = divergence(g, h)
    tr = trace(g, h)
    dtr = g.backend.jacobian(tr.fn)

    def fn(z):
        return div(z) + 0.5 * dtr(z)

    return TensorField(fn, 1, g.dim, "none", g.backend)


# --- second-order operators -----------------------------------------------------


def rough_laplacian_fn(g: TensorField, fn, rank: int, passive: int = 0):
    gamma = christoffel_fn(g)
    nab = covariant_derivative_fn(g, fn, rank, passive, gamma)
    nab2 = covariant_derivative_fn(g, nab, rank + 1, passive, gamma)

    def lap(z):
        return -jnp.tensordot(jnp.linalg.inv(g(z)), nab2(z), axes=([0, 1], [0, 1]))

    return lap


def rough_laplacian(g: TensorField, T: TensorField) -> TensorField:
    return TensorField(rough_laplacian_fn(g, T.fn, T.rank), T.rank, g.dim, T.symmetry, g.backend)


def scalar_laplacian(g: TensorField, f: TensorField) -> TensorField:
    """Non-negative Laplacian ``d* d f``."""
    _require(f, 0, "scalar")
    return rough_laplacian(g, f)


def ricci_action_fn(g, ric_fn, h_fn):
    """``2 Ric~(h) = Ric_jk h^k_l + Ric_lk h^k_j``."""

    def fn(z):
        gi = jnp.linalg.inv(g(z))
        P = ric_fn(z) @ gi @ h_fn(z)
        return P + P.T

    return fn


def riemann_action_fn(g, riem_fn, h_fn):
    """``Riem~(h)_jl = R_ijkl h^{ik}``."""

    def fn(z):
        gi = jnp.linalg.inv(g(z))
        hu = gi @ h_fn(z) @ gi
        return jnp.einsum("ijkl,ik->jl", riem_fn(z), hu)

    return fn


def lichnerowicz_shift(g: TensorField, h: TensorField, mu: float, curv: CurvaturePackage | None = None) -> TensorField:
    """``Delta_L h + 2 mu h`` with ``Delta_L = nabla* nabla + 2 Ric~ - 2 Riem~``."""
    _require(h, 2, "Lichnerowicz argument")
    curv = curv or curvature(g)
    lap = rough_laplacian_fn(g, h.fn, 2)
    ric2 = ricci_action_fn(g, curv.ricci.fn, h.fn)
    rie = riemann_action_fn(g, curv.riemann.fn, h.fn)

    def fn(z):
        return lap(z) + ric2(z) - 2.0 * rie(z) + 2.0 * mu * h(z)

    return TensorField(fn, 2, g.dim, "symmetric", g.backend)


# --- forms ----------------------------------------------------------------------


@lru_cache(maxsize=None)
def levi_civita_symbol(m: int) -> np.ndarray:
    eps = np.zeros((m,) * m)
    for perm in itertools.permutations(range(m)):
        inv = sum(1 for i in range(m) for j in range(i + 1, m) if perm[i] > perm[j])
        eps[perm] = -1.0 if inv % 2 else 1.0
    return eps


def hodge_star_fn(g: TensorField, fn, k: int, passive: int = 0):
    m = g.dim
    if not 0 <= k <= m:
        raise ShapeError(f"form degree {k} out of range for dimension {m}")
    eps = jnp.asarray(levi_civita_symbol(m))
    up = raise_all_fn(g, fn, k)

    def star(z):
        G = g(z)
        vol = jnp.sqrt(jnp.linalg.det(G)) * eps
        return jnp.tensordot(up(z), vol, axes=(list(range(k)), list(range(k)))) / math.factorial(k)

    # fiber axes of `up` end up first after tensordot; move them to the back
    if passive:
        def star_p(z):
            S = star(z)
            return jnp.moveaxis(S, tuple(range(passive)), tuple(range(S.ndim - passive, S.ndim)))

        return star_p
    return star


def hodge_star(g: TensorField, phi: TensorField) -> TensorField:
    """Metric Hodge dual of a plain ``k``-form stored with full antisymmetric components."""
    k = phi.rank
    if not 0 <= k <= g.dim:
        raise ShapeError(f"form degree {k} out of range for dimension {g.dim}")
    return TensorField(hodge_star_fn(g, phi.fn, k), g.dim - k, g.dim, "antisymmetric", g.backend)


def form_inner(g_inv, phi, psi, k: int):
    """Pointwise ``<phi, psi> = phi_I psi^I / k!`` summed over trailing fiber axes."""
    return metric_inner(g_inv, phi, psi, k) / math.factorial(k)


def volume_density(g: TensorField):
    def fn(z):
        return jnp.sqrt(jnp.linalg.det(g(z)))

    return fn


def killing_rotation(chart: ChartSpec, g: TensorField, i: int, j: int) -> TensorField:
    """Flat of the rotation field ``w_i d_j - w_j d_i``, a Killing field of ``g_H`` on the ball."""
    if chart.model != BALL:
        raise ChartError("rotation Killing fields are provided for the ball model")

    def fn(z):
        V = jnp.zeros_like(z).at[j].set(z[i]).at[i].set(-z[j])
        return g(z) @ V

    return TensorField(fn, 1, g.dim, "none", g.backend)

