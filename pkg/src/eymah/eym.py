"""Einstein-Yang-Mills residuals, the Bianchi-Coulomb gauged map and its linearization."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import jax.numpy as jnp
import numpy as np

from .errors import ConfigurationError, ShapeError, UnsupportedModeError
from .fields import ANALYTIC, TensorField, zeros
from .gauge import (
    AdValuedForm,
    LieAlgebraSpec,
    codifferential,
    cov_ext_deriv,
    curvature_form,
    stress_energy,
    twisted_hodge_laplacian,
    zero_form,
)
from .geometry import (
    BALL,
    ChartSpec,
    _safe_norm,
    bianchi,
    curvature,
    delta_star,
    hyperbolic_metric,
    lichnerowicz_shift,
)

COLLAR_WIDTH = 1.0


@dataclass(frozen=True)
class Cutoff:
    """Smooth profile equal to 1 for ``x <= x1`` and 0 for ``x >= x2``."""

    x1: float = 0.1
    x2: float = 1.0

    def __post_init__(self):
        if not 0 < self.x1 < self.x2:
            raise ConfigurationError(f"cutoff needs 0 < x1 < x2, got ({self.x1}, {self.x2})")
        if self.x2 > COLLAR_WIDTH:
            raise ConfigurationError(
                f"cutoff support x2 = {self.x2} exceeds the collar width {COLLAR_WIDTH}"
            )

    def __call__(self, x):
        s = (x - self.x1) / (self.x2 - self.x1)
        a, b = _flat_exp(1.0 - s), _flat_exp(s)
        return a / (a + b)


def _flat_exp(t):
    """``exp(-1/t)`` for ``t > 0`` and 0 otherwise, with safe derivatives."""
    pos = t > 0
    return jnp.where(pos, jnp.exp(-1.0 / jnp.where(pos, t, 1.0)), 0.0)


@dataclass(frozen=True)
class Configuration:
    """A metric and an algebra-valued connection 1-form on one chart."""

    g: TensorField
    omega: AdValuedForm
    chart: ChartSpec

    def __post_init__(self):
        if self.g.rank != 2 or self.omega.degree != 1:
            raise ShapeError("configuration needs a rank-2 metric and a connection 1-form")
        if self.g.dim != self.chart.dim_interior or self.omega.dim != self.g.dim:
            raise ShapeError("metric, connection and chart dimensions differ")

    @property
    def n(self) -> int:
        return self.chart.n

    @property
    def algebra(self) -> LieAlgebraSpec:
        return self.omega.algebra


def trivial_configuration(chart: ChartSpec, algebra: LieAlgebraSpec, backend=ANALYTIC) -> Configuration:
    """Hyperbolic metric with the zero connection."""
    return Configuration(
        hyperbolic_metric(chart, backend), zero_form(1, chart.dim_interior, algebra, backend), chart
    )


@dataclass(frozen=True)
class BoundaryData:
    """Boundary metric perturbation and boundary connection in ambient components.

    ``Gamma(p)`` returns the ``(m, m)`` components of a tangential symmetric
    tensor at the boundary point ``p`` (a unit vector for the ball, ``(0, y)``
    for the half-space); ``gamma(p)`` returns ``(m, d)`` tangential components.
    ``amplitude`` records the smallness parameter.
    """

    Gamma: Callable | None
    gamma: Callable | None
    algebra: LieAlgebraSpec
    amplitude: float = 0.0
    label: str = "custom"
    coefficients: tuple | None = None  # invariant data: (Gamma coeffs, gamma coeffs)

    @property
    def is_zero(self) -> bool:
        return self.Gamma is None and self.gamma is None

    def scaled(self, c: float) -> "BoundaryData":
        G, gm = self.Gamma, self.gamma
        return replace(
            self,
            Gamma=None if G is None else (lambda p: c * G(p)),
            gamma=None if gm is None else (lambda p: c * gm(p)),
            amplitude=abs(c) * self.amplitude,
            coefficients=None
            if self.coefficients is None
            else tuple(tuple(c * v for v in part) for part in self.coefficients),
        )


def zero_boundary_data(algebra: LieAlgebraSpec) -> BoundaryData:
    return BoundaryData(None, None, algebra, 0.0, "zero")


def extend_boundary_data(base: Configuration, bd: BoundaryData, cutoff: Cutoff = Cutoff()):
    """Radially constant extension times a cutoff: ``(x^-2 cut Gamma, cut gamma)``."""
    chart = base.chart
    m = chart.dim_interior
    be = base.g.backend
    if bd.algebra != base.algebra:
        from .errors import AlgebraError

        raise AlgebraError("boundary connection and base connection use different algebras")

    if chart.model == BALL:

        def frame(w):
            rho = _safe_norm(w)
            safe = jnp.where(rho > 0, rho, 1.0)
            u = w / safe
            P = jnp.eye(m) - jnp.outer(u, u)
            return rho, safe, u, P

        def ext_G(w):
            rho, safe, u, P = frame(w)
            x = chart.defining_function(w)
            c = cutoff(x)
            xs = jnp.where(c > 0, x, 1.0)
            val = P @ bd.Gamma(u) @ P / safe**2
            return jnp.where(c > 0, c / xs**2, 0.0) * val

        def ext_g(w):
            rho, safe, u, P = frame(w)
            c = cutoff(chart.defining_function(w))
            return c * (P @ bd.gamma(u)) / safe

    else:

        def ext_G(z):
            t = z[0]
            c = cutoff(t)
            ts = jnp.where(c > 0, t, 1.0)
            p = z.at[0].set(0.0)
            return jnp.where(c > 0, c / ts**2, 0.0) * bd.Gamma(p)

        def ext_g(z):
            p = z.at[0].set(0.0)
            return cutoff(z[0]) * bd.gamma(p)

    eG = zeros(2, m, "symmetric", be) if bd.Gamma is None else TensorField(ext_G, 2, m, "symmetric", be)
    eg = zero_form(1, m, bd.algebra, be) if bd.gamma is None else AdValuedForm(ext_g, 1, m, bd.algebra, be)
    return eG, eg


@dataclass(frozen=True)
class DecomposedConfiguration:
    """``g = g0 + e_x(Gamma) + A`` and ``omega = omega0 + e(gamma) + a``."""

    base: Configuration
    boundary: BoundaryData
    A: TensorField
    a: AdValuedForm
    weight: float = 1.5
    cutoff: Cutoff = field(default_factory=Cutoff)

    def __post_init__(self):
        if not 1.0 < self.weight < 2.0:
            raise ConfigurationError(f"weight must lie in (1, 2), got {self.weight}")
        if self.A.rank != 2 or self.a.degree != 1:
            raise ShapeError("perturbation must be a symmetric 2-tensor and a 1-form")

    @property
    def n(self) -> int:
        return self.base.n

    def extension(self):
        return extend_boundary_data(self.base, self.boundary, self.cutoff)

    def reference(self) -> Configuration:
        eG, eg = self.extension()
        return Configuration(self.base.g + eG, self.base.omega + eg, self.base.chart)

    def full(self) -> Configuration:
        ref = self.reference()
        return Configuration(ref.g + self.A, ref.omega + self.a, self.base.chart)

    def with_perturbation(self, A: TensorField, a: AdValuedForm) -> "DecomposedConfiguration":
        return replace(self, A=A, a=a)


def decompose_trivial(base: Configuration, bd: BoundaryData | None = None, **kw) -> DecomposedConfiguration:
    """Decomposition with zero perturbation over ``base``."""
    m = base.chart.dim_interior
    be = base.g.backend
    bd = bd or zero_boundary_data(base.algebra)
    return DecomposedConfiguration(
        base, bd, zeros(2, m, "symmetric", be), zero_form(1, m, base.algebra, be), **kw
    )


# --- residuals -------------------------------------------------------------------


def eym_residual(c: Configuration):
    """``(Ric + n g - K~, d*_omega Omega)``."""
    n = c.n
    g = c.g
    ric = curvature(g).ricci
    Kt = stress_energy(g, c.omega).K_tilde
    Om = curvature_form(c.omega)
    yang_mills = codifferential(g, c.omega, Om)

    def einstein(z):
        return ric(z) + n * g(z) - Kt(z)

    return TensorField(einstein, 2, g.dim, "symmetric", g.backend), yang_mills


def gauge_residual(dc: DecomposedConfiguration):
    """``(Bianchi^{g_ref} A, d*^{g_ref}_{omega_ref} a)`` for the reference pair."""
    ref = dc.reference()
    return bianchi(ref.g, dc.A), codifferential(ref.g, ref.omega, dc.a)


def gauged_residual(dc: DecomposedConfiguration):
    """The gauged map: EYM residual plus ``delta*_g Bianchi A`` and ``d_omega d*_ref a``."""
    full = dc.full()
    g, omega = full.g, full.omega
    einstein, yang_mills = eym_residual(full)
    bA, coul = gauge_residual(dc)
    metric_gauge = delta_star(g, bA)
    conn_gauge = cov_ext_deriv(omega, coul.with_backend(g.backend))

    def Q(z):
        return einstein(z) + metric_gauge(z)

    def R(z):
        return yang_mills(z) + conn_gauge(z)

    return einstein.with_fn(Q), yang_mills.with_fn(R)


def action_density(c: Configuration) -> TensorField:
    """Pointwise ``R + n(n-1) + Q``."""
    n = c.n
    R = curvature(c.g).scalar
    Q = stress_energy(c.g, c.omega).Q
    return R.with_fn(lambda z: R(z) + n * (n - 1) + Q(z))


# --- linearization ------------------------------------------------------------------


def _shift(dc: DecomposedConfiguration, t: float, h, b, bdir):
    A = dc.A + h.scale(t) if h is not None else dc.A
    a = dc.a + b.scale(t) if b is not None else dc.a
    bd = dc.boundary
    if bdir is not None:
        bd = _add_boundary(bd, bdir.scaled(t))
    return replace(dc, A=A, a=a, boundary=bd)


def _add_boundary(b1: BoundaryData, b2: BoundaryData) -> BoundaryData:
    def add(f, g):
        if f is None:
            return g
        if g is None:
            return f
        return lambda p: f(p) + g(p)

    coeffs = None
    if b1.coefficients is not None and b2.coefficients is not None:
        coeffs = tuple(
            tuple(u + v for u, v in zip(p, q)) for p, q in zip(b1.coefficients, b2.coefficients)
        )
    return replace(
        b1, Gamma=add(b1.Gamma, b2.Gamma), gamma=add(b1.gamma, b2.gamma), coefficients=coeffs
    )


def pe_linearization(g: TensorField, k: TensorField) -> TensorField:
    """Derivative of ``g -> Ric + n g``: ``(1/2) Delta_L k + n k - delta* Bianchi k``."""
    n = g.dim - 1
    L = lichnerowicz_shift(g, k, float(n))
    ds = delta_star(g, bianchi(g, k))
    return L.with_fn(lambda z: 0.5 * L(z) - ds(z))


def is_trivial(c: Configuration, points, tol: float = 1e-8) -> bool:
    """Einstein with constant ``-n`` and flat connection at every sample point."""
    n = c.n
    pts = np.atleast_2d(points)
    ric = curvature(c.g).ricci
    e = np.abs(ric.sample(pts) + n * c.g.sample(pts)).max() / max(np.abs(c.g.sample(pts)).max(), 1.0)
    Om = curvature_form(c.omega)
    return bool(e < tol and np.abs(Om.sample(pts)).max() < tol)


def default_probe_points(chart: ChartSpec, count: int = 6, seed: int = 0):
    rng = np.random.default_rng(seed)
    m = chart.dim_interior
    if chart.model == BALL:
        p = rng.normal(size=(count, m))
        p *= (rng.uniform(0.2, 0.8, size=count) / np.linalg.norm(p, axis=1))[:, None]
        return p
    p = rng.uniform(-0.5, 0.5, size=(count, m))
    p[:, 0] = rng.uniform(0.3, 1.5, size=count)
    return p


def linearize_gauged(
    dc: DecomposedConfiguration,
    direction,
    mode: str = "finite-difference",
    step: float = 1e-4,
    boundary_direction: BoundaryData | None = None,
    check_points=None,
):
    """Directional derivative of the gauged map along ``direction = (h, b)``.

    ``boundary_direction`` perturbs the boundary data as well. In
    ``analytic-at-trivial`` mode the decoupled block formula is returned:
    metric block ``L(e_x Gamma') + (1/2) Delta_(n) h`` and connection block
    ``d*_omega d_omega e(gamma') + Delta^1_omega b``.
    """
    h, b = direction
    if mode == "finite-difference":
        Qp, Rp = gauged_residual(_shift(dc, step, h, b, boundary_direction))
        Qm, Rm = gauged_residual(_shift(dc, -step, h, b, boundary_direction))
        return (
            Qp.with_fn(lambda z: (Qp(z) - Qm(z)) / (2 * step)),
            Rp.with_fn(lambda z: (Rp(z) - Rm(z)) / (2 * step)),
        )
    if mode != "analytic-at-trivial":
        raise UnsupportedModeError(f"unknown linearization mode {mode!r}")

    pts = default_probe_points(dc.base.chart) if check_points is None else check_points
    if not is_trivial(dc.base, pts):
        raise UnsupportedModeError("analytic linearization requires a trivial base configuration")
    if not _vanishes(dc, pts):
        raise UnsupportedModeError("analytic linearization is only available at the base point")

    g0, w0 = dc.base.g, dc.base.omega
    n = dc.n
    m = g0.dim
    h = h if h is not None else zeros(2, m, "symmetric", g0.backend)
    b = b if b is not None else zero_form(1, m, w0.algebra, g0.backend)
    lich = lichnerowicz_shift(g0, h, float(n))
    metric_parts = [lich.scale(0.5)]
    conn_parts = [twisted_hodge_laplacian(g0, w0, b)]
    if boundary_direction is not None and not boundary_direction.is_zero:
        eG, eg = extend_boundary_data(dc.base, boundary_direction, dc.cutoff)
        metric_parts.append(pe_linearization(g0, eG))
        conn_parts.append(codifferential(g0, w0, cov_ext_deriv(w0, eg)))
    metric = metric_parts[0]
    for p in metric_parts[1:]:
        metric = metric + p
    conn = conn_parts[0]
    for p in conn_parts[1:]:
        conn = conn + p
    return metric, conn


def _vanishes(dc: DecomposedConfiguration, pts, tol: float = 1e-12) -> bool:
    eG, eg = dc.extension()
    vals = [dc.A.sample(pts), dc.a.sample(pts), eG.sample(pts), eg.sample(pts)]
    return all(np.abs(v).max() <= tol for v in vals)
