"""Executable checks of the exact off-shell identities and the spectral estimates.

Random fields are low-order polynomials in the chart coordinates, so the
analytic backend differentiates them exactly and finite-difference ladders
separate algebra mistakes from truncation error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import jax
import jax.numpy as jnp
import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import DegenerateFieldError, GenerationError, PreconditionError
from .eym import Configuration, decompose_trivial, gauged_residual, is_trivial
from .fields import ANALYTIC, FiniteDifference, TensorField
from .gauge import (
    AdValuedForm,
    algebra_preset,
    codifferential,
    cov_ext_deriv,
    curvature_form,
    stress_energy,
    twisted_hodge_laplacian,
    yang_mills_current_fn,
)
from .geometry import (
    BALL,
    ChartSpec,
    bianchi,
    curvature,
    delta_star,
    divergence,
    hyperbolic_metric,
    lichnerowicz_shift,
    metric_inner,
    rough_laplacian,
    trace,
)

MACHINE_TOL = 1e-12
KAPPA_TOL = 1e-13
ORDER_SLACK = 0.5


@dataclass
class IdentityReport:
    """Residuals of one identity along a refinement ladder plus the exact-derivative value."""

    name: str
    steps: list
    residuals: list
    order: float | None
    analytic: float | None
    passed: bool
    target_order: float | None = None
    holds_off_shell: bool = True
    note: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "steps": list(self.steps),
            "residuals": [float(r) for r in self.residuals],
            "order": self.order,
            "analytic": self.analytic,
            "passed": self.passed,
            "target_order": self.target_order,
            "holds_off_shell": self.holds_off_shell,
            "note": self.note,
            **({"extra": self.extra} if self.extra else {}),
        }


def fitted_order(steps, residuals) -> float:
    """Least-squares slope of ``log residual`` against ``log step``."""
    s = np.log(np.asarray(steps, dtype=float))
    r = np.log(np.maximum(np.asarray(residuals, dtype=float), 1e-300))
    return float(np.polyfit(s, r, 1)[0])


# --- random smooth fields ---------------------------------------------------------------


@dataclass(frozen=True)
class RandomDraw:
    """Polynomial metric and connection coefficients; ``points`` lie in the patch."""

    metric: tuple  # (C1 (m,m,m), C2 (m,m,m,m))
    connection: tuple  # (W0 (m,d), W1 (m,d,m), W2 (m,d,m,m))
    points: np.ndarray
    seed: int


def polynomial_metric(C1, C2, m: int, backend=ANALYTIC) -> TensorField:
    def fn(z):
        A = jnp.eye(m) + jnp.einsum("ijk,k->ij", C1, z) + jnp.einsum("ijkl,k,l->ij", C2, z, z)
        return 0.5 * (A + A.T)

    return TensorField(fn, 2, m, "symmetric", backend)


def polynomial_connection(W0, W1, W2, m: int, algebra, backend=ANALYTIC) -> AdValuedForm:
    def fn(z):
        return W0 + jnp.einsum("iak,k->ia", W1, z) + jnp.einsum("iakl,k,l->ia", W2, z, z)

    return AdValuedForm(fn, 1, m, algebra, backend)


def random_draw(seed: int, n: int, algebra="su2", patch: float = 0.3, count: int = 6, retries: int = 10, min_eig: float = 0.2) -> RandomDraw:
    """Draw metric/connection coefficients until the metric is safely positive definite on the patch."""
    alg = algebra_preset(algebra) if isinstance(algebra, str) else algebra
    m, d = n + 1, alg.dim
    rng = np.random.default_rng(seed)
    for _ in range(retries):
        C1 = rng.normal(size=(m, m, m)) * 0.15
        C2 = rng.normal(size=(m, m, m, m)) * 0.05
        probe = rng.uniform(-patch, patch, size=(64, m))
        corners = patch * (2 * ((np.arange(2**m)[:, None] >> np.arange(m)) & 1) - 1)
        G = polynomial_metric(C1, C2, m).sample(np.concatenate([probe, corners]))
        if np.linalg.eigvalsh(G)[:, 0].min() > min_eig:
            break
    else:
        raise GenerationError(f"no positive-definite metric after {retries} draws (seed {seed})")
    W = (
        rng.normal(size=(m, d)) * 0.5,
        rng.normal(size=(m, d, m)) * 0.5,
        rng.normal(size=(m, d, m, m)) * 0.3,
    )
    pts = rng.uniform(-patch / 1.5, patch / 1.5, size=(count, m))
    return RandomDraw((C1, C2), W, pts, seed)


IDENTITIES = (
    "einstein-divergence",
    "bianchi-einstein",
    "bianchi-stress",
    "bianchi-stress-current",
    "double-codifferential",
    "curvature-bianchi",
    "kappa-trace",
)

# bianchi-stress holds only when the Yang-Mills equation does
OFF_SHELL = {name: name != "bianchi-stress" for name in IDENTITIES}


@lru_cache(maxsize=None)
def _identity_kernel(backend, n: int, algebra_name: str):
    """Jitted ``(coeffs, points) -> {name: (residual, scale)}`` for one backend."""
    alg = algebra_preset(algebra_name)
    m = n + 1

    def kernel(C1, C2, W0, W1, W2, pts):
        g = polynomial_metric(C1, C2, m, backend)
        w = polynomial_connection(W0, W1, W2, m, alg, backend)
        cv = curvature(g)
        ricn = cv.ricci + g.scale(float(n))
        se = stress_energy(g, w)
        Om = curvature_form(w)
        dsO = codifferential(g, w, Om)
        J = yang_mills_current_fn(g, w)
        bK = bianchi(g, se.K_tilde)
        trK = trace(g, se.K)
        pairs = {
            "einstein-divergence": (divergence(g, cv.einstein), cv.einstein),
            "bianchi-einstein": (bianchi(g, ricn), ricn),
            "bianchi-stress": (bK, se.K_tilde),
            "bianchi-stress-current": (bK.with_fn(lambda z: bK(z) - J(z)), se.K_tilde),
            "double-codifferential": (codifferential(g, w, dsO), dsO),
            "curvature-bianchi": (cov_ext_deriv(w, Om), Om),
            "kappa-trace": (trK.with_fn(lambda z: trK(z) - 0.5 * (n - 3) * se.Q(z)), se.Q),
        }
        out = {}
        for name, (res, base) in pairs.items():
            r = jax.vmap(res.fn)(pts)
            b = jax.vmap(base.fn)(pts)
            out[name] = (jnp.max(jnp.abs(r)), jnp.maximum(jnp.max(jnp.abs(b)), 1.0))
        return out

    return jax.jit(kernel)


def identity_residuals(draw: RandomDraw, n: int, backend=ANALYTIC, algebra="su2") -> dict:
    """Relative residual of every identity at the draw's points."""
    name = algebra if isinstance(algebra, str) else algebra.name
    out = _identity_kernel(backend, n, name)(*draw.metric, *draw.connection, jnp.asarray(draw.points))
    return {k: float(r) / float(s) for k, (r, s) in out.items()}


def identity_suite(seed: int = 0, n: int = 3, levels: int = 3, order: int = 4, h0: float = 0.1, algebra="su2") -> list[IdentityReport]:
    """Identity reports for one random draw: finite-difference ladder ``h0 / 2^k`` plus analytic."""
    if n < 2:
        raise PreconditionError(f"identity suite needs n >= 2, got {n}")
    if levels < 2:
        raise PreconditionError("need at least two refinement levels to fit an order")
    draw = random_draw(seed, n, algebra)
    steps = [h0 / 2**k for k in range(levels)]
    ladder = [identity_residuals(draw, n, FiniteDifference(h, order), algebra) for h in steps]
    exact = identity_residuals(draw, n, ANALYTIC, algebra)
    reports = []
    for name in IDENTITIES:
        res = [lvl[name] for lvl in ladder]
        if name == "kappa-trace":
            worst = max(res + [exact[name]])
            ok = worst < KAPPA_TOL
            reports.append(
                IdentityReport(name, steps, res, None, exact[name], ok, None, True, "pointwise algebraic")
            )
            continue
        note = "" if OFF_SHELL[name] else "needs the Yang-Mills equation; off-shell the divergence equals the current"
        if max(res) < MACHINE_TOL:
            # the stencils commute, so d_omega Omega = 0 survives discretization
            ok = exact[name] < MACHINE_TOL
            reports.append(IdentityReport(name, steps, res, None, exact[name], ok, float(order), OFF_SHELL[name], "exact at every level"))
            continue
        p = fitted_order(steps, res)
        ok = p >= order - ORDER_SLACK and exact[name] < MACHINE_TOL
        reports.append(IdentityReport(name, steps, res, p, exact[name], ok, float(order), OFF_SHELL[name], note))
    return reports


def trivial_identity_residuals(n: int = 3, count: int = 6, seed: int = 0) -> dict:
    """Analytic residuals for ``(g_H, 0)`` on the ball at random interior points."""
    chart = ChartSpec(BALL, n + 1)
    alg = algebra_preset("su2")
    g = hyperbolic_metric(chart)
    w = AdValuedForm(lambda z: jnp.zeros((n + 1, alg.dim)), 1, n + 1, alg)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-0.4, 0.4, size=(count, n + 1))
    cv = curvature(g)
    se = stress_energy(g, w)
    Om = curvature_form(w)
    res = {
        "einstein-divergence": divergence(g, cv.einstein),
        "bianchi-einstein": bianchi(g, cv.ricci + g.scale(float(n))),
        "bianchi-stress": bianchi(g, se.K_tilde),
        "double-codifferential": codifferential(g, w, codifferential(g, w, Om)),
        "einstein-condition": cv.ricci + g.scale(float(n)),
    }
    scale = float(np.abs(g.sample(pts)).max())
    return {k: float(np.abs(v.sample(pts)).max()) / scale for k, v in res.items()}


# --- McKean quotients -----------------------------------------------------------------------


def bump(s):
    """Smooth profile supported in ``|s| < 1``."""
    inside = s * s < 1.0
    t = jnp.where(inside, 1.0 - s * s, 1.0)
    return jnp.where(inside, jnp.exp(1.0 - 1.0 / t), 0.0)


def sphere_rule(n: int, resolution: int = 6):
    """Product Gauss rule on the unit ``S^n``: points ``(K, n+1)`` and weights summing to the area."""
    # build S^k from S^{k-1}: x = (t, sqrt(1-t^2) y), weight (1-t^2)^{(k-2)/2}
    circle = 2 * resolution
    phi = 2 * np.pi * np.arange(circle) / circle
    pts = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    wts = np.full(circle, 2 * np.pi / circle)
    for k in range(2, n + 1):
        a = (k - 2) / 2.0
        t, wt = roots_jacobi(resolution, a, a)
        s = np.sqrt(1 - t**2)
        pts = np.concatenate(
            [np.concatenate([np.full((len(pts), 1), ti), si * pts], axis=1) for ti, si in zip(t, s)]
        )
        wts = np.concatenate([wi * wts for wi in wt])
    return pts, wts


@dataclass(frozen=True)
class PolarQuadrature:
    """Geodesic polar quadrature on ``H^{n+1}`` in the ball: ``dV = sinh^n r dr dS``."""

    n: int
    radius: float
    radial: int = 48
    angular: int = 6
    inner: float = 0.0

    def nodes(self):
        t, wt = roots_legendre(self.radial)
        a, b = self.inner, self.radius
        r = 0.5 * (b - a) * (t + 1) + a
        wr = 0.5 * (b - a) * wt * np.sinh(r) ** self.n
        th, wth = sphere_rule(self.n, self.angular)
        pts = (np.tanh(r / 2)[:, None, None] * th[None]).reshape(-1, self.n + 1)
        w = (wr[:, None] * wth[None]).reshape(-1)
        return pts, w, r


def _scalar_energy(u_fn, chart):
    grad = jax.grad(u_fn)

    def dens(w):
        cr = chart.conformal_radius(w)
        gu = grad(w)
        return cr**2 * jnp.dot(gu, gu), u_fn(w) ** 2

    return dens


def _tensor_energy(h_fn, chart):
    g = hyperbolic_metric(chart)
    h = TensorField(h_fn, 2, chart.dim_interior, "symmetric")
    lap = rough_laplacian(g, h)

    def dens(w):
        gi = jnp.linalg.inv(g(w))
        H = h(w)
        return metric_inner(gi, lap(w), H, 2), metric_inner(gi, H, H, 2)

    return dens


def quadrature_quotient(dens, quad: PolarQuadrature) -> float:
    pts, w, _ = quad.nodes()
    num, den = jax.jit(jax.vmap(dens))(jnp.asarray(pts))
    den_int = float(np.dot(w, np.asarray(den)))
    if not den_int > 0:
        raise DegenerateFieldError("test field has zero L2 norm")
    return float(np.dot(w, np.asarray(num))) / den_int


def mckean_quotient(kind: str, field_fn, n: int = 3, support_radius: float = 3.0, quadrature: PolarQuadrature | None = None) -> float:
    """Rayleigh quotient of a compactly supported test field on the hyperbolic ball.

    ``scalar``: ``int |du|^2 / int u^2``. ``traceless-sym2``: ``int <nabla* nabla h, h> / int |h|^2``.
    ``support_radius`` is the geodesic radius of the support, used for the quadrature.
    """
    chart = ChartSpec(BALL, n + 1)
    quad = quadrature or PolarQuadrature(n, support_radius)
    if kind == "scalar":
        dens = _scalar_energy(field_fn, chart)
    elif kind == "traceless-sym2":
        dens = _tensor_energy(field_fn, chart)
    else:
        raise PreconditionError(f"unknown McKean kind {kind!r}")
    return quadrature_quotient(dens, quad)


def mckean_bound(kind: str, n: int) -> float:
    return n * n / 4.0 + (2.0 if kind == "traceless-sym2" else 0.0)


def _geodesic_radius(w):
    rho = jnp.sqrt(jnp.sum(w * w) + 1e-300)
    return 2.0 * jnp.arctanh(rho)


def _scalar_poly(C, w, radius):
    c0, c1, c2 = C
    return bump(_geodesic_radius(w) / radius) * (c0 + jnp.dot(c1, w) + w @ c2 @ w)


def _traceless_poly(C, w, radius):
    S0, S1 = C
    cr = 0.5 * (1.0 - jnp.sum(w * w))
    return bump(_geodesic_radius(w) / radius) * (S0 + jnp.einsum("kij,k->ij", S1, w)) / cr**2


def _draw_scalar(rng, m):
    return (rng.normal(), rng.normal(size=m), rng.normal(size=(m, m)) * 0.5)


def _draw_traceless(rng, m):
    def traceless(M):
        S = 0.5 * (M + M.T)
        return S - np.trace(S) / m * np.eye(m)

    S0 = traceless(rng.normal(size=(m, m)))
    S1 = np.stack([traceless(rng.normal(size=(m, m))) for _ in range(m)]) * 0.7
    return (S0, S1)


def random_scalar_field(rng, n: int, radius: float):
    """Bump of geodesic radius ``radius`` times a random quadratic polynomial."""
    C = _draw_scalar(rng, n + 1)
    return lambda w: _scalar_poly(C, w, radius)


def random_traceless_field(rng, n: int, radius: float):
    """Bump times a random traceless linear matrix polynomial, scaled like ``g_H``."""
    C = _draw_traceless(rng, n + 1)
    return lambda w: _traceless_poly(C, w, radius)


@lru_cache(maxsize=None)
def _sweep_kernel(kind: str, n: int):
    chart = ChartSpec(BALL, n + 1)
    poly = _scalar_poly if kind == "scalar" else _traceless_poly
    energy = _scalar_energy if kind == "scalar" else _tensor_energy

    def kernel(C, radius, pts, w):
        num, den = jax.vmap(energy(lambda z: poly(C, z, radius), chart))(pts)
        return jnp.dot(w, num), jnp.dot(w, den)

    return jax.jit(kernel)


def scalar_dilation_field(n: int, radius: float):
    """``cosh(r)^(-n/2)`` cut off at geodesic radius ``radius``."""

    def u(w):
        r = _geodesic_radius(w)
        return jnp.cosh(r) ** (-n / 2) * bump(r / radius)

    return u


def tensor_dilation_field(inner: float, outer: float, coeffs=(1.0, 1.0, -2.0)):
    """``cosh(r)^(-3/2) beta(r) sum_a c_a e_a (x) e_a`` on ``H^4``, ``e_a = sinh(r) sigma_a``.

    ``beta`` is a bump on ``(inner, outer)``; ``sum c_a = 0`` keeps the tensor traceless.
    """
    from .invariant import eta

    c = jnp.asarray(coeffs, dtype=float)
    mid, half = 0.5 * (inner + outer), 0.5 * (outer - inner)

    def h(w):
        r = _geodesic_radius(w)
        rho2 = jnp.sum(w * w)
        E = eta(w) / rho2  # sigma_a
        prof = jnp.cosh(r) ** (-1.5) * bump((r - mid) / half) * jnp.sinh(r) ** 2
        return prof * jnp.einsum("a,ai,aj->ij", c, E, E)

    return h


@dataclass
class McKeanSweep:
    kind: str
    n: int
    bound: float
    quotients: list
    minimum: float
    all_above: bool


def mckean_random_sweep(kind: str, n: int = 3, count: int = 100, seed: int = 0, radii=(0.8, 3.0)) -> McKeanSweep:
    """Quotients of ``count`` random compactly supported fields with random support radii."""
    if kind not in ("scalar", "traceless-sym2"):
        raise PreconditionError(f"unknown McKean kind {kind!r}")
    rng = np.random.default_rng(seed)
    kernel = _sweep_kernel(kind, n)
    draw = _draw_scalar if kind == "scalar" else _draw_traceless
    qs = []
    for _ in range(count):
        R = float(rng.uniform(*radii))
        C = draw(rng, n + 1)
        pts, w, _ = PolarQuadrature(n, R, radial=24, angular=5).nodes()
        num, den = kernel(C, R, jnp.asarray(pts), jnp.asarray(w))
        if not float(den) > 0:
            raise DegenerateFieldError("test field has zero L2 norm")
        qs.append(float(num) / float(den))
    b = mckean_bound(kind, n)
    return McKeanSweep(kind, n, b, qs, min(qs), all(q >= b for q in qs))


def mckean_dilation_sweep(kind: str, n: int = 3, radii=(2.0, 4.0, 6.0, 8.0)) -> McKeanSweep:
    """Quotients along a family spreading toward the bottom of the spectrum."""
    qs = []
    for R in radii:
        if kind == "scalar":
            quad = PolarQuadrature(n, R, radial=160, angular=2)
            qs.append(mckean_quotient(kind, scalar_dilation_field(n, R), n, R, quad))
        else:
            if n != 3:
                raise PreconditionError("the invariant tensor family lives on H^4")
            quad = PolarQuadrature(n, R, radial=160, angular=4, inner=0.5)
            qs.append(mckean_quotient(kind, tensor_dilation_field(0.5, R), n, R, quad))
    b = mckean_bound(kind, n)
    return McKeanSweep(kind, n, b, qs, min(qs), all(q >= b for q in qs))


# --- Bochner identity for the Bianchi composite ----------------------------------------------

BOCHNER_READINGS = ("bianchi-delta-star", "divergence-delta-star")


@dataclass
class BochnerReport:
    """Both readings of ``2 X delta* eta = (nabla* nabla - Ric) eta`` with ``X`` the Bianchi map or the divergence."""

    readings: dict  # name -> IdentityReport
    holding: str | None
    rhs_norm: float

    def to_dict(self):
        return {
            "readings": {k: v.to_dict() for k, v in self.readings.items()},
            "holding": self.holding,
            "rhs_norm": self.rhs_norm,
        }


def _bochner_parts(g: TensorField, eta: TensorField):
    ds = delta_star(g, eta)
    ric = curvature(g).ricci
    lap = rough_laplacian(g, eta)
    lhs_b = bianchi(g, ds)
    lhs_d = divergence(g, ds)

    def rhs(z):
        return lap(z) - ric(z) @ jnp.linalg.solve(g(z), eta(z))

    return lhs_b, lhs_d, rhs


def bochner_bianchi_check(g_fn, eta_fn, points, steps=(0.1, 0.05, 0.025), order: int = 4, dim: int | None = None) -> BochnerReport:
    """Evaluate both readings on the analytic backend and along a finite-difference ladder."""
    pts = jnp.asarray(np.atleast_2d(points))
    m = pts.shape[1] if dim is None else dim

    def residuals(backend):
        g = TensorField(g_fn, 2, m, "symmetric", backend)
        eta = TensorField(eta_fn, 1, m, "none", backend)
        lb, ld, rhs = _bochner_parts(g, eta)
        R = jax.vmap(rhs)(pts)
        scale = max(float(jnp.max(jnp.abs(jax.vmap(eta.fn)(pts)))), 1e-300)
        return (
            float(jnp.max(jnp.abs(2 * jax.vmap(lb.fn)(pts) - R))) / scale,
            float(jnp.max(jnp.abs(2 * jax.vmap(ld.fn)(pts) - R))) / scale,
            float(jnp.max(jnp.abs(R))) / scale,
        )

    exact = residuals(ANALYTIC)
    ladder = [residuals(FiniteDifference(h, order)) for h in steps]
    readings = {}
    for i, name in enumerate(BOCHNER_READINGS):
        res = [lvl[i] for lvl in ladder]
        if max(res) < MACHINE_TOL:
            p, ok = float("inf"), exact[i] < MACHINE_TOL
        else:
            p = fitted_order(steps, res)
            ok = exact[i] < MACHINE_TOL and p >= order - ORDER_SLACK
        readings[name] = IdentityReport(name, list(steps), res, p, exact[i], ok, float(order))
    holding = [k for k, v in readings.items() if v.passed]
    return BochnerReport(readings, holding[0] if len(holding) == 1 else None, exact[2])


# --- decoupling of the linearization -----------------------------------------------------------


@dataclass
class DecouplingReport:
    amplitudes: list
    entries: dict  # name -> IdentityReport (order = log-log slope in t)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries.values())

    def to_dict(self):
        return {"amplitudes": list(self.amplitudes), "entries": {k: v.to_dict() for k, v in self.entries.items()}, "passed": self.passed}


def default_probe_perturbation(chart: ChartSpec, algebra, seed: int = 0):
    """Smooth ``(h, b)`` built from random polynomials (``h`` scaled like ``g_H``)."""
    rng = np.random.default_rng(seed)
    m, d = chart.dim_interior, algebra.dim
    S0 = rng.normal(size=(m, m))
    S1 = rng.normal(size=(m, m, m)) * 0.5
    B0 = rng.normal(size=(m, d))
    B1 = rng.normal(size=(m, d, m)) * 0.5

    def h_fn(z):
        S = S0 + jnp.einsum("ijk,k->ij", S1, z)
        return 0.5 * (S + S.T) / chart.conformal_radius(z) ** 2

    def b_fn(z):
        return B0 + jnp.einsum("iak,k->ia", B1, z)

    return TensorField(h_fn, 2, m, "symmetric"), AdValuedForm(b_fn, 1, m, algebra)


def linearization_decoupling_check(
    base: Configuration,
    amplitudes=(1e-2, 1e-3, 1e-4),
    probe=None,
    points=None,
    slope_tol: float = 0.1,
) -> DecouplingReport:
    """Mixed differences for the off-diagonal blocks, forward differences for the diagonal ones.

    Off-diagonal: ``|Q(tA, tb) - Q(tA, 0)| / t`` and ``|R(tA, tb) - R(0, tb)| / t``.
    Diagonal: ``|(Q(tA, 0) - Q(0, 0)) / t - (1/2) Delta_(n) A|`` and the connection analogue
    against ``Delta^1_{omega_0}``. All four decay like ``t``.
    """
    from .eym import default_probe_points

    pts = default_probe_points(base.chart) if points is None else np.atleast_2d(points)
    if not is_trivial(base, pts):
        raise PreconditionError("decoupling check needs a trivial base (Ric = -n g, flat connection)")
    h, b = probe or default_probe_perturbation(base.chart, base.algebra)
    h = h.with_backend(base.g.backend)
    b = b.with_backend(base.g.backend)
    dc0 = decompose_trivial(base)
    n = base.n
    pts = jnp.asarray(pts)

    def evaluate(tA, tb):
        dc = dc0.with_perturbation(dc0.A + h.scale(tA), dc0.a + b.scale(tb))
        Q, R = gauged_residual(dc)
        return np.asarray(jax.vmap(Q.fn)(pts)), np.asarray(jax.vmap(R.fn)(pts))

    g0, w0 = base.g, base.omega
    metric_block = np.asarray(jax.vmap(lichnerowicz_shift(g0, h, float(n)).fn)(pts)) * 0.5
    conn_block = np.asarray(jax.vmap(twisted_hodge_laplacian(g0, w0, b).fn)(pts))
    Q00, R00 = evaluate(0.0, 0.0)
    mscale = max(np.abs(metric_block).max(), 1e-300)
    cscale = max(np.abs(conn_block).max(), 1e-300)
    rows = {k: [] for k in ("metric-from-connection", "connection-from-metric", "metric-block", "connection-block")}
    for t in amplitudes:
        Qab, Rab = evaluate(t, t)
        Qa0, Ra0 = evaluate(t, 0.0)
        Q0b, R0b = evaluate(0.0, t)
        rows["metric-from-connection"].append(np.abs(Qab - Qa0).max() / t / mscale)
        rows["connection-from-metric"].append(np.abs(Rab - R0b).max() / t / cscale)
        rows["metric-block"].append(np.abs((Qa0 - Q00) / t - metric_block).max() / mscale)
        rows["connection-block"].append(np.abs((R0b - R00) / t - conn_block).max() / cscale)
    entries = {}
    for name, res in rows.items():
        if max(res) < MACHINE_TOL:
            # abelian connection block: the map is exactly linear in b
            entries[name] = IdentityReport(name, list(amplitudes), res, None, None, True, 1.0, note="exact")
            continue
        p = fitted_order(amplitudes, res)
        ok = abs(p - 1.0) <= slope_tol
        entries[name] = IdentityReport(name, list(amplitudes), res, p, None, ok, 1.0)
    return DecouplingReport(list(amplitudes), entries)
