"""Radial discretization, linear block solves, Newton continuation and decay fits.

The nonlinear solver works in the SU(2)-invariant reduction on the unit ball in
R^4 (n = 3). Fields are written through left-invariant structures:

    A = r^-2 (P0 delta + P1 w w^T + P2 eta_2 eta_2^T + P3 eta_3 eta_3^T)
    a = sum_a F_a eta_a (x) T_a

with ``r = (1 - |w|^2)/2`` and seven even profiles of ``rho = |w|``. The profiles
live on ``xi`` nodes with ``rho = sin(pi xi / 2)``, so nodes cluster at the
boundary and ``rho = 0`` sits half a cell below the first node (even reflection
closes the stencils there). The last node is the boundary ``rho = 1`` where the
profiles vanish. Each node residual is the full gauged map evaluated at
``w = rho_j e_0`` on a quadratic Taylor jet of the profiles.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property, partial

import jax
import jax.numpy as jnp
import numpy as np
import scipy.linalg as sla
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import (
    ConfigurationError,
    LinearSolverError,
    NonConvergenceError,
    PreconditionError,
    UnsupportedModeError,
    WeightOutOfRangeError,
)
from .eym import (
    BoundaryData,
    Configuration,
    Cutoff,
    DecomposedConfiguration,
    eym_residual,
    extend_boundary_data,
    gauge_residual,
    gauged_residual,
    is_trivial,
    default_probe_points,
    pe_linearization,
    trivial_configuration,
)
from .fields import FiniteDifference, TensorField
from .gauge import AdValuedForm, codifferential, cov_ext_deriv, su2, twisted_hodge_laplacian, zero_form
from .geometry import BALL, ChartSpec, _safe_norm, hyperbolic_metric, lichnerowicz_shift
from .invariant import eta, invariant_boundary_data

MODES = ("symmetric-ode", "tensor-grid")
ANSATZE = ("berger-su2",)
PROFILES = ("P0", "P1", "P2", "P3", "F1", "F2", "F3")
METRIC_PROFILES = slice(0, 4)
CONNECTION_PROFILES = slice(4, 7)
CHART = ChartSpec(BALL, 4)
DEFAULT_AMPLITUDE_BOUND = 1e-2


# --- finite-difference machinery ----------------------------------------------------


def fd_weights(offsets, deriv: int) -> np.ndarray:
    """Weights ``w`` with ``sum_k w_k f(k) = f^(deriv)(0) + O(h^(len - deriv))`` on unit spacing."""
    offsets = np.asarray(offsets, dtype=float)
    k = len(offsets)
    if deriv >= k:
        raise ValueError("stencil too short for the requested derivative")
    V = np.vander(offsets, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    return np.linalg.solve(V, rhs)


def _stencil_matrix(N: int, order: int, deriv: int, rows: int, fold: bool = True) -> np.ndarray:
    """Rows ``0..rows-1`` of a derivative matrix on nodes ``0..N`` (unit spacing).

    Centered stencils where they fit; near node ``N`` the window slides left and
    gains a point so the order is kept. Indices below 0 fold by the even
    reflection ``e -> -e - 1`` about ``xi = 0``; with ``fold=False`` the window
    slides right instead, for values without that parity.
    """
    half = order // 2
    width = order + (1 if deriv == 1 else 2)
    D = np.zeros((rows, N + 1))
    for j in range(rows):
        if j + half > N:
            offs = np.arange(N - j - width + 1, N - j + 1)
        elif j - half < 0 and not fold:
            offs = np.arange(-j, width - j)
        else:
            offs = np.arange(-half, half + 1)
        w = fd_weights(offs, deriv)
        for o, wk in zip(offs, w):
            e = j + o
            if e < 0:
                e = -e - 1
            D[j, e] += wk
    return D


@dataclass(frozen=True)
class RadialGrid:
    """``xi_j = (j + 1/2) h``, ``j = 0..N``, with ``xi_N = 1`` the boundary node."""

    N: int
    order: int

    @cached_property
    def h(self) -> float:
        return 1.0 / (self.N + 0.5)

    @cached_property
    def xi(self) -> np.ndarray:
        return (np.arange(self.N + 1) + 0.5) * self.h

    @cached_property
    def rho(self) -> np.ndarray:
        r = np.sin(0.5 * np.pi * self.xi)
        r[-1] = 1.0
        return r

    @cached_property
    def x(self) -> np.ndarray:
        """Special defining function ``2(1 - rho)/(1 + rho)``."""
        return 2.0 * (1.0 - self.rho) / (1.0 + self.rho)

    @cached_property
    def conformal_radius(self) -> np.ndarray:
        return 0.5 * (1.0 - self.rho**2)

    @cached_property
    def _drho(self):
        c = 0.5 * np.pi
        return c * np.cos(c * self.xi), -(c**2) * np.sin(c * self.xi)

    def xi_matrices(self, rows: int | None = None):
        rows = self.N if rows is None else rows
        h = self.h
        return (
            _stencil_matrix(self.N, self.order, 1, rows) / h,
            _stencil_matrix(self.N, self.order, 2, rows) / h**2,
        )

    @cached_property
    def rho_matrices(self):
        """Identity, ``d/drho`` and ``d2/drho2`` rows for the interior nodes."""
        D1, D2 = self.xi_matrices()
        r1, r2 = (v[: self.N, None] for v in self._drho)
        E = np.eye(self.N, self.N + 1)
        R1 = D1 / r1
        R2 = (D2 - r2 * R1) / r1**2
        return np.stack([E, R1, R2])

    def jets(self, P: np.ndarray):
        """``(N, k, 3)`` value, first and second rho-derivative of profiles ``(k, N+1)``."""
        return np.einsum("tji,ki->jkt", self.rho_matrices, np.asarray(P))

    def x_derivative(self, values: np.ndarray) -> np.ndarray:
        """``x d/dx`` on all nodes; one-sided at both ends, so no parity is assumed."""
        D1 = _stencil_matrix(self.N, self.order, 1, self.N + 1, fold=False) / self.h
        # x d/dx = x (dxi/dx) d/dxi, and dx/drho = -4/(1+rho)^2
        r1 = self._drho[0]
        out = np.zeros_like(values, dtype=float)
        inner = slice(0, self.N)
        dxdrho = -4.0 / (1.0 + self.rho) ** 2
        dfdxi = values @ D1.T
        out[..., inner] = (self.x / (dxdrho * r1))[inner] * dfdxi[..., inner]
        return out


@dataclass(frozen=True)
class Discretization:
    """Discretization choice.

    ``symmetric-ode`` uses the invariant radial reduction with ``nodes`` radial
    nodes; ``tensor-grid`` only supplies a finite-difference backend of spacing
    ``spacing`` for pointwise operators (identity checks at coarse resolution).
    """

    mode: str = "symmetric-ode"
    nodes: int = 128
    order: int = 4
    n: int = 3
    ansatz: str = "berger-su2"
    spacing: float = 0.05

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown discretization mode {self.mode!r}; expected one of {MODES}")
        if self.nodes < 16:
            raise ConfigurationError(f"need at least 16 radial nodes, got {self.nodes}")
        if self.order < 2 or self.order % 2:
            raise ConfigurationError(f"differentiation order must be even and >= 2, got {self.order}")
        if self.mode == "symmetric-ode":
            if self.ansatz not in ANSATZE:
                raise ConfigurationError(f"unknown ansatz {self.ansatz!r}; expected one of {ANSATZE}")
            if self.n != 3:
                raise ConfigurationError("the invariant reduction lives on the 4-ball (n = 3)")
        if self.spacing <= 0:
            raise ConfigurationError("tensor-grid spacing must be positive")

    @cached_property
    def grid(self) -> RadialGrid:
        return RadialGrid(self.nodes, self.order)

    @property
    def backend(self):
        return FiniteDifference(self.spacing, self.order)

    @property
    def x_min(self) -> float:
        return float(self.grid.x[self.nodes - 1])

    @property
    def x_max(self) -> float:
        return float(self.grid.x[0])


def _require_ode(disc: Discretization, what: str):
    if disc.mode != "symmetric-ode":
        raise UnsupportedModeError(f"{what} is only available in symmetric-ode mode")


# --- invariant fields -----------------------------------------------------------------


def _jet_value(jet, k, r, r0):
    d = r - r0
    return jet[k, 0] + jet[k, 1] * d + 0.5 * jet[k, 2] * d * d


def profile_fields(profile_fn, backend=None):
    """Metric perturbation and connection built from ``profile_fn(rho) -> (7,)``."""
    from .fields import ANALYTIC

    backend = backend or ANALYTIC
    alg = su2()

    def A_fn(w):
        r = _safe_norm(w)
        P = profile_fn(r)
        E = eta(w)
        Ah = (
            P[0] * jnp.eye(4)
            + P[1] * jnp.outer(w, w)
            + P[2] * jnp.outer(E[1], E[1])
            + P[3] * jnp.outer(E[2], E[2])
        )
        cr = 0.5 * (1.0 - r * r)
        return Ah / cr**2

    def a_fn(w):
        P = profile_fn(_safe_norm(w))
        return (P[4:7, None] * eta(w)).T

    return TensorField(A_fn, 2, 4, "symmetric", backend), AdValuedForm(a_fn, 1, 4, alg, backend)


def _jet_fields(jet, r0):
    return profile_fields(lambda r: jnp.stack([_jet_value(jet, k, r, r0) for k in range(7)]))


def _frame(rho0, Q, R):
    """Reduce ambient residual components at ``rho0 e_0`` to 0-frame profile equations."""
    cr = 0.5 * (1.0 - rho0**2)
    Qh = cr**2 * Q
    Rh = cr * R
    s = rho0**2
    eqs = jnp.stack(
        [
            Qh[1, 1],
            (Qh[0, 0] - Qh[1, 1]) / s,
            (Qh[2, 2] - Qh[1, 1]) / s,
            (Qh[3, 3] - Qh[1, 1]) / s,
            Rh[1, 0] / rho0,
            Rh[2, 1] / rho0,
            Rh[3, 2] / rho0,
        ]
    )
    mask_Q = 1.0 - jnp.eye(4)
    mask_R = jnp.ones((4, 3)).at[1, 0].set(0.0).at[2, 1].set(0.0).at[3, 2].set(0.0)
    off = jnp.maximum(jnp.max(jnp.abs(Qh * mask_Q)), jnp.max(jnp.abs(Rh * mask_R)))
    return eqs, off


def _decomposed(jet, r0, coeffs, cutoff):
    base = trivial_configuration(CHART, su2())
    bd = invariant_boundary_data(coeffs[0], coeffs[1])
    A, a = _jet_fields(jet, r0)
    return DecomposedConfiguration(base, bd, A, a, 1.5, cutoff)


def _node_point(r0):
    return jnp.zeros(4).at[0].set(r0)


@partial(jax.jit, static_argnums=(3,))
def _gauged_nodes(jets, rho, coeffs, cutoff):
    def one(jet, r0):
        Q, R = gauged_residual(_decomposed(jet, r0, coeffs, cutoff))
        w = _node_point(r0)
        return _frame(r0, Q(w), R(w))

    return jax.vmap(one)(jets, rho)


@partial(jax.jit, static_argnums=(3,))
def _gauged_jacobian_nodes(jets, rho, coeffs, cutoff):
    def one(jet, r0):
        Q, R = gauged_residual(_decomposed(jet, r0, coeffs, cutoff))
        w = _node_point(r0)
        return _frame(r0, Q(w), R(w))[0]

    return jax.vmap(jax.jacfwd(one))(jets, rho)


@partial(jax.jit, static_argnums=(3,))
def _diagnostic_nodes(jets, rho, coeffs, cutoff):
    def one(jet, r0):
        dc = _decomposed(jet, r0, coeffs, cutoff)
        w = _node_point(r0)
        cr = 0.5 * (1.0 - r0**2)
        bA, coul = gauge_residual(dc)
        E, Y = eym_residual(dc.full())
        return (
            jnp.max(jnp.abs(cr * bA(w))),
            jnp.max(jnp.abs(coul(w))),
            jnp.max(jnp.abs(cr**2 * E(w))),
            jnp.max(jnp.abs(cr * Y(w))),
        )

    return jax.vmap(one)(jets, rho)


def _block_node(jet, r0):
    """Decoupled base blocks ``(1/2) Delta_(n)`` and ``Delta^1`` at one node."""
    g0 = hyperbolic_metric(CHART)
    w0 = zero_form(1, 4, su2())
    A, a = _jet_fields(jet, r0)
    w = _node_point(r0)
    Q = 0.5 * lichnerowicz_shift(g0, A, 3.0)(w)
    R = twisted_hodge_laplacian(g0, w0, a)(w)
    return _frame(r0, Q, R)[0]


@jax.jit
def _block_jacobian_nodes(rho):
    zero = jnp.zeros((7, 3))
    return jax.vmap(jax.jacfwd(_block_node), in_axes=(None, 0))(zero, rho)


@partial(jax.jit, static_argnums=(2,))
def _source_nodes(rho, coeffs, cutoff):
    """Linearized boundary contribution ``(L(e_x Gamma), d* d e(gamma))`` at the nodes."""
    base = trivial_configuration(CHART, su2())
    bd = invariant_boundary_data(coeffs[0], coeffs[1])
    eG, eg = extend_boundary_data(base, bd, cutoff)
    mQ = pe_linearization(base.g, eG)
    mR = codifferential(base.g, base.omega, cov_ext_deriv(base.omega, eg))

    def one(r0):
        w = _node_point(r0)
        return _frame(r0, mQ(w), mR(w))[0]

    return jax.vmap(one)(rho)


def _assemble(node_jac, grid: RadialGrid) -> np.ndarray:
    """Dense ``(7N, 7N)`` matrix from node derivatives ``(N, 7, 7, 3)`` w.r.t. jets."""
    D = grid.rho_matrices[:, :, : grid.N]
    J = np.einsum("jekt,tji->ejki", np.asarray(node_jac), D)
    n = 7 * grid.N
    return J.reshape(n, n)


def _coeff_array(bd: BoundaryData):
    if bd.coefficients is None:
        raise UnsupportedModeError(
            "the invariant reduction needs left-invariant boundary data (coefficients)"
        )
    return jnp.asarray(np.asarray(bd.coefficients, dtype=float).reshape(2, 3))


def _pad(U: np.ndarray, N: int) -> np.ndarray:
    P = np.zeros((7, N + 1))
    P[:, :N] = U.reshape(7, N)
    return P


# --- norms and decay ------------------------------------------------------------------


def metric_pointwise_norm(P: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``|A|_g`` at the nodes from metric profiles ``(4, N+1)``."""
    s = grid.rho**2
    diag = np.stack([P[0] + s * P[1], P[0], P[0] + s * P[2], P[0] + s * P[3]])
    return np.sqrt((diag**2).sum(axis=0))


def connection_pointwise_norm(F: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``|a|_g`` at the nodes from connection profiles ``(3, N+1)``."""
    return grid.conformal_radius * grid.rho * np.sqrt((np.asarray(F) ** 2).sum(axis=0))


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    window: tuple[float, float]
    samples: int
    residual: float
    log_correction: bool
    indeterminate: bool = False
    reason: str = ""

    def to_dict(self):
        return {
            "exponent": None if self.indeterminate else self.exponent,
            "window": list(self.window),
            "samples": self.samples,
            "residual": self.residual,
            "log_correction": self.log_correction,
            "indeterminate": self.indeterminate,
            "reason": self.reason,
        }


def decay_fit(x, values, window=(0.01, 0.2), noise_floor: float = 1e-13) -> DecayFit:
    """Log-log slope of ``|values|`` against ``x`` over ``window``.

    A second model ``s log x + log|log x|`` is fitted too; when it explains the
    samples far better the log-correction flag is set and its slope reported.
    """
    x = np.asarray(x, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    lo, hi = window
    if not 0 < lo < hi <= 1.0:
        raise ConfigurationError(f"decay window must lie inside the collar (0, 1], got {window}")
    sel = (x >= lo) & (x <= hi)
    if sel.sum() < 4:
        raise ConfigurationError(f"only {int(sel.sum())} samples in the window {window}")
    xs, vs = x[sel], v[sel]
    if vs.max() <= noise_floor or np.any(vs == 0):
        return DecayFit(float("nan"), window, int(sel.sum()), float("nan"), False, True, "field below noise floor")
    lx, lv = np.log(xs), np.log(vs)
    M = np.stack([lx, np.ones_like(lx)], axis=1)
    c1, *_ = np.linalg.lstsq(M, lv, rcond=None)
    r1 = float(np.sqrt(np.mean((M @ c1 - lv) ** 2)))
    lv2 = lv - np.log(np.abs(lx))
    c2, *_ = np.linalg.lstsq(M, lv2, rcond=None)
    r2 = float(np.sqrt(np.mean((M @ c2 - lv2) ** 2)))
    if r2 < 0.1 * r1:
        return DecayFit(float(c2[0]), window, int(sel.sum()), r2, True)
    return DecayFit(float(c1[0]), window, int(sel.sum()), r1, False)


def weighted_norm(values, delta: float, k: int, disc: Discretization) -> float:
    """Discrete ``x^delta C^k`` proxy: ``max_j |x^-delta (x d/dx)^i f|`` over ``i <= k``.

    ``values`` are nodal values (boundary node included or omitted) or a callable of ``x``.
    """
    _require_ode(disc, "weighted_norm")
    if k > disc.order:
        raise ConfigurationError(f"derivative count {k} exceeds the differentiation order {disc.order}")
    grid = disc.grid
    if callable(values):
        f = np.asarray(values(grid.x), dtype=float)
    else:
        f = np.asarray(values, dtype=float)
        if f.shape[-1] == grid.N:
            f = np.concatenate([f, np.zeros(f.shape[:-1] + (1,))], axis=-1)
    inner = slice(0, grid.N)
    w = grid.x[inner] ** (-delta)
    best = 0.0
    cur = f
    for i in range(k + 1):
        best = max(best, float(np.max(np.abs(w * cur[..., inner]))))
        if i < k:
            cur = grid.x_derivative(cur)
    return best


# --- linear blocks ----------------------------------------------------------------------

BLOCKS = ("metric", "connection")


def block_interval(block: str, n: int) -> tuple[float, float]:
    if block == "metric":
        return (0.0, float(n))
    if block == "connection":
        return (1.0, float(n - 1))
    raise ConfigurationError(f"unknown block {block!r}; expected one of {BLOCKS}")


def check_weight(block: str, n: int, weight: float) -> None:
    lo, hi = block_interval(block, n)
    if not lo < weight < hi:
        raise WeightOutOfRangeError(weight, (lo, hi), block)


@dataclass(frozen=True)
class LinearSolution:
    block: str
    profiles: np.ndarray  # (k, N+1), boundary node included
    weight: float
    residual: float
    grid: RadialGrid

    def pointwise_norm(self) -> np.ndarray:
        if self.block == "metric":
            return metric_pointwise_norm(self.profiles, self.grid)
        return connection_pointwise_norm(self.profiles, self.grid)


def base_block_matrix(disc: Discretization) -> np.ndarray:
    """Jacobian of the node equations at the trivial base from the decoupled blocks."""
    grid = disc.grid
    return _assemble(_block_jacobian_nodes(jnp.asarray(grid.rho[: grid.N])), grid)


def exact_block_rhs(block: str, profile_fn, disc: Discretization) -> np.ndarray:
    """Block operator applied to exact profile functions at the nodes (manufactured sources)."""
    _require_ode(disc, "exact_block_rhs")
    grid = disc.grid
    g0 = hyperbolic_metric(CHART)
    A, a = profile_fields(profile_fn)
    if block == "metric":
        op = lichnerowicz_shift(g0, A, 3.0)

        def one(r0):
            w = _node_point(r0)
            return _frame(r0, 0.5 * op(w), jnp.zeros((4, 3)))[0][METRIC_PROFILES]

    else:
        op = twisted_hodge_laplacian(g0, zero_form(1, 4, su2()), a)

        def one(r0):
            w = _node_point(r0)
            return _frame(r0, jnp.zeros((4, 4)), op(w))[0][CONNECTION_PROFILES]

    return np.asarray(jax.jit(jax.vmap(one))(jnp.asarray(grid.rho[: grid.N]))).T


def solve_linear_block(
    block: str,
    rhs=None,
    boundary_source: BoundaryData | None = None,
    disc: Discretization | None = None,
    weight: float = 1.5,
    tol: float = 1e-9,
    cutoff: Cutoff = Cutoff(),
) -> LinearSolution:
    """Solve ``(1/2) Delta_(n) A = rhs - L(e_x Gamma)`` or ``Delta^1 a = rhs - d* d e(gamma)``.

    ``rhs`` is an array of node values ``(k, N)`` for the block's profiles or a
    profile function ``rho -> (7,)`` whose block image is used as the source.
    The profiles vanish at the boundary node, which selects the decaying branch.
    """
    disc = disc or Discretization()
    check_weight(block, disc.n, weight)
    _require_ode(disc, "solve_linear_block")
    grid = disc.grid
    N = grid.N
    sl = METRIC_PROFILES if block == "metric" else CONNECTION_PROFILES
    k = sl.stop - sl.start
    if rhs is None:
        f = np.zeros((k, N))
    elif callable(rhs):
        f = exact_block_rhs(block, rhs, disc)
    else:
        f = np.asarray(rhs, dtype=float)
        if f.shape != (k, N):
            raise ConfigurationError(f"rhs must have shape {(k, N)}, got {f.shape}")
    if boundary_source is not None and not boundary_source.is_zero:
        src = np.asarray(_source_nodes(jnp.asarray(grid.rho[:N]), _coeff_array(boundary_source), cutoff)).T
        f = f - src[sl]
    J = base_block_matrix(disc).reshape(7, N, 7, N)[sl, :, sl, :].reshape(k * N, k * N)
    b = f.reshape(-1)
    try:
        lu = sla.lu_factor(J)
    except (ValueError, sla.LinAlgError) as exc:
        raise LinearSolverError(f"{block} block factorization failed: {exc}") from exc
    u = sla.lu_solve(lu, b)
    res = float(np.max(np.abs(J @ u - b)) / max(1.0, float(np.max(np.abs(b)))))
    if not np.all(np.isfinite(u)) or res > tol:
        raise LinearSolverError(f"{block} block residual {res:.3e} above tolerance {tol:.1e}")
    P = np.zeros((k, N + 1))
    P[:, :N] = u.reshape(k, N)
    return LinearSolution(block, P, weight, res, grid)


# --- Newton continuation --------------------------------------------------------------------


class SmallnessWarning(UserWarning):
    """Boundary amplitude above the empirical smallness bound."""


@dataclass(frozen=True)
class NewtonParams:
    tol: float = 1e-10
    max_iter: int = 10
    damping: float = 1.0
    linear_tol: float = 1e-10
    weight: float = 1.5
    amplitude_bound: float = DEFAULT_AMPLITUDE_BOUND
    jacobian: str = "blocks"  # "blocks": base-block LU then matrix-free; "exact": jet Jacobian
    fd_step: float = 1e-6
    min_step: float = 2.0**-10

    def __post_init__(self):
        if self.tol <= 0 or self.linear_tol <= 0 or self.fd_step <= 0:
            raise ConfigurationError("tolerances and difference step must be positive")
        if self.max_iter < 0:
            raise ConfigurationError("max_iter must be non-negative")
        if not 0 < self.damping <= 1:
            raise ConfigurationError(f"damping must lie in (0, 1], got {self.damping}")
        if not 1 < self.weight < 2:
            raise ConfigurationError(f"weight must lie in (1, 2), got {self.weight}")
        if self.jacobian not in ("blocks", "exact"):
            raise ConfigurationError(f"unknown jacobian strategy {self.jacobian!r}")


@dataclass
class SolveResult:
    """Outcome of a Newton solve in the invariant reduction."""

    A: np.ndarray  # metric profiles (4, N+1)
    a: np.ndarray  # connection profiles (3, N+1)
    grid: RadialGrid
    converged: bool
    iterations: int
    history: list
    gauged_residual: float
    gauge_residual: dict
    eym_residual: dict
    off_ansatz: float
    decay: dict
    warnings: list = field(default_factory=list)
    linear_iterations: list = field(default_factory=list)
    label: str = ""
    amplitude: float = 0.0

    @property
    def A_pointwise(self) -> np.ndarray:
        return metric_pointwise_norm(self.A, self.grid)

    @property
    def a_pointwise(self) -> np.ndarray:
        return connection_pointwise_norm(self.a, self.grid)

    @property
    def A_norm(self) -> float:
        return float(self.A_pointwise.max())

    @property
    def a_norm(self) -> float:
        return float(self.a_pointwise.max())

    @property
    def recovered(self) -> bool:
        return self.converged and max(self.gauge_residual.values()) < 1e-8 and max(self.eym_residual.values()) < 1e-7

    def profile_splines(self):
        """Cubic splines in ``rho`` of the seven profiles (zero at the boundary)."""
        P = np.concatenate([self.A, self.a])
        return CubicSpline(self.grid.rho, P, axis=1)

    def evaluate(self, points):
        """Ambient components of ``(A, a)`` at ``points`` inside the ball."""
        spl = self.profile_splines()
        pts = np.atleast_2d(points)
        rho = np.linalg.norm(pts, axis=1)
        P = spl(np.clip(rho, self.grid.rho[0], 1.0))
        s = self.grid.rho[0]
        P = np.where(rho < s, spl(s)[:, None] * np.ones_like(rho), P)
        Aout, aout = [], []
        for w, p in zip(pts, P.T):
            E = np.asarray(eta(w))
            cr = 0.5 * (1 - w @ w)
            Ah = p[0] * np.eye(4) + p[1] * np.outer(w, w) + p[2] * np.outer(E[1], E[1]) + p[3] * np.outer(E[2], E[2])
            Aout.append(Ah / cr**2)
            aout.append((p[4:7, None] * E).T)
        return np.array(Aout), np.array(aout)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "history": [float(v) for v in self.history],
            "linear_iterations": list(self.linear_iterations),
            "gauged_residual": self.gauged_residual,
            "gauge_residual": dict(self.gauge_residual),
            "eym_residual": dict(self.eym_residual),
            "off_ansatz": self.off_ansatz,
            "decay": {k: v.to_dict() for k, v in self.decay.items()},
            "A_norm": self.A_norm,
            "a_norm": self.a_norm,
            "nodes": self.grid.N,
            "warnings": list(self.warnings),
            "label": self.label,
            "amplitude": self.amplitude,
        }

    def table(self):
        """Rows ``(rho, x, |A|_g, |a|_g, P0..F3)`` for CSV output."""
        g = self.grid
        cols = [g.rho, g.x, self.A_pointwise, self.a_pointwise, *self.A, *self.a]
        header = ["rho", "x", "A_norm", "a_norm", *PROFILES]
        return header, np.stack(cols, axis=1)


class InvariantProblem:
    """Node residual map ``U -> F(U)`` of the gauged equations in the invariant reduction."""

    def __init__(self, bd: BoundaryData, disc: Discretization, cutoff: Cutoff = Cutoff()):
        _require_ode(disc, "the nonlinear solve")
        self.grid = disc.grid
        self.N = disc.grid.N
        self.coeffs = _coeff_array(bd)
        self.cutoff = cutoff
        self._rho = jnp.asarray(self.grid.rho[: self.N])

    def jets(self, U):
        return jnp.asarray(self.grid.jets(_pad(np.asarray(U), self.N)))

    def residual(self, U) -> np.ndarray:
        E, _ = _gauged_nodes(self.jets(U), self._rho, self.coeffs, self.cutoff)
        return np.asarray(E).T.reshape(-1)

    def off_ansatz(self, U) -> float:
        _, off = _gauged_nodes(self.jets(U), self._rho, self.coeffs, self.cutoff)
        return float(np.max(off))

    def jacobian(self, U) -> np.ndarray:
        return _assemble(_gauged_jacobian_nodes(self.jets(U), self._rho, self.coeffs, self.cutoff), self.grid)

    def diagnostics(self, U):
        bA, coul, ein, ym = (
            np.asarray(v) for v in _diagnostic_nodes(self.jets(U), self._rho, self.coeffs, self.cutoff)
        )
        return (
            {"bianchi": float(bA.max()), "coulomb": float(coul.max())},
            {"einstein": float(ein.max()), "yang_mills": float(ym.max())},
        )


def _check_base(base: Configuration | None):
    if base is None:
        return
    if base.chart != CHART or base.algebra != su2():
        raise UnsupportedModeError("the invariant reduction needs the hyperbolic 4-ball with su(2)")
    if not is_trivial(base, default_probe_points(base.chart)):
        raise PreconditionError("Newton continuation needs a trivial base configuration")


def newton_solve(
    bd: BoundaryData,
    base: Configuration | None = None,
    params: NewtonParams = NewtonParams(),
    disc: Discretization | None = None,
    cutoff: Cutoff = Cutoff(),
    decay_window=(0.01, 0.2),
) -> SolveResult:
    """Damped Newton iteration on the gauged map around the trivial base.

    The first step uses the decoupled base blocks (exact at the base point);
    later steps run GMRES on centered directional differences of the residual,
    preconditioned by the same block factorization. Backtracking halves the
    step until the residual decreases, down to ``params.min_step``.
    """
    disc = disc or Discretization()
    _require_ode(disc, "newton_solve")
    _check_base(base)
    notes = []
    amp = float(np.max(np.abs(np.asarray(bd.coefficients, dtype=float)))) if bd.coefficients is not None else bd.amplitude
    if amp > params.amplitude_bound:
        msg = f"boundary amplitude {amp:.3g} exceeds the smallness bound {params.amplitude_bound:.3g}"
        warnings.warn(msg, SmallnessWarning, stacklevel=2)
        notes.append(msg)

    prob = InvariantProblem(bd, disc, cutoff)
    N = prob.N
    U = np.zeros(7 * N)
    F = prob.residual(U)
    norm = float(np.max(np.abs(F)))
    history = [norm]
    lin_its = []
    lu = None
    it = 0
    converged = norm < params.tol
    while not converged and it < params.max_iter:
        if lu is None:
            lu = sla.lu_factor(base_block_matrix(disc))
        if params.jacobian == "exact":
            step = -np.linalg.solve(prob.jacobian(U), F)
            lin_its.append(1)
        elif it == 0:
            step = -sla.lu_solve(lu, F)
            lin_its.append(1)
        else:
            step, k = _krylov_step(prob, U, F, lu, params)
            lin_its.append(k)
        lam = params.damping
        while True:
            Ut = U + lam * step
            Ft = prob.residual(Ut)
            nt = float(np.max(np.abs(Ft)))
            if np.isfinite(nt) and nt < norm:
                break
            lam *= 0.5
            if lam < params.min_step:
                result = _finish(prob, U, history, False, it, lin_its, notes, bd, amp, decay_window)
                raise NonConvergenceError(
                    f"line search stalled at iteration {it + 1} with residual {norm:.3e}", result
                )
        U, F, norm = Ut, Ft, nt
        history.append(norm)
        it += 1
        converged = norm < params.tol
    result = _finish(prob, U, history, converged, it, lin_its, notes, bd, amp, decay_window)
    if not converged:
        raise NonConvergenceError(
            f"no convergence in {params.max_iter} iterations (residual {norm:.3e})", result
        )
    return result


def _krylov_step(prob: InvariantProblem, U, F, lu, params: NewtonParams):
    scale = max(1.0, float(np.max(np.abs(U))))

    def matvec(v):
        nv = float(np.max(np.abs(v)))
        if nv == 0:
            return np.zeros_like(v)
        tau = params.fd_step * scale / nv
        return (prob.residual(U + tau * v) - prob.residual(U - tau * v)) / (2 * tau)

    n = U.size
    Jop = LinearOperator((n, n), matvec=matvec, dtype=float)
    M = LinearOperator((n, n), matvec=lambda r: sla.lu_solve(lu, r), dtype=float)
    count = [0]
    step, info = gmres(
        Jop, -F, M=M, rtol=params.linear_tol, atol=0.0, restart=40, maxiter=5,
        callback=lambda _: count.__setitem__(0, count[0] + 1), callback_type="pr_norm",
    )
    if info < 0:
        raise LinearSolverError(f"GMRES breakdown (info={info})")
    return step, count[0]


def _finish(prob, U, history, converged, it, lin_its, notes, bd, amp, window) -> SolveResult:
    P = _pad(U, prob.N)
    gauge, eym = prob.diagnostics(U)
    grid = prob.grid
    decay = {
        "A": decay_fit(grid.x, metric_pointwise_norm(P[METRIC_PROFILES], grid), window),
        "a": decay_fit(grid.x, connection_pointwise_norm(P[CONNECTION_PROFILES], grid), window),
    }
    return SolveResult(
        A=P[METRIC_PROFILES],
        a=P[CONNECTION_PROFILES],
        grid=grid,
        converged=converged,
        iterations=it,
        history=history,
        gauged_residual=float(history[-1]),
        gauge_residual=gauge,
        eym_residual=eym,
        off_ansatz=prob.off_ansatz(U),
        decay=decay,
        warnings=notes,
        linear_iterations=lin_its,
        label=bd.label,
        amplitude=amp,
    )
