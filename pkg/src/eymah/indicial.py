"""Indicial families, roots and non-indicial weight intervals.

Numeric extraction works on the half-space model ``t^-2 (dt^2 + dy^2)``,
where the defining function is ``t`` and 0-frame sections ``t^-k e_I`` are
parallel in the boundary directions. Applying an operator to
``t^zeta * t^-k e_I`` and evaluating at ``t = 1`` gives the indicial family
``I(zeta)`` column by column; it is an exact quadratic in ``zeta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np
import scipy.linalg

from .errors import DegenerateGapError, NoGapError, NotUniformlyDegenerateError, ShapeError
from .fields import TensorField
from .gauge import AdValuedForm, twisted_hodge_laplacian, u1, zero_form
from .geometry import (
    HALF_SPACE,
    ChartSpec,
    bianchi,
    delta_star,
    hyperbolic_metric,
    lichnerowicz_shift,
    rough_laplacian,
)

KINDS = ("scalar", "hodge1", "lichnerowicz", "bianchi_composite")


# --- reports ------------------------------------------------------------------------


@dataclass(frozen=True)
class IndicialReport:
    kind: str
    n: int
    mu: float | None
    blocks: dict[str, list[tuple[float, int]]]
    source: str = "closed-form"
    interval: tuple[float, float] | None = None
    radius: float | None = None

    def all_roots(self) -> list[float]:
        return sorted(r for roots in self.blocks.values() for r, _ in roots)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "mu": self.mu,
            "source": self.source,
            "blocks": {k: [{"root": r, "multiplicity": m} for r, m in v] for k, v in self.blocks.items()},
            "interval": list(self.interval) if self.interval else None,
            "radius": self.radius,
        }


def _pair(c: float, disc: float) -> list[float]:
    s = math.sqrt(disc)
    return [0.5 * (c - s), 0.5 * (c + s)]


def fredholm_interval(report: IndicialReport) -> tuple[float, float]:
    """Largest root-free open interval containing ``n/2`` (real parts of roots)."""
    mid = report.n / 2
    roots = report.all_roots()
    if any(abs(r - mid) < 1e-12 for r in roots):
        raise NoGapError(f"indicial root on the critical line Re zeta = {mid}")
    below = [r for r in roots if r < mid]
    above = [r for r in roots if r > mid]
    return (max(below) if below else -math.inf, min(above) if above else math.inf)


def _finish(report: IndicialReport) -> IndicialReport:
    lo, hi = fredholm_interval(report)
    return IndicialReport(
        report.kind, report.n, report.mu, report.blocks, report.source, (lo, hi), 0.5 * (hi - lo)
    )


def lichnerowicz_gap_threshold(n: int) -> float:
    return n - n * n / 8.0


def _block_dims(kind: str, n: int) -> dict[str, int]:
    if kind == "scalar":
        return {"scalar": 1}
    if kind in ("hodge1", "bianchi_composite"):
        return {"normal": 1, "tangential": n}
    return {"trace": 1, "[1]": 1, "[2]": n, "[3]": n * (n + 1) // 2 - 1}


def indicial_roots_closed_form(kind: str, n: int, mu: float | None = None) -> IndicialReport:
    if kind not in KINDS:
        raise ValueError(f"unknown operator kind {kind!r}; choose from {KINDS}")
    if n < 2:
        raise ShapeError("boundary dimension n must be at least 2")
    dims = _block_dims(kind, n)
    if kind == "scalar":
        roots = {"scalar": [0.0, float(n)]}
    elif kind == "hodge1":
        roots = {"normal": [0.0, float(n)], "tangential": [1.0, float(n - 1)]}
    elif kind == "bianchi_composite":
        roots = {"normal": _pair(n, n * n + 8 * n), "tangential": [-1.0, float(n + 1)]}
    else:
        if mu is None:
            raise ValueError("lichnerowicz kind needs a shift mu")
        if mu <= lichnerowicz_gap_threshold(n):
            raise DegenerateGapError(
                f"mu = {mu} <= n - n^2/8 = {lichnerowicz_gap_threshold(n)}: the [3] roots collide or leave the real axis"
            )
        inf = _pair(n, n * n + 8 * mu)
        roots = {
            "trace": inf,
            "[1]": inf,
            "[2]": _pair(n, n * n + 4 * (2 * mu - n + 1)),
            "[3]": _pair(n, n * n + 8 * (mu - n)),
        }
    blocks = {k: [(r, dims[k]) for r in v] for k, v in roots.items()}
    return _finish(IndicialReport(kind, n, mu, blocks))


# --- numeric extraction ------------------------------------------------------------


@dataclass(frozen=True)
class OperatorHandle:
    """An operator on tensors of covariant rank ``rank`` with an adapted fiber basis."""

    name: str
    rank: int
    apply: Callable  # (metric, TensorField) -> TensorField
    basis: list  # list of (label, array of shape (dim,)*rank)
    dim: int
    mu: float | None = None


def fiber_basis(rank: int, m: int):
    """Block-adapted basis of 0-frame tensors at a boundary point (index 0 is normal)."""
    n = m - 1
    if rank == 0:
        return [("scalar", np.ones(()))]
    if rank == 1:
        E = np.eye(m)
        return [("normal", E[0])] + [("tangential", E[i]) for i in range(1, m)]
    if rank != 2:
        raise ShapeError("fiber bases are provided for ranks 0, 1, 2")
    e = lambda i, j: np.outer(np.eye(m)[i], np.eye(m)[j])
    out = [("trace", np.eye(m))]
    u00 = n * e(0, 0) - sum(e(i, i) for i in range(1, m))
    out.append(("[1]", u00))
    out += [("[2]", e(0, i) + e(i, 0)) for i in range(1, m)]
    out += [("[3]", e(i, j) + e(j, i)) for i in range(1, m) for j in range(i + 1, m)]
    out += [("[3]", e(1, 1) - e(k, k)) for k in range(2, m)]
    return out


def operator_handle(kind: str, n: int, mu: float | None = None) -> OperatorHandle:
    m = n + 1
    if kind == "scalar":
        return OperatorHandle(kind, 0, rough_laplacian, fiber_basis(0, m), m)
    if kind == "hodge1":
        alg = u1()

        def hodge(g, f):
            b = AdValuedForm(lambda z: f(z)[:, None], 1, m, alg, g.backend)
            out = twisted_hodge_laplacian(g, zero_form(1, m, alg, g.backend), b)
            return TensorField(lambda z: out(z)[:, 0], 1, m, "none", g.backend)

        return OperatorHandle(kind, 1, hodge, fiber_basis(1, m), m)
    if kind == "bianchi_composite":

        def comp(g, f):
            bd = bianchi(g, delta_star(g, f))
            return bd.scale(2.0)

        return OperatorHandle(kind, 1, comp, fiber_basis(1, m), m)
    if kind == "lichnerowicz":
        if mu is None:
            raise ValueError("lichnerowicz kind needs a shift mu")
        return OperatorHandle(
            kind, 2, lambda g, h: lichnerowicz_shift(g, h, float(mu)), fiber_basis(2, m), m, mu
        )
    raise ValueError(f"unknown operator kind {kind!r}; choose from {KINDS}")


@dataclass(frozen=True)
class IndicialFamily:
    """``I(zeta) = A0 + A1 zeta + A2 zeta^2`` in an adapted fiber basis."""

    name: str
    n: int
    coefficients: np.ndarray  # (3, F, F)
    labels: list[str]
    fit_residual: float
    coupling: float = 0.0
    mu: float | None = None

    def __call__(self, zeta):
        A0, A1, A2 = self.coefficients
        return A0 + A1 * zeta + A2 * zeta**2

    def block(self, label: str) -> np.ndarray:
        idx = [i for i, l in enumerate(self.labels) if l == label]
        return self.coefficients[:, idx][:, :, idx]

    @property
    def block_labels(self) -> list[str]:
        return list(dict.fromkeys(self.labels))


def indicial_family_numeric(
    op: OperatorHandle | str,
    n: int | None = None,
    mu: float | None = None,
    boundary_point=None,
    probes=(0.0, 1.0, 2.0, 3.0),
    tol: float = 1e-8,
) -> IndicialFamily:
    """Fit the indicial family from ``x^zeta`` probes at a boundary point of the half-space."""
    if isinstance(op, str):
        op = operator_handle(op, n, mu)
    basis = op.basis
    m = op.dim
    n = m - 1
    probes = tuple(float(p) for p in probes)
    if len(probes) < 4:
        raise ValueError("need three fitting probes plus at least one redundancy probe")
    chart = ChartSpec(HALF_SPACE, m)
    g = hyperbolic_metric(chart)
    y0 = np.zeros(n) if boundary_point is None else np.asarray(boundary_point, dtype=float)
    z0 = jnp.asarray(np.concatenate([[1.0], y0]))
    B = jnp.asarray(np.stack([b for _, b in basis]))
    F = len(basis)
    k = op.rank

    def column(zeta, coeff):
        E = jnp.tensordot(coeff, B, axes=1)
        f = TensorField(lambda z: z[0] ** (zeta - k) * E, k, m, "symmetric" if k == 2 else "none")
        return op.apply(g, f)(z0)

    zetas = jnp.repeat(jnp.asarray(probes), F)
    coeffs = jnp.tile(jnp.eye(F), (len(probes), 1))
    vals = np.asarray(jax.jit(jax.vmap(column))(zetas, coeffs))
    # express each response in the adapted basis
    Bflat = np.asarray(B).reshape(F, -1)
    cols, *_ = np.linalg.lstsq(Bflat.T, vals.reshape(len(vals), -1).T, rcond=None)
    M = cols.T.reshape(len(probes), F, F).transpose(0, 2, 1)  # M[p, row, col]

    z3 = np.asarray(probes[:3])
    V = np.vander(z3, 3, increasing=True)
    coef = np.linalg.solve(V, M[:3].reshape(3, -1)).reshape(3, F, F)
    scale = max(np.abs(M).max(), 1.0)
    resid = 0.0
    for p, zeta in enumerate(probes[3:], start=3):
        pred = coef[0] + coef[1] * zeta + coef[2] * zeta**2
        resid = max(resid, float(np.abs(pred - M[p]).max() / scale))
    if resid > tol:
        raise NotUniformlyDegenerateError(
            f"probe responses are not quadratic in zeta (relative residual {resid:.2e})"
        )
    labels = [l for l, _ in basis]
    lab = np.array(labels)
    off = lab[:, None] != lab[None, :]
    coupling = float(np.abs(coef[:, off]).max() / scale) if off.any() else 0.0
    return IndicialFamily(op.name, n, coef, labels, resid, coupling, op.mu)


def polynomial_roots(A: np.ndarray) -> np.ndarray:
    """Roots of ``det(A0 + A1 z + A2 z^2)`` by companion linearization."""
    A0, A1, A2 = A
    F = A0.shape[0]
    I, Z = np.eye(F), np.zeros((F, F))
    L = np.block([[Z, I], [-A0, -A1]])
    R = np.block([[I, Z], [Z, A2]])
    ev = scipy.linalg.eigvals(L, R)
    ev = ev[np.isfinite(ev)]
    return np.sort_complex(ev)


def _cluster(values, tol=1e-7):
    out: list[list] = []
    for v in sorted(values, key=lambda c: (c.real, c.imag)):
        if out and abs(v - out[-1][0]) < tol:
            out[-1][1] += 1
        else:
            out.append([v, 1])
    return out


def roots_from_family(family: IndicialFamily) -> IndicialReport:
    blocks = {}
    for label in family.block_labels:
        roots = polynomial_roots(family.block(label))
        if np.abs(roots.imag).max(initial=0) > 1e-9:
            raise DegenerateGapError(f"complex indicial roots in block {label}")
        # refine clustered roots by averaging (repeated blocks give exact multiplicities)
        entries = []
        for v, mult in _cluster(roots.real.astype(complex)):
            entries.append((float(v.real), mult))
        blocks[label] = entries
    kind = family.name
    return _finish(IndicialReport(kind, family.n, family.mu, blocks, source="numeric"))


def indicial_report_numeric(kind: str, n: int, mu: float | None = None, **kw) -> IndicialReport:
    if kind == "lichnerowicz" and mu is not None and mu <= lichnerowicz_gap_threshold(n):
        raise DegenerateGapError(f"mu = {mu} <= n - n^2/8")
    return roots_from_family(indicial_family_numeric(kind, n, mu, **kw))


def compare_reports(a: IndicialReport, b: IndicialReport) -> float:
    """Largest absolute difference between matching block roots."""
    if set(a.blocks) != set(b.blocks):
        raise ValueError("reports have different block structure")
    err = 0.0
    for k in a.blocks:
        ra = sorted(r for r, _ in a.blocks[k])
        rb = sorted(r for r, _ in b.blocks[k])
        if len(ra) != len(rb):
            return math.inf
        err = max(err, max(abs(x - y) for x, y in zip(ra, rb)))
    return err
