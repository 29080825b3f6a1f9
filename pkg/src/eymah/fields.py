"""Pointwise field representation and differentiation backends.

A field is a callable ``z -> array`` on chart coordinates. Derivatives are
produced lazily by the field's backend and always put the new derivative
index first: ``D(f)(z)[a, ...] = d f(z)[...] / d z_a``. Nesting backends
gives higher derivatives without ever forming a grid.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

jax.config.update("jax_enable_x64", True)

Array = jnp.ndarray


def central_weights(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights of the centered first-derivative stencil of even ``order``."""
    if order < 2 or order % 2:
        raise ValueError(f"stencil order must be a positive even integer, got {order}")
    half = order // 2
    offsets = np.array([k for k in range(-half, half + 1) if k != 0], dtype=float)
    # moment conditions sum_k w_k k^j = delta_{j1}, j = 0..order-1 (j = 0 automatic by symmetry)
    V = np.vander(offsets, order, increasing=True).T
    rhs = np.zeros(order)
    rhs[1] = 1.0
    weights = np.linalg.solve(V, rhs)
    return offsets, weights


@dataclass(frozen=True)
class Analytic:
    """Exact derivatives by forward-mode automatic differentiation."""

    name: str = "analytic"

    def jacobian(self, fn: Callable) -> Callable:
        jac = jax.jacfwd(fn)

        def dfn(z):
            return jnp.moveaxis(jac(z), -1, 0)

        return dfn


@dataclass(frozen=True)
class FiniteDifference:
    """Centered finite differences on a lattice of spacing ``step``."""

    step: float
    order: int = 4
    name: str = "finite-difference"

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("finite-difference step must be positive")
        central_weights(self.order)

    def jacobian(self, fn: Callable) -> Callable:
        offsets, weights = central_weights(self.order)
        k = len(offsets)
        h = self.step
        w = jnp.asarray(weights)

        def dfn(z):
            m = z.shape[0]
            shifts = jnp.asarray(
                np.concatenate([np.eye(m)[i] * offsets[:, None] * h for i in range(m)])
            )
            vals = jax.vmap(fn)(z[None, :] + shifts)
            vals = vals.reshape((m, k) + vals.shape[1:])
            return jnp.tensordot(w, vals, axes=([0], [1])) / h

        return dfn


ANALYTIC = Analytic()


@dataclass(frozen=True)
class TensorField:
    """Fully covariant tensor field of rank ``rank`` on an ``dim``-dimensional chart.

    ``fn(z)`` returns an array of shape ``(dim,) * rank``. All tensors are kept
    covariant; indices are raised on demand with a metric.
    """

    fn: Callable[[Array], Array]
    rank: int
    dim: int
    symmetry: str = "none"
    backend: Analytic | FiniteDifference = ANALYTIC

    def __post_init__(self):
        if self.symmetry not in ("none", "symmetric", "antisymmetric"):
            raise ValueError(f"unknown symmetry tag {self.symmetry!r}")

    def __call__(self, z):
        return self.fn(z)

    @property
    def d(self) -> Callable:
        """Partial derivative with the new index first."""
        return self.backend.jacobian(self.fn)

    @cached_property
    def _batched(self):
        return jax.jit(jax.vmap(self.fn))

    def sample(self, points) -> np.ndarray:
        return np.asarray(self._batched(jnp.asarray(points, dtype=float)))

    def with_fn(self, fn, **changes) -> "TensorField":
        return dataclasses.replace(self, fn=fn, **changes)

    def with_backend(self, backend) -> "TensorField":
        return dataclasses.replace(self, backend=backend)

    def __add__(self, other: "TensorField") -> "TensorField":
        _check_compatible(self, other)
        f, g = self.fn, other.fn
        sym = self.symmetry if self.symmetry == other.symmetry else "none"
        return self.with_fn(lambda z: f(z) + g(z), symmetry=sym)

    def __sub__(self, other: "TensorField") -> "TensorField":
        return self + other.scale(-1.0)

    def scale(self, c) -> "TensorField":
        f = self.fn
        return self.with_fn(lambda z: c * f(z))

    def __neg__(self):
        return self.scale(-1.0)


def _check_compatible(a, b):
    from .errors import ShapeError

    if a.rank != b.rank or a.dim != b.dim:
        raise ShapeError(
            f"cannot combine rank-{a.rank} field on dim {a.dim} with rank-{b.rank} field on dim {b.dim}"
        )


def zeros(rank: int, dim: int, symmetry="none", backend=ANALYTIC) -> TensorField:
    shape = (dim,) * rank

    def fn(z):
        return jnp.zeros(shape, dtype=z.dtype)

    return TensorField(fn, rank, dim, symmetry, backend)


def scalar(fn, dim: int, backend=ANALYTIC) -> TensorField:
    return TensorField(fn, 0, dim, "none", backend)
