"""Left-invariant structures on the three-sphere, seen from the unit ball in R^4.

With ``q = w0 + w1 i + w2 j + w3 k``, the imaginary part of ``conj(q) dq`` gives
three 1-forms ``eta_a(w) = (J_a w) . dw`` that are invariant under left
multiplication by unit quaternions. On ``|w| = 1`` they restrict to a coframe
``sigma_a`` of the round sphere, and ``sigma_a = eta_a / |w|^2`` is their
0-homogeneous extension.
"""

from __future__ import annotations

import jax.numpy as jnp
import numpy as np

from .eym import BoundaryData
from .gauge import LieAlgebraSpec, su2

J = np.zeros((3, 4, 4))
# eta_1 = w0 dw1 - w1 dw0 + w3 dw2 - w2 dw3
J[0, 1, 0], J[0, 0, 1], J[0, 2, 3], J[0, 3, 2] = 1, -1, 1, -1
# eta_2 = w0 dw2 - w2 dw0 + w1 dw3 - w3 dw1
J[1, 2, 0], J[1, 0, 2], J[1, 3, 1], J[1, 1, 3] = 1, -1, 1, -1
# eta_3 = w0 dw3 - w3 dw0 + w2 dw1 - w1 dw2
J[2, 3, 0], J[2, 0, 3], J[2, 1, 2], J[2, 2, 1] = 1, -1, 1, -1


def eta(w):
    """Rows are the coefficient vectors of ``eta_1, eta_2, eta_3`` at ``w``."""
    return jnp.einsum("aij,j->ai", jnp.asarray(J), w)


def berger_tensor(coeffs, w):
    """``sum_a c_a eta_a (x) eta_a`` at ``w``."""
    E = eta(w)
    return jnp.einsum("a,ai,aj->ij", jnp.asarray(coeffs, dtype=float), E, E)


def invariant_boundary_data(Gamma_coeffs=(0.0, 0.0, 0.0), gamma_coeffs=(0.0, 0.0, 0.0), algebra: LieAlgebraSpec | None = None, label="invariant") -> BoundaryData:
    """``Gamma = sum_a c_a sigma_a^2`` and ``gamma = sum_a d_a sigma_a T_a``.

    Coefficients may be traced arrays; ``coefficients`` keeps them for the
    symmetry-reduced solver.
    """
    algebra = algebra or su2()
    c = jnp.asarray(Gamma_coeffs, dtype=float)
    dc = jnp.asarray(gamma_coeffs, dtype=float)
    has_G = not _is_static_zero(Gamma_coeffs)
    has_g = not _is_static_zero(gamma_coeffs)

    def Gamma(u):
        return berger_tensor(c, u)

    def gamma(u):
        return jnp.einsum("a,ai->ia", dc, eta(u))

    amp = _static_amplitude(Gamma_coeffs, gamma_coeffs)
    return BoundaryData(
        Gamma=Gamma if has_G else None,
        gamma=gamma if has_g else None,
        algebra=algebra,
        amplitude=amp,
        label=label,
        coefficients=(tuple(Gamma_coeffs), tuple(gamma_coeffs)),
    )


def _is_static_zero(coeffs) -> bool:
    try:
        return not np.any(np.asarray(coeffs, dtype=float))
    except Exception:  # traced values: treat as present
        return False


def _static_amplitude(*parts) -> float:
    try:
        return float(max(np.abs(np.asarray(p, dtype=float)).max() for p in parts))
    except Exception:
        return float("nan")


def berger_boundary_data(eps: float, coeffs=(1.0, 1.0, -2.0), algebra: LieAlgebraSpec | None = None) -> BoundaryData:
    """Squashing ``Gamma = eps * sum_a c_a sigma_a^2`` (traceless when ``sum c_a = 0``)."""
    c = tuple(eps * float(v) for v in coeffs)
    bd = invariant_boundary_data(c, (0.0, 0.0, 0.0), algebra, label="berger")
    return bd


def connection_boundary_data(eps: float, algebra: LieAlgebraSpec | None = None) -> BoundaryData:
    """``gamma = eps * sigma_3 T_3``: one left-invariant 1-form times one generator."""
    return invariant_boundary_data((0.0, 0.0, 0.0), (0.0, 0.0, eps), algebra, label="sigma3-T3")


def hedgehog_boundary_data(eps: float, algebra: LieAlgebraSpec | None = None) -> BoundaryData:
    """``gamma = eps * sum_a sigma_a T_a``, whose bracket terms do not vanish."""
    return invariant_boundary_data((0.0, 0.0, 0.0), (eps, eps, eps), algebra, label="hedgehog")


def combined_boundary_data(gamma_amp: float, Gamma_amp: float, algebra: LieAlgebraSpec | None = None) -> BoundaryData:
    """Berger squashing of amplitude ``Gamma_amp`` plus ``gamma_amp * sigma_3 T_3``."""
    c = tuple(Gamma_amp * v for v in (1.0, 1.0, -2.0))
    return invariant_boundary_data(c, (0.0, 0.0, gamma_amp), algebra, label="berger-su2")
