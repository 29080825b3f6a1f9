import json

import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eymah.errors import (
    ConfigurationError,
    NonConvergenceError,
    PreconditionError,
    UnsupportedModeError,
    WeightOutOfRangeError,
)
from eymah.eym import Cutoff, trivial_configuration
from eymah.gauge import su2, u1
from eymah.geometry import BALL, ChartSpec
from eymah.invariant import berger_boundary_data, connection_boundary_data, invariant_boundary_data
from eymah.solver import (
    CONNECTION_PROFILES,
    METRIC_PROFILES,
    Discretization,
    InvariantProblem,
    NewtonParams,
    RadialGrid,
    SmallnessWarning,
    base_block_matrix,
    block_interval,
    decay_fit,
    fd_weights,
    newton_solve,
    profile_fields,
    solve_linear_block,
    weighted_norm,
)

EPS = 1e-3


def manufactured_profiles(r):
    """Smooth even profiles with the decay of the weighted spaces at weight 1.5."""
    cr = 0.5 * (1 - r * r)
    metric = cr**1.5 * jnp.array([1.0 + r * r, 0.5 - r * r, 2.0 * r * r - 1.0, 0.3 + r**4])
    conn = cr**0.5 * jnp.array([1.0 - r * r, 0.5 + r * r, 0.2 * r**4 + 1.0])
    return jnp.concatenate([metric, conn])


def anti_self_dual_profile(grid, eps=EPS, cutoff=Cutoff()):
    # e(gamma) + a = eps eta_3 T_3 exactly: a flat-stress Yang-Mills field on the ball
    return eps * (1.0 - np.asarray(cutoff(grid.x)) / grid.rho**2)


@pytest.fixture(scope="module")
def asd_solves():
    return {N: newton_solve(connection_boundary_data(EPS), disc=Discretization(nodes=N)) for N in (32, 64)}


# --- finite differences and grid ---------------------------------------------------------


@given(
    offsets=st.lists(st.integers(-6, 6), min_size=3, max_size=7, unique=True),
    deriv=st.integers(1, 2),
    coeffs=st.lists(st.floats(-1, 1), min_size=7, max_size=7),
)
def test_fd_weights_are_exact_on_low_degree_polynomials(offsets, deriv, coeffs):
    k = len(offsets)
    poly = np.polynomial.Polynomial(coeffs[:k])
    w = fd_weights(offsets, deriv)
    assert np.dot(w, poly(np.array(offsets, float))) == pytest.approx(poly.deriv(deriv)(0.0), abs=1e-8)


def test_fd_weights_need_enough_points():
    with pytest.raises(ValueError):
        fd_weights([0, 1], 2)


def test_grid_layout():
    g = RadialGrid(32, 4)
    assert g.xi[-1] == pytest.approx(1.0)
    assert g.rho[-1] == 1.0 and g.x[-1] == 0.0
    assert np.all(np.diff(g.rho) > 0) and np.all(np.diff(g.x) < 0)
    assert g.rho[0] > 0  # the origin is not a node


def test_jets_converge_at_fourth_order_including_the_folded_and_sliding_rows():
    f = lambda r: np.cos(2 * r) * (1 + r * r)
    d1 = lambda r: -2 * np.sin(2 * r) * (1 + r * r) + 2 * r * np.cos(2 * r)
    errs = []
    for N in (32, 64):
        g = RadialGrid(N, 4)
        J = g.jets(f(g.rho)[None])[:, 0, :]
        errs.append(np.abs(J[:, 1] - d1(g.rho[:N])).max())
    assert np.log2(errs[0] / errs[1]) > 3.5


@pytest.mark.parametrize("kw", [
    {"nodes": 8},
    {"order": 3},
    {"mode": "spectral"},
    {"n": 4},
    {"ansatz": "hedgehog"},
    {"spacing": 0.0},
])
def test_discretization_validation(kw):
    with pytest.raises(ConfigurationError):
        Discretization(**kw)


def test_tensor_grid_mode_has_no_radial_solver():
    disc = Discretization(mode="tensor-grid", n=4)
    assert disc.backend.step == 0.05
    with pytest.raises(UnsupportedModeError):
        newton_solve(connection_boundary_data(EPS), disc=disc)
    with pytest.raises(UnsupportedModeError):
        weighted_norm(np.zeros(10), 1.0, 0, disc)


# --- decay fits and weighted norms ------------------------------------------------------------


def test_decay_fit_recovers_a_power_with_a_smooth_factor():
    x = np.geomspace(1e-3, 0.5, 200)
    fit = decay_fit(x, x**1.5 * (1 + x), window=(0.002, 0.05))
    assert fit.exponent == pytest.approx(1.5, abs=0.05)
    assert not fit.log_correction and not fit.indeterminate


def test_decay_fit_flags_a_logarithmic_correction():
    x = np.geomspace(1e-3, 0.5, 200)
    fit = decay_fit(x, x**2 * np.log(x))
    assert fit.log_correction
    assert fit.exponent == pytest.approx(2.0, abs=1e-6)


def test_decay_fit_below_noise_floor_is_indeterminate():
    x = np.geomspace(1e-3, 0.5, 50)
    fit = decay_fit(x, np.full_like(x, 1e-16))
    assert fit.indeterminate and fit.to_dict()["exponent"] is None


@pytest.mark.parametrize("window", [(0.2, 0.1), (0.0, 0.2), (0.1, 1.5)])
def test_decay_fit_window_must_lie_in_the_collar(window):
    with pytest.raises(ConfigurationError):
        decay_fit(np.geomspace(1e-3, 1, 50), np.ones(50), window)


@given(s=st.floats(0.2, 4.0), c=st.floats(1e-3, 1e3))
def test_decay_fit_exponent_is_scale_free(s, c):
    x = np.geomspace(1e-3, 1.0, 80)
    assert decay_fit(x, c * x**s).exponent == pytest.approx(s, abs=1e-9)


def test_weighted_norm_separates_admissible_weights():
    coarse, fine = Discretization(nodes=32), Discretization(nodes=128)
    good = lambda x: x**1.5
    bad = lambda x: x**1.0
    assert weighted_norm(good, 1.5, 2, coarse) == pytest.approx(weighted_norm(good, 1.5, 2, fine), rel=0.05)
    growth = weighted_norm(bad, 1.5, 0, fine) / weighted_norm(bad, 1.5, 0, coarse)
    assert growth == pytest.approx((coarse.x_min / fine.x_min) ** 0.5, rel=1e-6)


@settings(max_examples=20)
@given(lam=st.floats(-5, 5), k=st.integers(0, 3))
def test_weighted_norm_is_absolutely_homogeneous(lam, k):
    disc = Discretization(nodes=32)
    f = lambda x: x**1.7 * np.cos(x)
    base = weighted_norm(f, 1.5, k, disc)
    assert weighted_norm(lambda x: lam * f(x), 1.5, k, disc) == pytest.approx(abs(lam) * base, rel=1e-12, abs=1e-300)


def test_weighted_norm_derivative_count_is_bounded_by_the_order():
    with pytest.raises(ConfigurationError):
        weighted_norm(lambda x: x, 1.0, 5, Discretization(nodes=32))


# --- linear blocks ---------------------------------------------------------------------------


def test_block_intervals():
    assert block_interval("metric", 3) == (0.0, 3.0)
    assert block_interval("connection", 3) == (1.0, 2.0)
    with pytest.raises(ConfigurationError):
        block_interval("scalar", 3)


@pytest.mark.parametrize("block, weight", [("connection", 2.5), ("connection", 1.0), ("metric", 3.5)])
def test_linear_block_rejects_weights_outside_the_fredholm_interval(block, weight):
    with pytest.raises(WeightOutOfRangeError) as info:
        solve_linear_block(block, disc=Discretization(nodes=32), weight=weight)
    assert info.value.interval == block_interval(block, 3)


def test_linear_block_rhs_shape_is_checked():
    with pytest.raises(ConfigurationError):
        solve_linear_block("metric", rhs=np.zeros((3, 32)), disc=Discretization(nodes=32))


def test_base_block_matrix_is_the_jacobian_at_zero_data():
    disc = Discretization(nodes=32)
    J = base_block_matrix(disc)
    Jx = InvariantProblem(invariant_boundary_data(), disc).jacobian(np.zeros(7 * 32))
    assert np.abs(J - Jx).max() < 1e-12 * np.abs(J).max()


@pytest.mark.parametrize("block, sl", [("metric", METRIC_PROFILES), ("connection", CONNECTION_PROFILES)])
def test_manufactured_solution_converges_at_fourth_order(block, sl):
    errs = []
    for N in (32, 64):
        disc = Discretization(nodes=N)
        sol = solve_linear_block(block, manufactured_profiles, disc=disc)
        exact = np.array([np.asarray(manufactured_profiles(r)) for r in disc.grid.rho]).T[sl]
        errs.append(np.abs(sol.profiles - exact).max())
    assert errs[1] < 1e-5
    assert np.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.5)


def test_zero_source_gives_zero_solution():
    sol = solve_linear_block("metric", disc=Discretization(nodes=32))
    assert np.all(sol.profiles == 0.0)
    assert sol.pointwise_norm().shape == (33,)


# --- Newton ------------------------------------------------------------------------------------


def test_zero_data_needs_no_iterations():
    res = newton_solve(invariant_boundary_data(), disc=Discretization(nodes=32))
    assert res.converged and res.iterations == 0
    assert np.all(res.A == 0) and np.all(res.a == 0)
    assert res.decay["A"].indeterminate


def test_anti_self_dual_data_reproduces_the_exact_solution(asd_solves):
    errs, back = [], []
    for N, res in asd_solves.items():
        assert res.converged and res.iterations <= 3
        exact = anti_self_dual_profile(res.grid)
        errs.append(np.abs(res.a[2] - exact).max() / EPS)
        assert np.all(res.a[:2] == 0.0)
        back.append(np.abs(res.A).max())
    assert errs[1] < 5e-3
    assert np.log2(errs[0] / errs[1]) > 3.5
    # the stress vanishes, so the metric response is truncation error only
    assert back[1] < 1e-5 * EPS
    assert np.log2(back[0] / back[1]) > 3.5


def test_anti_self_dual_solution_recovers_the_equations(asd_solves):
    res = asd_solves[64]
    assert res.recovered
    assert res.off_ansatz < 1e-12
    assert 1.0 < res.decay["a"].exponent < 2.0


def test_result_serializes_and_tabulates(asd_solves):
    res = asd_solves[32]
    d = json.loads(json.dumps(res.to_dict()))
    assert d["nodes"] == 32 and d["label"] == "sigma3-T3"
    header, rows = res.table()
    assert rows.shape == (33, len(header))


def test_evaluate_rebuilds_ambient_components_at_nodes(asd_solves):
    res = asd_solves[32]
    j = 20
    w = np.array([[0.0, res.grid.rho[j], 0.0, 0.0]])
    A, a = res.evaluate(w)
    P = jnp.asarray(np.concatenate([res.A[:, j], res.a[:, j]]))
    A_exact, a_exact = profile_fields(lambda r: P)
    np.testing.assert_allclose(a[0], np.asarray(a_exact(jnp.asarray(w[0]))), atol=1e-14)
    np.testing.assert_allclose(A[0], np.asarray(A_exact(jnp.asarray(w[0]))), atol=1e-14)


def test_berger_data_leaves_the_connection_untouched():
    res = newton_solve(berger_boundary_data(EPS), disc=Discretization(nodes=32))
    assert res.converged
    assert np.all(res.a == 0.0)
    assert res.A_norm > 0
    assert res.gauge_residual["coulomb"] == 0.0


def test_exact_jacobian_strategy_agrees_with_the_default():
    disc = Discretization(nodes=32)
    bd = berger_boundary_data(EPS)
    a = newton_solve(bd, disc=disc)
    b = newton_solve(bd, disc=disc, params=NewtonParams(jacobian="exact"))
    assert np.abs(a.A - b.A).max() < 1e-9 * np.abs(a.A).max()


def test_iteration_cap_raises_with_the_partial_result():
    with pytest.raises(NonConvergenceError) as info:
        newton_solve(connection_boundary_data(EPS), disc=Discretization(nodes=32), params=NewtonParams(max_iter=1))
    partial = info.value.result
    assert partial.iterations == 1 and not partial.converged


def test_large_amplitude_warns():
    with pytest.warns(SmallnessWarning):
        with pytest.raises(NonConvergenceError):
            newton_solve(connection_boundary_data(0.05), disc=Discretization(nodes=32), params=NewtonParams(max_iter=0))


def test_base_must_be_the_trivial_su2_ball():
    with pytest.raises(UnsupportedModeError):
        newton_solve(connection_boundary_data(EPS), base=trivial_configuration(ChartSpec(BALL, 4), u1()))
    base = trivial_configuration(ChartSpec(BALL, 4), su2())
    bumped = type(base)(base.g.scale(2.0), base.omega, base.chart)
    with pytest.raises(PreconditionError):
        newton_solve(connection_boundary_data(EPS), base=bumped, disc=Discretization(nodes=32))


@pytest.mark.parametrize("kw", [{"damping": 0.0}, {"weight": 2.0}, {"tol": -1.0}, {"jacobian": "broyden"}, {"max_iter": -1}])
def test_newton_parameter_validation(kw):
    with pytest.raises(ConfigurationError):
        NewtonParams(**kw)
