import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eymah.errors import DegenerateGapError, NoGapError, ShapeError
from eymah.indicial import (
    KINDS,
    IndicialReport,
    compare_reports,
    fredholm_interval,
    indicial_report_numeric,
    indicial_roots_closed_form,
    lichnerowicz_gap_threshold,
)


# frozen values from the characteristic quadratics zeta (n - zeta) = c, solved by hand
@pytest.mark.parametrize("kind, n, mu, blocks, interval", [
    ("scalar", 3, None, {"scalar": [0.0, 3.0]}, (0.0, 3.0)),
    ("hodge1", 4, None, {"normal": [0.0, 4.0], "tangential": [1.0, 3.0]}, (1.0, 3.0)),
    ("bianchi_composite", 3, None, {"normal": [(3 - math.sqrt(33)) / 2, (3 + math.sqrt(33)) / 2], "tangential": [-1.0, 4.0]}, (-1.0, 4.0)),
    ("lichnerowicz", 3, 3.0, {"trace": [(3 - math.sqrt(33)) / 2, (3 + math.sqrt(33)) / 2], "[2]": [-1.0, 4.0], "[3]": [0.0, 3.0]}, (0.0, 3.0)),
    ("lichnerowicz", 3, 4.0, {"[3]": [(3 - math.sqrt(17)) / 2, (3 + math.sqrt(17)) / 2]}, ((3 - math.sqrt(17)) / 2, (3 + math.sqrt(17)) / 2)),
])
def test_closed_form_roots_against_hand_values(kind, n, mu, blocks, interval):
    rep = indicial_roots_closed_form(kind, n, mu)
    for name, roots in blocks.items():
        assert [r for r, _ in rep.blocks[name]] == pytest.approx(roots, abs=1e-14)
    assert rep.interval == pytest.approx(interval, abs=1e-14)
    assert rep.radius == pytest.approx(0.5 * (interval[1] - interval[0]))


def test_multiplicities_follow_block_dimensions():
    rep = indicial_roots_closed_form("lichnerowicz", 4, 4.0)
    assert {k: v[0][1] for k, v in rep.blocks.items()} == {"trace": 1, "[1]": 1, "[2]": 4, "[3]": 9}


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("kind", ["scalar", "hodge1", "bianchi_composite"])
def test_numeric_extraction_reproduces_closed_forms(kind, n):
    closed = indicial_roots_closed_form(kind, n)
    numeric = indicial_report_numeric(kind, n)
    assert compare_reports(closed, numeric) < 1e-10
    assert numeric.interval == pytest.approx(closed.interval, abs=1e-10)


def test_numeric_lichnerowicz_near_the_gap_threshold():
    n = 4
    mu = lichnerowicz_gap_threshold(n) + 0.05
    assert compare_reports(indicial_roots_closed_form("lichnerowicz", n, mu), indicial_report_numeric("lichnerowicz", n, mu)) < 1e-10


@pytest.mark.parametrize("n", [2, 3, 6])
def test_shift_at_or_below_threshold_is_degenerate(n):
    with pytest.raises(DegenerateGapError):
        indicial_roots_closed_form("lichnerowicz", n, lichnerowicz_gap_threshold(n))


def test_argument_validation():
    with pytest.raises(ValueError):
        indicial_roots_closed_form("lichnerowicz", 3)
    with pytest.raises(ValueError):
        indicial_roots_closed_form("dirac", 3)
    with pytest.raises(ShapeError):
        indicial_roots_closed_form("scalar", 1)


def test_one_forms_on_a_two_dimensional_boundary_have_no_gap():
    with pytest.raises(NoGapError):
        indicial_roots_closed_form("hodge1", 2)


def test_root_on_the_critical_line_has_no_gap():
    rep = IndicialReport("scalar", 4, None, {"scalar": [(2.0, 1), (5.0, 1)]})
    with pytest.raises(NoGapError):
        fredholm_interval(rep)


@given(
    kind=st.sampled_from(KINDS),
    n=st.integers(3, 9),
    excess=st.floats(1e-3, 20.0),
)
def test_roots_pair_symmetrically_and_the_interval_is_root_free(kind, n, excess):
    mu = lichnerowicz_gap_threshold(n) + excess if kind == "lichnerowicz" else None
    rep = indicial_roots_closed_form(kind, n, mu)
    roots = np.array(rep.all_roots())
    np.testing.assert_allclose(np.sort(n - roots), roots, atol=1e-9)
    lo, hi = rep.interval
    assert lo < n / 2 < hi
    assert not np.any((roots > lo + 1e-12) & (roots < hi - 1e-12))
    assert np.any(np.isclose(roots, lo)) and np.any(np.isclose(roots, hi))
