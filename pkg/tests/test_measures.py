import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tentlab.exceptions import PreconditionError
from tentlab.measures import (ConvexPotential, DiscreteMeasure, GapReport, GaussianParams, Grid, GridDensity,
                              GridFunction, TransportPlan, Verdict, barycenter, dumps, is_centered,
                              is_symmetric, is_unconditional, loads, second_moment, support_rank)

finite = st.floats(-50, 50, allow_nan=False)


@st.composite
def discrete_measures(draw, d=1, max_atoms=8):
    n = draw(st.integers(1, max_atoms))
    pts = draw(st.lists(st.lists(finite, min_size=d, max_size=d), min_size=n, max_size=n))
    w = draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n))
    return DiscreteMeasure.from_unnormalized(np.array(pts), np.array(w))


def test_barycenter_examples(grid1d):
    np.testing.assert_allclose(barycenter(DiscreteMeasure([[-1.0], [1.0]], [0.5, 0.5])), [0.0])
    np.testing.assert_allclose(barycenter(DiscreteMeasure([[2.0, 3.0]], [1.0])), [2.0, 3.0])
    gam = GaussianParams.standard(1).on_grid(grid1d)
    assert abs(barycenter(gam)[0]) <= 1e-10


def test_second_moment_examples(grid1d):
    assert second_moment(DiscreteMeasure([[0.0]], [1.0])) == 0.0
    assert second_moment(DiscreteMeasure([[-1.0], [1.0]], [0.5, 0.5])) == 1.0
    gam = GaussianParams.standard(1).on_grid(grid1d)
    assert abs(second_moment(gam) - 1.0) <= 1e-6


def test_centering_and_symmetry_predicates():
    g2 = Grid.regular((-8.0, -8.0), (8.0, 8.0), (128, 128))
    assert is_centered(GaussianParams.standard(2).on_grid(g2))
    assert not is_centered(GaussianParams([1.0, 0.0], np.eye(2)).on_grid(g2))
    lap = GridDensity.from_function(lambda x, y: np.exp(-np.abs(x) - y ** 2), g2)
    assert is_unconditional(lap)
    assert is_symmetric(lap)
    skew = GridDensity.from_function(lambda x, y: np.exp(-np.abs(x - 0.5) - y ** 2), g2)
    assert not is_unconditional(skew)


def test_unconditional_reflect_oracle():
    # independent reflect-and-compare on the raw values
    g2 = Grid.regular((-8.0, -8.0), (8.0, 8.0), (64, 64))
    lap = GridDensity.from_function(lambda x, y: np.exp(-np.abs(x) - y ** 2), g2)
    v = lap.values
    np.testing.assert_allclose(v, v[::-1, :], rtol=0, atol=1e-15)
    np.testing.assert_allclose(v, v[:, ::-1], rtol=0, atol=1e-15)


@given(discrete_measures(d=2))
def test_reflection_negates_barycenter_and_keeps_second_moment(m):
    r = m.reflected()
    np.testing.assert_array_equal(barycenter(r), -barycenter(m))
    assert second_moment(r) == second_moment(m)


@given(discrete_measures(d=1), st.integers(1, 4))
def test_zero_weight_atoms_are_dropped(m, k):
    pts = np.vstack([m.points, np.full((k, 1), 99.0)])
    w = np.concatenate([m.weights, np.zeros(k)])
    m2 = DiscreteMeasure(pts, w)
    assert m2.size == m.size
    np.testing.assert_allclose(barycenter(m2), barycenter(m), rtol=0, atol=1e-12)
    assert second_moment(m2) == pytest.approx(second_moment(m), rel=1e-12, abs=1e-12)


@given(st.lists(st.floats(0.0, 5.0), min_size=4, max_size=40).filter(lambda v: sum(v) > 0))
def test_grid_density_normalises(vals):
    g = Grid.regular(-1.0, 3.0, len(vals))
    gd = GridDensity(g, np.array(vals))
    assert abs(gd.values.sum() * g.cell_volume - 1.0) <= 1e-9


def test_discrete_measure_rejects_bad_input():
    with pytest.raises(ValueError):
        DiscreteMeasure([[0.0], [1.0]], [0.5, 0.6])
    with pytest.raises(ValueError):
        DiscreteMeasure([[np.inf]], [1.0])
    with pytest.raises(ValueError):
        DiscreteMeasure([[0.0], [1.0]], [-0.5, 1.5])


def test_gaussian_params_validation():
    with pytest.raises(ValueError):
        GaussianParams([0.0, 0.0], [[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(ValueError):
        GaussianParams([0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]])


def test_convex_potential_checks_convexity():
    g = Grid.regular(-2.0, 2.0, 256)
    ConvexPotential.from_function(lambda x: x ** 2, g)
    with pytest.raises(PreconditionError):
        ConvexPotential.from_function(lambda x: -x ** 2, g)
    g2 = Grid.regular((-2.0, -2.0), (2.0, 2.0), (64, 64))
    ConvexPotential.from_function(lambda x, y: x ** 2 + x * y + y ** 2, g2)
    with pytest.raises(PreconditionError):
        ConvexPotential.from_function(lambda x, y: x * y, g2)


def test_convex_potential_infinite_outside_domain():
    g = Grid.regular(-2.0, 2.0, 256)
    x = g.axis(0)
    f = ConvexPotential(g, np.where(np.abs(x) <= 1, 0.0, np.inf))
    assert f.mask.sum() == np.sum(np.abs(x) <= 1)


def test_transport_plan_marginals():
    a = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    TransportPlan(a, a, np.diag([0.5, 0.5]))
    with pytest.raises(ValueError):
        TransportPlan(a, a, np.array([[0.5, 0.1], [0.0, 0.4]]))


@given(finite, finite, st.floats(0, 10))
def test_gap_report_verdict_rule(lhs, rhs, err):
    r = GapReport.from_sides(lhs, rhs, err)
    assert r.gap == rhs - lhs
    assert (r.verdict is Verdict.VIOLATED) == (r.gap < -err)
    if r.verdict is not Verdict.VIOLATED:
        assert (r.verdict is Verdict.HOLDS_WITHIN_ERROR) == (r.gap < 0)


def test_gap_report_rejects_inconsistent_fields():
    with pytest.raises(ValueError):
        GapReport(1.0, 2.0, 0.5, 0.0, Verdict.HOLDS)
    with pytest.raises(ValueError):
        GapReport(2.0, 1.0, -1.0, 0.0, Verdict.HOLDS)


def test_support_rank():
    assert support_rank(DiscreteMeasure([[1.0, 1.0]], [1.0])) == 0
    line = DiscreteMeasure([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], [0.2, 0.3, 0.5])
    assert support_rank(line) == 1


def test_text_round_trip_is_exact(grid1d):
    gam = GaussianParams.standard(1).on_grid(grid1d)
    back = loads(dumps(gam))
    np.testing.assert_array_equal(back.values, gam.values)
    g = Grid.regular(-2.0, 2.0, 8)
    f = GridFunction(g, np.where(np.abs(g.axis(0)) < 1, g.axis(0) ** 2, np.inf))
    text = dumps(f)
    assert "inf" in text
    np.testing.assert_array_equal(loads(text, "function").values, f.values)
    m = DiscreteMeasure([[0.1, math.pi], [1 / 3, -2.0]], [0.25, 0.75])
    m2 = loads(dumps(m))
    np.testing.assert_array_equal(m2.points, m.points)
    np.testing.assert_array_equal(m2.weights, m.weights)
