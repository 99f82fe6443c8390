import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from tentlab import families as fam
from tentlab.exceptions import FeasibilityError, PreconditionError
from tentlab.functional import LOG_2PI, recenter
from tentlab.gaussian import talagrand_closed_form
from tentlab.inequalities import (SantaloPair, admissibility, duality_backward, duality_forward, km_product,
                                  monotone_map_lipschitz, reverse_gap, santalo_check, santalo_optimal_partner,
                                  talagrand_gap, ulc_gap_1d)
from tentlab.measures import (ConvexPotential, DiscreteMeasure, GaussianParams, Grid, GridDensity,
                              GridFunction, Verdict)

seeds = st.integers(0, 2 ** 32 - 1)


def holds(r):
    return r.verdict != Verdict.VIOLATED


# --- transport-entropy --------------------------------------------------------------

def test_talagrand_gaussian_pair_uses_closed_form():
    mu = GaussianParams([0.0, 0.0], [[2.0, 0.3], [0.3, 1.0]])
    nu = GaussianParams([0.5, -1.0], [[0.7, 0.0], [0.0, 1.5]])
    r = talagrand_gap(mu, nu)
    ref = talagrand_closed_form(mu, nu)
    assert (r.lhs, r.rhs) == (ref.lhs, ref.rhs)
    assert r.discretization_error_estimate <= 1e-8
    assert holds(r)


def test_talagrand_requires_centered_first_measure():
    with pytest.raises(PreconditionError, match="barycenter"):
        talagrand_gap(GaussianParams([1.0], [[1.0]]), GaussianParams([-1.0], [[1.0]]))


def test_talagrand_identical_standard_gaussians_on_grid(grid1d):
    gam = GaussianParams.standard(1).on_grid(grid1d)
    r = talagrand_gap(gam, gam)
    assert r.lhs == pytest.approx(0.0, abs=1e-12)
    assert abs(r.rhs) <= 1e-6


def test_talagrand_mixture_against_gaussian():
    g = Grid.regular(-12.0, 12.0, 4096)
    x = g.axis(0)
    mu = GridDensity(g, np.exp(-(x - 2) ** 2) + np.exp(-(x + 2) ** 2))
    r = talagrand_gap(mu, GaussianParams.standard(1))
    assert holds(r) and r.gap > 0.1


def test_talagrand_discrete_right_side_is_infinite():
    mu = DiscreteMeasure([[-1.0], [1.0]], [0.5, 0.5])
    nu = DiscreteMeasure([[0.0], [2.0]], [0.5, 0.5])
    r = talagrand_gap(mu, nu)
    assert r.lhs == pytest.approx(1.0)
    assert r.rhs == math.inf and holds(r)


@given(seeds)
@settings(max_examples=10)
def test_transport_and_functional_forms_agree(seed):
    # W2^2 - 2Ent(mu) - 2Ent(nu) is twice the forward duality slack for densities
    rng = np.random.default_rng(seed)
    g = Grid.regular(-14.0, 14.0, 2048)
    mu = fam.random_mixture(rng, 1, centered=True, grid=g)
    nu = fam.random_mixture(rng, 1, centered=bool(rng.integers(0, 2)), grid=g)
    t = talagrand_gap(mu, nu)
    f = duality_forward(mu, nu)
    assert t.gap == pytest.approx(2 * f.gap, abs=1e-8)


# --- functional Santaló ------------------------------------------------------------

def _quad(grid, shift=0.0):
    return GridFunction(grid, -0.5 * grid.sq_norm() + shift)


def test_santalo_gaussian_equality(grid1d):
    r = santalo_check(SantaloPair(_quad(grid1d), _quad(grid1d)))
    assert abs(r.gap) <= 1e-10
    assert r.rhs == pytest.approx(LOG_2PI)


def test_santalo_gaussian_equality_2d():
    g = Grid.regular((-10.0, -10.0), (10.0, 10.0), (256, 256))
    r = santalo_check(SantaloPair(_quad(g), _quad(g)))
    assert abs(r.gap) <= 1e-10


def test_santalo_lowered_function_has_unit_gap(grid1d):
    r = santalo_check(SantaloPair(_quad(grid1d, -1.0), _quad(grid1d)))
    assert r.gap == pytest.approx(1.0, abs=1e-10)


def test_santalo_requires_centered_side(grid1d):
    f = GridFunction(grid1d, -0.5 * (grid1d.axis(0) - 1) ** 2)
    p = SantaloPair(f, santalo_optimal_partner(f))
    with pytest.raises(PreconditionError):
        santalo_check(p, "F")


def test_inadmissible_pair_names_the_violating_point(grid1d):
    with pytest.raises(FeasibilityError) as info:
        SantaloPair(_quad(grid1d, 0.5), _quad(grid1d))
    assert info.value.violation == pytest.approx(0.5, abs=1e-12)


def test_santalo_quartic_with_optimal_partner():
    g = Grid.regular(-4.0, 4.0, 2049)
    x = g.axis(0)
    f = recenter(GridFunction(g, -x ** 4 + 0.3 * x)).f_tilde
    r = santalo_check(SantaloPair(f, santalo_optimal_partner(f)))
    assert holds(r) and r.gap > 0


def test_partner_of_interval_indicator_is_minus_abs():
    g = Grid.regular(-2.0, 2.0, 400)
    x = g.axis(0)
    f = GridFunction(g, np.where(np.abs(x) <= 1, 0.0, -np.inf))
    out = Grid.regular(-3.0, 3.0, 121)
    partner = santalo_optimal_partner(f, out)
    x_edge = x[np.abs(x) <= 1].max()
    np.testing.assert_allclose(partner.values, -x_edge * np.abs(out.axis(0)), atol=1e-12)


def test_partner_of_gaussian_is_gaussian(grid1d):
    out = Grid.regular(-4.0, 4.0, 81)
    partner = santalo_optimal_partner(_quad(grid1d), out)
    assert np.max(np.abs(partner.values + out.axis(0) ** 2 / 2)) <= grid1d.spacing[0] ** 2


@given(seeds)
@settings(max_examples=20)
def test_every_admissible_partner_lies_below_the_optimal_one(seed):
    rng = np.random.default_rng(seed)
    g = Grid.regular(-6.0, 6.0, 301)
    x = g.axis(0)
    f = GridFunction(g, -rng.uniform(0.5, 2) * x ** 2 / 2 + rng.uniform(-1, 1) * x + 0.2 * np.sin(3 * x))
    opt = santalo_optimal_partner(f, Grid.regular(-5.0, 5.0, 101))
    y = opt.grid.axis(0)
    cand = GridFunction(opt.grid, opt.values - rng.uniform(0, 1) * np.exp(-rng.uniform(0.1, 2) * y ** 2))
    margin, _, _ = admissibility(f, cand)
    assert margin >= -1e-12
    assert np.all(cand.values <= opt.values)
    # raising the optimal partner anywhere breaks admissibility
    k = int(rng.integers(0, y.size))
    raised = np.array(opt.values)
    raised[k] += 1e-3
    with pytest.raises(FeasibilityError):
        SantaloPair(f, GridFunction(opt.grid, raised))


# --- duality ------------------------------------------------------------------------

def test_forward_standard_gaussian(grid1d):
    gam = GaussianParams.standard(1).on_grid(grid1d)
    r = duality_forward(gam, gam)
    assert r.lhs == pytest.approx(-1.0, abs=1e-6)
    assert r.rhs == pytest.approx(-1.0, abs=1e-6)


def test_forward_dual_value_is_below_primal(grid1d):
    gam = GaussianParams.standard(1).on_grid(grid1d)
    pair = SantaloPair(_quad(grid1d), _quad(grid1d))
    r = duality_forward(gam, gam, pair)
    assert r.details["dual_link_gap"] >= -1e-9


def test_backward_shifted_gaussian():
    g = Grid.regular(-12.0, 12.0, 4096)
    x = g.axis(0)
    f = GridFunction(g, -0.5 * (x - 1) ** 2)
    r = duality_backward(f, santalo_optimal_partner(f))
    assert r.details["lam"][0] == pytest.approx(-1.0, abs=1e-8)
    assert abs(r.details["santalo_gap"]) <= 1e-6
    assert holds(r)


def test_backward_random_pairs():
    for i in range(50):
        r = duality_backward(*fam.random_admissible_pair(11, i).items)
        assert r.details["barycenter_norm"] <= 1e-7
        assert r.details["mass_invariance_error"] <= 1e-9
        assert holds(r)
        assert r.lhs <= r.details["middle"] + r.discretization_error_estimate


# --- uniformly log-concave reference --------------------------------------------------

def _ulc_potential():
    g = Grid.regular(-8.0, 8.0, 4096)
    x = g.axis(0)
    return g, GridFunction(g, x ** 2 / 2 + x ** 4 / 4)


def test_ulc_cases_hold_and_map_is_contracting():
    g, V = _ulc_potential()
    for i in range(8):
        r = ulc_gap_1d(V, 1.0, *fam.ulc_pair(3, i, g).items)
        assert holds(r)
        assert r.details["lipschitz"] <= 1.0 + 1e-6


def test_gaussian_reference_map_is_the_identity(grid1d):
    V = GridFunction(grid1d, grid1d.axis(0) ** 2 / 2)
    assert monotone_map_lipschitz(V) == pytest.approx(1.0, abs=1e-3)


def test_ulc_rejects_weak_curvature_and_asymmetry():
    g, V = _ulc_potential()
    mu, nu = fam.ulc_pair(3, 0, g).items
    with pytest.raises(PreconditionError):
        ulc_gap_1d(V, 2.0, mu, nu)
    with pytest.raises(PreconditionError):
        ulc_gap_1d(V, 1.0, GridDensity(g, np.exp(-(g.axis(0) - 1) ** 2)), nu)


# --- reverse inequalities ---------------------------------------------------------------

def _potential(kind, grid):
    x = grid.mesh()
    r2 = sum(z ** 2 for z in x)
    absx = sum(np.abs(z) for z in x)
    if kind == "gaussian":
        return ConvexPotential(grid, 0.5 * r2 + 0.5 * grid.dim * LOG_2PI)
    if kind == "laplace":
        return ConvexPotential(grid, absx + grid.dim * math.log(2))
    if kind == "abs":
        return ConvexPotential(grid, absx)
    return ConvexPotential(grid, 0.5 * r2)


def test_km_abs_is_equality():
    g = Grid.regular(-24.0, 24.0, 2 ** 14 + 1)
    r = km_product(_potential("abs", g))
    assert abs(r.gap) <= 1e-6
    assert r.details["log_mass"] == pytest.approx(math.log(2), abs=1e-6)


def test_km_quadratic_reaches_upper_bound():
    g = Grid.regular(-12.0, 12.0, 4097)
    r = km_product(_potential("quadratic", g))
    assert r.rhs == pytest.approx(LOG_2PI, abs=1e-5)
    assert r.details["santalo_bound"] == pytest.approx(LOG_2PI)


def test_km_sandwich_on_random_potentials():
    for i in range(6):
        d = 2 if i == 0 else 1
        r = km_product(*fam.random_unconditional_convex(5, i, d).items)
        err = r.discretization_error_estimate
        assert r.lhs <= r.rhs + err
        assert r.rhs <= r.details["santalo_bound"] + err


def test_km_requires_unconditional():
    g = Grid.regular(-5.0, 5.0, 101)
    with pytest.raises(PreconditionError):
        km_product(ConvexPotential(g, (g.axis(0) - 0.5) ** 2))


def test_reverse_gaussian_constant():
    g = Grid.regular(-12.0, 12.0, 4097)
    r = reverse_gap(_potential("gaussian", g))
    assert r.gap == pytest.approx(0.5 * math.log(math.pi / 2), abs=1e-5)
    assert r.gap == pytest.approx(0.2258, abs=1e-4)


def _laplace_uniform_reference():
    ent_lap = -(1 + math.log(2)) + 0.5 * LOG_2PI + 1.0
    ent_uni = -math.log(2) + 1 / 6 + 0.5 * LOG_2PI

    def q(u):
        lap = math.log(2 * u) if u < 0.5 else -math.log(2 * (1 - u))
        return (lap - (2 * u - 1)) ** 2

    w2 = integrate.quad(q, 0, 0.5)[0] + integrate.quad(q, 0.5, 1)[0]
    return ent_lap + ent_uni, 0.5 * w2 + 0.5 * math.log(math.pi / 2)


def test_reverse_laplace_against_quadrature():
    g = Grid.regular(-40.0, 40.0, 8193)
    r = reverse_gap(_potential("laplace", g))
    lhs, rhs = _laplace_uniform_reference()
    assert r.lhs == pytest.approx(lhs, abs=5e-3)
    assert r.rhs == pytest.approx(rhs, abs=5e-3)
    assert abs(r.gap - (rhs - lhs)) <= max(r.discretization_error_estimate, 1e-3)
    assert holds(r)


def test_reverse_separable_2d_doubles_the_1d_gap():
    g1 = Grid.regular(-10.0, 10.0, 201)
    g2 = Grid.regular((-10.0, -10.0), (10.0, 10.0), (201, 201))
    r1 = reverse_gap(_potential("gaussian", g1))
    r2 = reverse_gap(_potential("gaussian", g2))
    assert abs(r2.lhs) <= 1e-6
    # the 2D transport term is bracketed by block linear programs, hence the looser check
    assert abs(r2.gap - 2 * r1.gap) <= r2.discretization_error_estimate
    assert holds(r2)
