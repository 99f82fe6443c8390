"""Checkers for the transport-entropy, Santaló and reverse inequalities.

Every checker returns a :class:`~tentlab.measures.GapReport` oriented as
``lhs <= rhs``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .exceptions import FeasibilityError, PreconditionError
from .functional import (LOG_2PI, check_decay, entropy_dx, legendre, mass_conjugate_grid,
                         log_integral_estimate,
                         recenter, rel_entropy_estimate, rel_entropy_gaussian_estimate)
from .gaussian import talagrand_closed_form
from .measures import (ConvexPotential, DiscreteMeasure, GapReport, GaussianParams, Grid,
                       GridDensity, GridFunction, barycenter, is_symmetric,
                       is_unconditional, second_moment)
from .transport import quantile_w2_1d, solve_exact, w2_squared_with_error

CENTER_TOL_CLOSED = 1e-6
CENTER_TOL_GRID = 1e-4
ADMISSIBILITY_TOL = 1e-9


def _center_tol(m) -> float:
    return CENTER_TOL_GRID if isinstance(m, GridDensity) else CENTER_TOL_CLOSED


def _require_centered(mu, tol=None):
    tol = _center_tol(mu) if tol is None else tol
    b = np.linalg.norm(barycenter(mu))
    if not b <= tol:
        raise PreconditionError(
            f"first measure has barycenter of norm {b:.3g} > {tol:g}; without centering the "
            "bound fails (N(1,1) against N(-1,1) gives W2^2 = 4 > 2)")


# --- symmetrised transport-entropy inequality ------------------------------------

def _as_grid(m, like: GridDensity) -> GridDensity:
    if isinstance(m, GaussianParams):
        return m.on_grid(like.grid)
    return m


def _w2_estimate(mu, nu):
    """Squared W2 with the refinement (1D) or block-bracketing (2D) error."""
    if mu.dim == 1 and isinstance(mu, GridDensity) and isinstance(nu, GridDensity):
        w = quantile_w2_1d(mu, nu)
        return w, abs(w - quantile_w2_1d(mu.subsampled(), nu.subsampled()))
    return w2_squared_with_error(mu, nu)


def talagrand_gap(mu, nu, center_tol: float | None = None) -> GapReport:
    """``W2(mu, nu)^2 <= 2 Ent(mu) + 2 Ent(nu)`` for centred ``mu``.

    Gaussian pairs use the closed forms; grid densities use quantile transport
    in 1D, block-centroid linear programs in 2D, and midpoint entropies.
    Discrete measures have infinite relative entropy, so the right side is
    ``+inf``; the transport cost is still computed exactly.
    """
    if mu.dim != nu.dim:
        raise ValueError("measures live in different dimensions")
    _require_centered(mu, center_tol)
    if isinstance(mu, GaussianParams) and isinstance(nu, GaussianParams):
        return talagrand_closed_form(mu, nu)
    if isinstance(mu, DiscreteMeasure) or isinstance(nu, DiscreteMeasure):
        if isinstance(mu, DiscreteMeasure) and isinstance(nu, DiscreteMeasure):
            w2 = quantile_w2_1d(mu, nu) if mu.dim == 1 else solve_exact(mu, nu).cost
        else:
            w2, _ = w2_squared_with_error(mu, nu)
        return GapReport.from_sides(w2, math.inf, 0.0, mode="discrete")
    if isinstance(mu, GaussianParams):
        mu = _as_grid(mu, nu)
    nu = _as_grid(nu, mu)
    w2, w_err = _w2_estimate(mu, nu)
    e_mu = rel_entropy_gaussian_estimate(mu)
    e_nu = rel_entropy_gaussian_estimate(nu)
    rhs = 2 * e_mu.value + 2 * e_nu.value
    err = w_err + 2 * e_mu.error + 2 * e_nu.error
    return GapReport.from_sides(w2, rhs, err, mode="grid", ent_mu=e_mu.value, ent_nu=e_nu.value,
                                w2_error=w_err)


# --- functional Santaló ---------------------------------------------------------

def admissibility(f: GridFunction, g: GridFunction):
    """Smallest slack ``-x.y - f(x) - g(y)`` over all grid pairs.

    Returns ``(margin, x, y)`` with a minimising pair. The inner maximum over
    ``x`` is an exact discrete conjugate, so the cost is near-linear.
    """
    if f.dim != g.dim:
        raise ValueError("f and g live in different dimensions")
    fv, gv = np.asarray(f.values), np.asarray(g.values)
    yg = g.grid.points()
    gfin = np.isfinite(gv).ravel()
    if np.any(fv == np.inf):
        i = int(np.flatnonzero(fv.ravel() == np.inf)[0])
        j = int(np.flatnonzero(gfin)[0])
        return -math.inf, f.grid.points()[i], yg[j]
    conj = legendre(GridFunction(f.grid, -fv), g.grid, extend=False).values.ravel()
    slack = np.where(gfin, -gv.ravel() - conj, np.inf)
    slack = np.where(gfin & (gv.ravel() == np.inf), -np.inf, slack)
    j = int(np.argmin(slack))
    y = yg[j]
    xs = f.grid.points()
    i = int(np.argmax(xs @ y + fv.ravel()))
    return float(slack[j]), xs[i], y


@dataclass(frozen=True)
class SantaloPair:
    """Pair of grid functions with ``f(x) + g(y) <= -x.y`` on all grid pairs."""

    f: GridFunction
    g: GridFunction
    admissibility_margin: float = field(init=False)

    def __post_init__(self):
        margin, x, y = admissibility(self.f, self.g)
        if margin < -ADMISSIBILITY_TOL:
            raise FeasibilityError(
                f"f(x) + g(y) exceeds -x.y by {-margin:.3g} at x={np.round(x, 12).tolist()}, "
                f"y={np.round(y, 12).tolist()}", pair=(x, y), violation=-margin)
        object.__setattr__(self, "admissibility_margin", margin)

    @property
    def dim(self) -> int:
        return self.f.dim


def santalo_optimal_partner(f: GridFunction, out_grid: Grid | None = None) -> GridFunction:
    """Largest admissible partner ``g(y) = inf_x (-x.y - f(x)) = -(-f)*(y)``."""
    if np.any(np.asarray(f.values) == np.inf):
        raise PreconditionError("f must be bounded above")
    conj = legendre(GridFunction(f.grid, -np.asarray(f.values)), out_grid)
    return GridFunction(conj.grid, -np.asarray(conj.values))


def admissibility_defect(p: SantaloPair) -> float:
    """Estimate of how far the grid-only constraint can inflate ``log int e^g``.

    The inner conjugate is recomputed from every other sample of ``f``; the
    drop ``Delta(y) >= 0`` bounds, up to a factor about 3, what the missing
    off-grid constraints would remove from ``g``. Returned is the mean of
    ``Delta`` under the normalised ``exp(g)``.
    """
    fv = -np.asarray(p.f.values)
    full = legendre(GridFunction(p.f.grid, fv), p.g.grid, extend=False).values
    sub_vals = fv[tuple(slice(None, None, 2) for _ in range(p.dim))]
    try:
        sub = legendre(GridFunction(p.f.grid.subsampled(), sub_vals), p.g.grid, extend=False).values
    except PreconditionError:
        return math.inf
    w = p.g.density().values
    delta = np.where(w > 0, full - sub, 0.0)
    if np.any(~np.isfinite(delta)):
        return math.inf
    return float(np.sum(w * delta) / np.sum(w))


def santalo_check(p: SantaloPair, centered_side: str = "F", tol: float = CENTER_TOL_CLOSED) -> GapReport:
    """``log int e^f + log int e^g <= d log 2 pi`` with one side centred."""
    side = str(centered_side).upper()
    if side not in ("F", "G"):
        raise ValueError("centered_side must be 'F' or 'G'")
    ref = p.f if side == "F" else p.g
    b = np.linalg.norm(barycenter(ref.density()))
    if not b <= tol:
        raise PreconditionError(f"normalised exp({side.lower()}) has barycenter norm {b:.3g} > {tol:g}")
    lf = log_integral_estimate(p.f)
    lg = log_integral_estimate(p.g)
    defect = admissibility_defect(p)
    return GapReport.from_sides(lf.value + lg.value, p.dim * LOG_2PI, lf.error + lg.error + defect,
                                log_mass_f=lf.value, log_mass_g=lg.value,
                                admissibility_margin=p.admissibility_margin, grid_defect=defect)


# --- equivalence between the two formulations --------------------------------------

def _on_grid(fn: GridFunction, rho: GridDensity, name: str) -> np.ndarray:
    if fn.grid != rho.grid:
        raise ValueError(f"{name} must be sampled on the grid of its measure")
    return np.asarray(fn.values)


def _expect_extended(rho: GridDensity, values) -> float:
    pos = rho.masses > 0
    v = np.asarray(values)[pos]
    if np.any(v == -np.inf):
        return -math.inf
    return float(np.sum(rho.masses[pos] * v))


def duality_forward(mu: GridDensity, nu: GridDensity, pair: SantaloPair | None = None) -> GapReport:
    """``inf_pi int -x.y dpi <= Ent_dx(mu) + Ent_dx(nu) + d log 2 pi`` for centred ``mu``.

    The transport cost uses ``(W2^2 - M2(mu) - M2(nu)) / 2``. With ``pair``
    sampled on the grids of ``mu`` and ``nu``, the Kantorovich lower bound
    ``int f dmu + int g dnu`` is added to ``details``.
    """
    _require_centered(mu)
    d = mu.dim
    w2, w_err = _w2_estimate(mu, nu)
    lhs = 0.5 * (w2 - second_moment(mu) - second_moment(nu))
    m_err = 0.5 * sum(abs(second_moment(m) - second_moment(m.subsampled())) for m in (mu, nu))
    e_mu, e_nu = entropy_dx(mu), entropy_dx(nu)
    e_err = sum(abs(entropy_dx(m) - entropy_dx(m.subsampled())) for m in (mu, nu))
    rhs = e_mu + e_nu + d * LOG_2PI
    details = dict(negdot_cost=lhs, ent_dx_mu=e_mu, ent_dx_nu=e_nu)
    if pair is not None:
        dual = (_expect_extended(mu, _on_grid(pair.f, mu, "f"))
                + _expect_extended(nu, _on_grid(pair.g, nu, "g")))
        details["dual_value"] = dual
        details["dual_link_gap"] = lhs - dual
    return GapReport.from_sides(lhs, rhs, 0.5 * w_err + m_err + e_err, **details)


def duality_backward(f: GridFunction, g: GridFunction, mu: GridDensity | None = None,
                     nu: GridDensity | None = None) -> GapReport:
    """Recentering argument from the functional form back to the transport form.

    ``f`` is tilted to ``f~ = f + lam.x`` with a centred ``exp(f~)`` and ``g``
    shifted to ``g~(y) = g(y + lam)``. The returned report compares
    ``int f dmu + int g dnu`` with ``Ent_dx(mu) + Ent_dx(nu) + d log 2 pi``;
    by default ``mu`` is the normalised ``exp(f~)`` and ``nu`` the normalised
    ``exp(g)``.
    """
    pair = SantaloPair(f, g)
    rec = recenter(f, g)
    shifted = SantaloPair(rec.f_tilde, rec.g_tilde)
    mass_g = math.exp(g.log_integral_exp())
    mass_gt = math.exp(rec.g_tilde.log_integral_exp())
    mass_err = abs(mass_g - mass_gt) / mass_g
    santalo = santalo_check(shifted, "F", tol=1e-7)
    mu = rec.f_tilde.density() if mu is None else mu
    nu = g.density() if nu is None else nu
    _require_centered(mu)
    int_f = _expect_extended(mu, _on_grid(f, mu, "f"))
    int_ft = _expect_extended(mu, _on_grid(rec.f_tilde, mu, "f~"))
    int_g = _expect_extended(nu, _on_grid(g, nu, "g"))
    d = f.dim
    lhs = int_f + int_g
    middle = int_ft - santalo.details["log_mass_f"] + int_g - santalo.details["log_mass_g"] + d * LOG_2PI
    rhs = entropy_dx(mu) + entropy_dx(nu) + d * LOG_2PI
    err = santalo.discretization_error_estimate + abs(int_f - int_ft)
    return GapReport.from_sides(
        lhs, rhs, err, lam=rec.lam, barycenter_norm=float(np.linalg.norm(barycenter(mu))),
        mass_invariance_error=mass_err, santalo_gap=santalo.gap, middle=middle,
        admissibility_margin=pair.admissibility_margin,
        shifted_admissibility_margin=shifted.admissibility_margin)


# --- uniformly log-concave reference ---------------------------------------------

def second_difference_min(V: GridFunction) -> float:
    v = np.asarray(V.values)
    h = V.grid.spacing[0]
    d2 = (v[2:] - 2 * v[1:-1] + v[:-2]) / h ** 2
    return float(np.min(d2[np.isfinite(d2)]))


def monotone_map_lipschitz(V: GridFunction) -> float:
    """Largest difference quotient of the increasing map sending the standard
    Gaussian onto ``theta ~ exp(-V)``.

    Nodes are the grid cell edges ``e_k`` and their Gaussian preimages
    ``z_k = Phi^{-1}(F_theta(e_k))``; lower and upper halves use the left and
    right cumulative sums so that both tails keep full precision.
    """
    theta = V.density(-1.0)
    m = theta.masses
    edges = theta.grid.edges(0)
    left = np.concatenate([[0.0], np.cumsum(m)])
    right = np.concatenate([np.cumsum(m[::-1])[::-1], [0.0]])
    z = np.where(left <= right, ndtri(np.maximum(left, 1e-300)), -ndtri(np.maximum(right, 1e-300)))
    ok = (np.minimum(left, right) > 1e-10)
    ok = ok[:-1] & ok[1:]
    dz = np.diff(z)[ok]
    de = np.diff(edges)[ok]
    return float(np.max(de / dz))


def ulc_gap_1d(V: GridFunction, alpha: float, mu: GridDensity, nu: GridDensity,
               tol_convex: float = 1e-8) -> GapReport:
    """``W2(mu, nu)^2 <= (2/alpha)(Ent_theta(mu) + Ent_theta(nu))`` in one
    dimension for ``theta ~ exp(-V)`` with ``V'' >= alpha``, symmetric ``V``
    and ``mu``.

    ``details['lipschitz']`` holds the empirical Lipschitz constant of the
    monotone map from the standard Gaussian to ``theta``, to be compared with
    ``alpha ** -0.5``.
    """
    if V.dim != 1:
        raise ValueError("ulc_gap_1d is one-dimensional")
    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    if mu.grid != V.grid or nu.grid != V.grid:
        raise ValueError("V, mu and nu must share a grid")
    curv = second_difference_min(V)
    allowance = 16 * np.finfo(float).eps * np.max(np.abs(V.finite_values())) / V.grid.spacing[0] ** 2
    if curv < alpha - tol_convex - allowance:
        raise PreconditionError(f"discrete V'' reaches {curv:.6g} < alpha = {alpha:g}")
    if not is_symmetric(V, 1e-9):
        raise PreconditionError("V must be even")
    if not is_symmetric(mu, 1e-9):
        raise PreconditionError("mu must be symmetric")
    w2 = quantile_w2_1d(mu, nu)
    w_err = abs(w2 - quantile_w2_1d(mu.subsampled(), nu.subsampled()))
    e_mu = rel_entropy_estimate(mu, V)
    e_nu = rel_entropy_estimate(nu, V)
    rhs = 2.0 / alpha * (e_mu.value + e_nu.value)
    err = w_err + 2.0 / alpha * (e_mu.error + e_nu.error)
    lip = monotone_map_lipschitz(V)
    bound = alpha ** -0.5
    return GapReport.from_sides(w2, rhs, err, ent_theta_mu=e_mu.value, ent_theta_nu=e_nu.value,
                                lipschitz=lip, lipschitz_bound=bound,
                                lipschitz_ok=bool(lip <= bound + 1e-6), min_curvature=curv)


# --- reverse inequalities for unconditional convex functions ------------------------

def _require_unconditional(f: GridFunction, tol: float):
    if not is_unconditional(f, tol):
        raise PreconditionError("f must be unconditional (even in each coordinate) on a symmetric grid")


def _conjugates(f: GridFunction, out_grid: Grid | None):
    """``f*`` on ``out_grid`` and the same transform of the every-other-sample
    ``f``; the pair measures how much the input resolution moves ``f*``."""
    out = mass_conjugate_grid(f) if out_grid is None else out_grid
    sub = np.asarray(f.values)[tuple(slice(None, None, 2) for _ in range(f.dim))]
    coarse = GridFunction(f.grid.subsampled(), sub)
    return legendre(f, out), legendre(coarse, out)


def km_product(f: ConvexPotential, out_grid: Grid | None = None, tol: float = 1e-9) -> GapReport:
    """``d log 4 <= log int e^{-f} + log int e^{-f*}`` for unconditional convex ``f``.

    ``details['santalo_bound']`` is the matching upper bound ``d log 2 pi``.
    The error estimate covers quadrature on both grids and the change of
    ``f*`` when ``f`` is sampled at half the resolution.
    """
    _require_unconditional(f, tol)
    fs, fs_coarse = _conjugates(f, out_grid)
    a = log_integral_estimate(f, -1.0)
    b = log_integral_estimate(fs, -1.0)
    sens = abs(b.value - fs_coarse.log_integral_exp(-1.0))
    d = f.dim
    return GapReport.from_sides(d * math.log(4), a.value + b.value, a.error + b.error + sens,
                                log_mass=a.value, log_mass_conjugate=b.value,
                                santalo_bound=d * LOG_2PI)


def _reverse_terms(f: GridFunction, fs: GridFunction):
    mu, mus = f.density(-1.0), fs.density(-1.0)
    e1, e2 = rel_entropy_gaussian_estimate(mu), rel_entropy_gaussian_estimate(mus)
    w2, w_err = _w2_estimate(mu, mus)
    return mu, mus, e1, e2, w2, w_err


def reverse_gap(f: ConvexPotential, out_grid: Grid | None = None, tol: float = 1e-9) -> GapReport:
    """``Ent(mu) + Ent(mu*) <= W2(mu, mu*)^2 / 2 + (d/2) log(pi/2)``.

    ``mu`` and ``mu*`` are ``exp(-f)`` and ``exp(-f*)`` normalised to unit
    mass; the raw masses are in ``details``, together with the chain
    ``Ent_dx(mu) + Ent_dx(mu*) <= inf_pi int -x.y dpi - d log 4``.
    """
    _require_unconditional(f, tol)
    fs, fs_coarse = _conjugates(f, out_grid)
    for name, fn in (("exp(-f)", f), ("exp(-f*)", fs)):
        try:
            check_decay(-np.asarray(fn.values))
        except Exception as exc:
            raise type(exc)(f"{name} has too much mass near the grid boundary; it may not be integrable") from exc
    d = f.dim
    mu, mus, e1, e2, w2, w_err = _reverse_terms(f, fs)
    _, _, c1, c2, cw2, _ = _reverse_terms(f, fs_coarse)
    lhs = e1.value + e2.value
    rhs = 0.5 * w2 + 0.5 * d * math.log(math.pi / 2)
    sens = abs((rhs - lhs) - (0.5 * cw2 - c1.value - c2.value + 0.5 * d * math.log(math.pi / 2)))
    negdot = 0.5 * (w2 - second_moment(mu) - second_moment(mus))
    chain_lhs = entropy_dx(mu) + entropy_dx(mus)
    chain_rhs = negdot - d * math.log(4)
    return GapReport.from_sides(
        lhs, rhs, e1.error + e2.error + 0.5 * w_err + sens,
        mass=math.exp(f.log_integral_exp(-1.0)), mass_conjugate=math.exp(fs.log_integral_exp(-1.0)),
        ent_mu=e1.value, ent_mu_star=e2.value, w2_squared=w2,
        chain_lhs=chain_lhs, chain_rhs=chain_rhs, chain_gap=chain_rhs - chain_lhs)
