"""One-dimensional moment maps and the checks built on them.

A moment map of a centred measure ``mu`` is a convex ``phi`` whose gradient
pushes ``rho = exp(-phi)`` (a probability density) forward to ``mu``. Two
independent solvers are provided: a damped monotone-rearrangement fixed point
and a direct minimisation of ``Ent(rho) - W2(mu, rho)^2 / 2`` over grid
densities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .exceptions import ConvergenceError, NumericError, PreconditionError
from .functional import LOG_2PI, convex_envelope_1d, differential_entropy, rel_entropy_gaussian
from .gaussian import gaussian_rel_entropy, gaussian_w2_squared
from .measures import (ConvexPotential, DiscreteMeasure, GapReport, GaussianParams, Grid,
                       GridDensity, barycenter, dumps, is_centered, support_rank)
from .transport import _pieces, cdf_function, quantile_function, quantile_w2_1d

DAMPING = 0.5
STALL_WINDOW = 10
STALL_RTOL = 1e-6  # relative residual decrease over STALL_WINDOW steps counted as stagnation
SIGNIFICANT = 1e-12  # relative density below which residual norms ignore a cell


@dataclass(frozen=True)
class MomentMapSolution:
    """Convex ``phi`` on a grid with ``rho = exp(-phi)`` of unit mass.

    ``dphi`` holds the derivative used for the pushforward (the last monotone
    rearrangement); ``ma_residual`` is NaN for discrete targets.
    """

    phi: ConvexPotential
    rho: GridDensity
    target: object
    dphi: np.ndarray
    pushforward_residual: float
    ma_residual: float
    method: str = "fixed_point"
    iterations: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    @property
    def grid_constant(self) -> float:
        """``h^2``; the Monge-Ampere residual of a converged smooth solution
        scales like a small multiple of it."""
        return float(self.grid.spacing[0] ** 2)


# --- helpers -----------------------------------------------------------------

def _midpoint_cdf(masses: np.ndarray) -> np.ndarray:
    c = np.cumsum(masses)
    return c - 0.5 * masses


def _integrate(dphi: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid antiderivative at the cell centres, normalised so that
    ``exp(-phi)`` has unit midpoint mass."""
    phi = np.concatenate([[0.0], np.cumsum(0.5 * (dphi[1:] + dphi[:-1]) * h)])
    return phi + logsumexp(-phi) + math.log(h)


def _discrete_sup_cdf(points, masses, target: DiscreteMeasure) -> float:
    """Kolmogorov distance between ``sum m_i delta_{p_i}`` and ``target``."""
    ts = np.union1d(points, target.points[:, 0])
    order = np.argsort(points, kind="stable")
    cum = np.cumsum(masses[order])
    k = np.searchsorted(points[order], ts, side="right")
    f1 = np.where(k > 0, cum[np.maximum(k - 1, 0)], 0.0)
    f2 = cdf_function(target)(ts)
    return float(np.max(np.abs(f1 - f2)))


def pushforward_residual(grid: Grid, rho_masses: np.ndarray, dphi: np.ndarray, target) -> float:
    """Sup-CDF distance between ``(phi')# rho`` and the target.

    Discrete targets compare the exact CDFs of the atoms ``phi'(x_i)``
    against ``mu``. Grid targets use ``max_i |F_mu(phi'(x_i)) - F_rho(x_i)|``
    with the midpoint CDF of ``rho``.
    """
    if isinstance(target, DiscreteMeasure):
        return _discrete_sup_cdf(dphi, rho_masses, target)
    f_mu = cdf_function(target)(dphi)
    return float(np.max(np.abs(f_mu - _midpoint_cdf(rho_masses))))


def _default_grid(mu, n: int) -> Grid:
    q = quantile_function(mu)
    lo, hi = float(q(1e-12)), float(q(1 - 1e-12))
    reach = min(abs(lo), abs(hi))
    # phi grows roughly like reach * |x|; keep exp(-phi) below ~1e-20 at the edges
    half = float(np.clip(60.0 / max(reach, 1e-12), 10.0, 80.0))
    return Grid.regular(-half, half, n)


def _check_target(mu):
    if isinstance(mu, GaussianParams):
        raise TypeError("sample Gaussian targets on a grid first")
    if mu.dim != 1:
        raise ValueError("moment maps are solved in one dimension only")
    if not is_centered(mu):
        raise PreconditionError(f"target barycenter {barycenter(mu)[0]:.3g} is not zero")
    if isinstance(mu, DiscreteMeasure) and support_rank(mu) < 1:
        raise PreconditionError("target is a point mass (supported on a hyperplane)")


def _finish(grid, phi_vals, dphi, mu, method, iterations, history) -> MomentMapSolution:
    phi = ConvexPotential(grid, phi_vals)
    rho = GridDensity(grid, np.exp(-phi_vals))
    res = pushforward_residual(grid, rho.masses, dphi, mu)
    sol = MomentMapSolution(phi, rho, mu, dphi, res, math.nan, method, iterations, history)
    if isinstance(mu, GridDensity):
        object.__setattr__(sol, "ma_residual", monge_ampere_residual(sol))
    return sol


# --- fixed point -----------------------------------------------------------------

def _pin_translation(x: np.ndarray, dphi: np.ndarray, h: float) -> np.ndarray:
    """Shift ``dphi`` so that ``exp(-phi)`` has barycenter zero.

    Translations of a solution are solutions; without pinning, the iterates
    drift along that family and the residual stalls at roughly ``rho * drift``.
    """
    m = np.exp(-_integrate(dphi, h)) * h
    b = float(np.sum(m * x))
    xs = x + b
    out = np.interp(xs, x, dphi)
    lo, hi = xs < x[0], xs > x[-1]
    out[lo] = dphi[0] + (xs[lo] - x[0]) * (dphi[1] - dphi[0]) / h
    out[hi] = dphi[-1] + (xs[hi] - x[-1]) * (dphi[-1] - dphi[-2]) / h
    return out


def _fixed_point(mu, grid: Grid, tol: float, max_iter: int, accept_floor: bool = False):
    x = grid.axis(0)
    h = grid.spacing[0]
    q = quantile_function(mu)
    dphi = x.copy()
    phi = _integrate(dphi, h)
    history = []
    for it in range(max_iter):
        m = np.exp(-phi) * h
        t = q(np.clip(_midpoint_cdf(m), 0.0, 1.0))
        cand_phi = _integrate(t, h)
        res = pushforward_residual(grid, np.exp(-cand_phi) * h, t, mu)
        history.append(res)
        if res < tol:
            return cand_phi, t, it + 1, history
        if accept_floor and it >= STALL_WINDOW and history[-1 - STALL_WINDOW] - res <= STALL_RTOL * res:
            return cand_phi, t, it + 1, history
        dphi = _pin_translation(x, DAMPING * dphi + (1 - DAMPING) * t, h)
        phi = _integrate(dphi, h)
    raise ConvergenceError(f"fixed point stalled at residual {history[-1]:.3g}", history[-1], history)


# --- variational ------------------------------------------------------------------

def _quantile_moments(mu):
    """``G(t) = int_0^t Q_mu`` and ``K(t) = int_0^t s Q_mu(s) ds``, exact on the
    piecewise-linear quantile function."""
    p = _pieces(mu)
    a, dc = p.c[:-1], np.diff(p.c)
    beta = np.where(dc > 0, (p.q1 - p.q0) / np.where(dc > 0, dc, 1.0), 0.0)

    def parts(k, tau):
        g = p.q0[k] * tau + 0.5 * beta[k] * tau ** 2
        kk = a[k] * g + 0.5 * p.q0[k] * tau ** 2 + beta[k] * tau ** 3 / 3.0
        return g, kk

    g_full, k_full = parts(np.arange(dc.size), dc)
    g_cum = np.concatenate([[0.0], np.cumsum(g_full)])
    k_cum = np.concatenate([[0.0], np.cumsum(k_full)])

    def moments(t):
        t = np.asarray(t, dtype=float)
        k = p.locate(t)
        g, kk = parts(k, np.clip(t - a[k], 0.0, dc[k]))
        return g_cum[k] + g, k_cum[k] + kk

    return moments


def quantile_levels(n: int = 8192, logit_range: float = 20.0):
    """Levels ``t_j`` uniform in ``log(t / (1 - t))`` together with ``1 - t_j``
    computed without cancellation; both tails are resolved down to masses of
    order ``exp(-logit_range)``."""
    s = np.linspace(-logit_range, logit_range, n + 1)
    return expit(s), expit(-s)


def _reflect(mu):
    if isinstance(mu, DiscreteMeasure):
        return mu.reflected()
    g = mu.grid
    return GridDensity(Grid((-g.upper[0],), (-g.lower[0],), g.shape), mu.values[::-1])


class QuantileObjective:
    """Discretised ``J(rho) = Ent(rho) - W2(mu, rho)^2 / 2`` in quantile coordinates.

    On levels ``t_0 < ... < t_N`` the candidate ``rho`` is uniform with mass
    ``p_j = t_{j+1} - t_j`` on ``[Q_j, Q_j + w_j]``. Up to a constant

        J = sum_j p_j log(p_j / w_j) + int_0^1 Q(t) Q_mu(t) dt,

    which is convex and separable in the widths ``w``: with ``Q_0 = 0`` the
    second term is ``sum_j w_j c_j`` where ``c_j`` is the mean over cell ``j``
    of ``C(t) = int_t^1 Q_mu``. The translation ``Q_0`` drops out when ``mu``
    is centred. Cell means use Simpson's rule, exact wherever ``Q_mu`` is
    linear across the cell. A barycenter ``b`` left over from rounding is
    removed by working with ``Q_mu - b``.
    """

    def __init__(self, mu, levels=None):
        t, u = quantile_levels() if levels is None else levels
        t, u = np.asarray(t, dtype=float), np.asarray(u, dtype=float)
        left = _quantile_moments(mu)
        right = _quantile_moments(_reflect(mu))
        # work with Q_mu - b; a grid target is centred only up to rounding
        b = float(left(1.0)[0])

        def tail(tt, uu):
            # C(t) = -G(t) below one half and -G_reflected(1 - t) above, both for Q_mu - b
            lo = -left(np.minimum(tt, 0.5))[0] + b * tt
            hi = -right(np.minimum(uu, 0.5))[0] - b * uu
            return np.where(tt <= 0.5, lo, hi)

        self.levels = t
        self.p = np.where(t[1:] <= 0.5, t[1:] - t[:-1], u[:-1] - u[1:])
        tm, um = 0.5 * (t[1:] + t[:-1]), 0.5 * (u[1:] + u[:-1])
        at_nodes = tail(t, u)
        self.c = (at_nodes[:-1] + 4 * tail(tm, um) + at_nodes[1:]) / 6.0
        self.node_density = at_nodes

    def value_and_grad(self, log_w):
        """``J`` and its gradient in the log-widths (with ``Q_0 = 0``)."""
        w = np.exp(log_w)
        val = float(np.sum(self.p * (np.log(self.p) - log_w)) + np.sum(w * self.c))
        return val, -self.p + w * self.c

    def minimizer(self) -> np.ndarray:
        """Stationary point ``w_j = p_j / c_j`` of the separable convex objective."""
        if np.any(self.c <= 0):
            raise NumericError("quantile objective is unbounded below on some cell")
        return np.log(self.p / self.c)


def _variational(mu, grid: Grid, levels=None):
    obj = QuantileObjective(mu, levels)
    w = np.exp(obj.minimizer())
    nodes = np.concatenate([[0.0], np.cumsum(w)])
    # translation: put the barycenter of the piecewise-uniform density at zero
    nodes -= np.sum(obj.p * 0.5 * (nodes[1:] + nodes[:-1]))
    # along the optimum rho(Q(t)) = C(t); interpolate log rho between nodes and
    # continue linearly with slope -Q_mu at the outermost levels
    q = quantile_function(mu)
    x = grid.axis(0)
    log_c = np.log(obj.node_density)
    phi = -np.interp(x, nodes, log_c)
    slope_lo, slope_hi = float(q(obj.levels[0])), float(q(obj.levels[-1]))
    left, right = x < nodes[0], x > nodes[-1]
    phi[left] = -log_c[0] + slope_lo * (x[left] - nodes[0])
    phi[right] = -log_c[-1] + slope_hi * (x[right] - nodes[-1])
    h = grid.spacing[0]
    # the exact minimiser is log-concave; remove interpolation noise in the tails
    phi = convex_envelope_1d(x, phi)
    phi += logsumexp(-phi) + math.log(h)
    return phi, np.gradient(phi, h, edge_order=2), 1, [float(obj.value_and_grad(np.log(w))[0])]


def solve_moment_map_1d(mu, grid: Grid | None = None, tol: float = 1e-6, method: str = "auto",
                        max_iter: int = 500, n: int = 2048, accept_floor: bool = False) -> MomentMapSolution:
    """Moment map of a centred 1D measure on a grid.

    ``method="fixed_point"`` iterates ``phi' <- (phi' + Q_mu(F_rho))/2`` with
    ``rho = exp(-phi)`` until the pushforward residual of the rearranged map
    drops below ``tol``. ``method="variational"`` minimises
    ``Ent(rho) - W2(mu, rho)^2 / 2`` in quantile coordinates, see
    :class:`QuantileObjective`.
    ``"auto"`` runs the fixed point and falls back to the minimisation,
    raising :class:`ConvergenceError` if neither meets ``tol``.
    With ``accept_floor=True`` an explicitly requested fixed point whose
    residual has stopped decreasing is returned as is; its
    ``pushforward_residual`` then records the discretisation floor (targets
    with near-empty gaps have a floor of first order in the grid step).

    Both solvers fix the translation freedom by centring ``rho`` and the
    additive constant by ``int exp(-phi) = 1``.
    """
    _check_target(mu)
    grid = _default_grid(mu, n) if grid is None else grid
    if grid.dim != 1:
        raise ValueError("grid must be one-dimensional")
    if method == "variational":
        return _finish_variational(mu, grid, max_iter)
    try:
        phi, t, it, hist = _fixed_point(mu, grid, tol, max_iter, accept_floor and method == "fixed_point")
        return _finish(grid, phi, t, mu, "fixed_point", it, hist)
    except ConvergenceError as exc:
        if method == "fixed_point":
            raise
        history = exc.history
    sol = _finish_variational(mu, grid, max_iter)
    if sol.pushforward_residual >= tol:
        raise ConvergenceError("neither solver reached the pushforward tolerance",
                               sol.pushforward_residual, history + [sol.pushforward_residual])
    return sol


def _finish_variational(mu, grid, max_iter):
    phi, t, it, hist = _variational(mu, grid)
    return _finish(grid, phi, t, mu, "variational", it, hist)


# --- checks on a solution ------------------------------------------------------------

def _derivatives(sol: MomentMapSolution):
    """``phi'`` as stored with the solution and ``phi''`` by central differences of it."""
    d1 = np.asarray(sol.dphi)
    return d1, np.gradient(d1, sol.grid.spacing[0], edge_order=2)


def _significant(rho: GridDensity) -> np.ndarray:
    return rho.values >= SIGNIFICANT * np.max(rho.values)


def monge_ampere_residual(sol: MomentMapSolution) -> float:
    """L1 grid norm of ``exp(-phi) - f(phi') phi''`` over significant cells.

    ``f`` is the target density, interpolated linearly between cell centres,
    constant out to the box edges and zero beyond; ``phi''`` is the central
    difference of the stored ``phi'``.
    """
    mu = sol.target
    if not isinstance(mu, GridDensity):
        raise PreconditionError("the Monge-Ampere residual needs a target density")
    h = sol.grid.spacing[0]
    d1, d2 = _derivatives(sol)
    f = np.interp(d1, mu.grid.axis(0), mu.values)
    f[(d1 < mu.grid.lower[0]) | (d1 > mu.grid.upper[0])] = 0.0
    keep = _significant(sol.rho)
    return float(np.sum(np.abs(sol.rho.values - f * d2)[keep]) * h)


def _log_hessian_mean(d2: np.ndarray, rho: GridDensity) -> float:
    keep = _significant(rho)
    if np.any(d2[keep] <= 0):
        raise NumericError("phi'' is not positive where rho carries mass (convexity degeneracy)")
    return float(np.sum(rho.masses[keep] * np.log(d2[keep])))


def entropy_identity_gap(sol: MomentMapSolution) -> float:
    """``|S(mu) - S(rho) - int log phi'' drho|``."""
    mu = sol.target
    if not isinstance(mu, GridDensity):
        raise PreconditionError("the entropy identity needs a target density")
    lhs = differential_entropy(mu)
    return abs(lhs - differential_entropy(sol.rho) - _log_hessian_mean(_derivatives(sol)[1], sol.rho))


def reverse_lsi_gap(rho: GridDensity) -> GapReport:
    """``(1/2) int log phi'' drho <= S(gamma) - S(rho)`` for log-concave ``rho = exp(-phi)``.

    ``phi''`` is the second difference of ``-log rho`` at interior cells. The
    error estimate is the change of the gap between the grid and its
    every-other-sample subgrid.
    """
    if rho.dim != 1:
        raise ValueError("one-dimensional densities only")

    def sides(r: GridDensity):
        with np.errstate(divide="ignore"):
            phi = -np.log(r.values)
        try:
            ConvexPotential(r.grid, phi)
        except PreconditionError as exc:
            raise PreconditionError(f"density is not log-concave: {exc}") from exc
        h = r.grid.spacing[0]
        with np.errstate(invalid="ignore"):
            d2 = np.concatenate([[np.inf], (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / h ** 2, [np.inf]])
        keep = _significant(r)
        keep[[0, -1]] = False
        if np.any(~(d2[keep] > 0)):
            raise NumericError("phi'' is not positive where rho carries mass (convexity degeneracy)")
        lhs = 0.5 * float(np.sum(r.masses[keep] * np.log(d2[keep])))
        rhs = 0.5 * r.dim * (LOG_2PI + 1) - differential_entropy(r)
        return lhs, rhs

    lhs, rhs = sides(rho)
    lhs2, rhs2 = sides(rho.subsampled())
    return GapReport.from_sides(lhs, rhs, abs((rhs - lhs) - (rhs2 - lhs2)))


def x_dot_grad_phi_check(sol: MomentMapSolution) -> float:
    """``d - int x phi'(x) drho(x)``, nonnegative up to truncation."""
    d1, _ = _derivatives(sol)
    x = sol.grid.axis(0)
    return 1.0 - float(np.sum(sol.rho.masses * x * d1))


def lsi_deficit(mu, nu) -> float:
    """``Ent(mu) + Ent(nu) - W2(mu, nu)^2 / 2`` for centred ``mu``."""
    if not is_centered(mu, 1e-4 if isinstance(mu, GridDensity) else None):
        raise PreconditionError("mu must be centered")
    if isinstance(mu, GaussianParams) and isinstance(nu, GaussianParams):
        return gaussian_rel_entropy(mu) + gaussian_rel_entropy(nu) - 0.5 * gaussian_w2_squared(mu, nu)
    if isinstance(mu, GaussianParams):
        mu = mu.on_grid(nu.grid)
    if isinstance(nu, GaussianParams):
        nu = nu.on_grid(mu.grid)
    if mu.dim != 1:
        raise ValueError("numeric deficits are one-dimensional")
    return rel_entropy_gaussian(mu) + rel_entropy_gaussian(nu) - 0.5 * quantile_w2_1d(mu, nu)


# --- comparison and serialisation ----------------------------------------------------

def centered_values(rho: GridDensity) -> np.ndarray:
    """Density values translated so that the barycenter sits at zero
    (linear interpolation on the same grid)."""
    x = rho.grid.axis(0)
    b = barycenter(rho)[0]
    return np.interp(x + b, x, rho.values, left=0.0, right=0.0)


def l1_distance(rho_a: GridDensity, rho_b: GridDensity, align: bool = True) -> float:
    if rho_a.grid != rho_b.grid:
        raise ValueError("densities must share a grid")
    a = centered_values(rho_a) if align else rho_a.values
    b = centered_values(rho_b) if align else rho_b.values
    return float(np.sum(np.abs(a - b)) * rho_a.grid.cell_volume)


def dumps_solution(sol: MomentMapSolution) -> str:
    return "\n".join([
        "# phi", dumps(sol.phi).rstrip(),
        "# rho", dumps(sol.rho).rstrip(),
        f"# residuals pushforward={sol.pushforward_residual!r} monge_ampere={sol.ma_residual!r} "
        f"method={sol.method} iterations={sol.iterations}",
    ]) + "\n"
