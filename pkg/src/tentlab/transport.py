"""Optimal transport backends.

* :func:`solve_exact` -- transportation LP (dual simplex) with dual potentials;
* :func:`solve_sinkhorn` -- log-domain entropic solver with epsilon scaling and
  a rounding step that returns an exactly feasible plan;
* :func:`quantile_w2_1d` -- exact 1D transport through quantile functions;
* :func:`w2_squared_with_error` -- dispatch, with network simplex from POT
  for grid densities in two dimensions.

Costs are either the squared distance or the bilinear cost ``-x.y``; the
latter is always reduced to the former through
``-x.y = (|x - y|^2 - |x|^2 - |y|^2) / 2``.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.special import logsumexp

from .exceptions import CapacityError, ConvergenceError, FeasibilityError, NumericError
from .gaussian import gaussian_w2_squared
from .measures import (DiscreteMeasure, GaussianParams, GridDensity, TransportPlan,
                       dumps, second_moment)

MAX_PAIRS = 10 ** 6
PRUNE_MASS = 1e-14  # grid cells lighter than this are dropped before transport


class CostKind(str, enum.Enum):
    QUADRATIC = "Quadratic"
    NEGDOT = "NegDot"


def cost_matrix(x: np.ndarray, y: np.ndarray, kind=CostKind.QUADRATIC) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    if CostKind(kind) is CostKind.NEGDOT:
        return -(x @ y.T)
    return np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=-1)


@dataclass(frozen=True)
class DualPotentials:
    f: np.ndarray
    g: np.ndarray
    cost_kind: CostKind

    def value(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        return float(mu.weights @ self.f + nu.weights @ self.g)

    def check_feasible(self, mu, nu, tol: float = 1e-9):
        """Raise :class:`FeasibilityError` at the worst pair with
        ``f(x) + g(y) > c(x, y) + tol``."""
        c = cost_matrix(mu.points, nu.points, self.cost_kind)
        excess = self.f[:, None] + self.g[None, :] - c
        i, j = np.unravel_index(np.argmax(excess), excess.shape)
        if excess[i, j] > tol:
            raise FeasibilityError(
                f"dual constraint violated by {excess[i, j]:.3g} at pair ({i}, {j})",
                pair=(int(i), int(j)), violation=float(excess[i, j]))


@dataclass(frozen=True)
class ExactSolution:
    cost: float
    plan: TransportPlan
    duals: DualPotentials


def _transport_constraints(n: int, m: int):
    idx = np.arange(n * m)
    rows = sp.csr_matrix((np.ones(n * m), (np.repeat(np.arange(n), m), idx)), shape=(n, n * m))
    cols = sp.csr_matrix((np.ones(n * m), (np.tile(np.arange(m), n), idx)), shape=(m, n * m))
    return sp.vstack([rows, cols]).tocsc()


def _to_negdot_duals(duals: DualPotentials, mu, nu) -> DualPotentials:
    # |x-y|^2 constraint halves into the bilinear one after removing the norms
    f = 0.5 * (duals.f - np.sum(mu.points ** 2, axis=1))
    g = 0.5 * (duals.g - np.sum(nu.points ** 2, axis=1))
    return DualPotentials(f, g, CostKind.NEGDOT)


def solve_exact(mu: DiscreteMeasure, nu: DiscreteMeasure, cost_kind=CostKind.QUADRATIC) -> ExactSolution:
    """Exact discrete optimal transport by dual simplex.

    Returns the optimal cost, a vertex plan and dual potentials whose value
    matches the primal cost.
    """
    cost_kind = CostKind(cost_kind)
    n, m = mu.size, nu.size
    if n * m > MAX_PAIRS:
        raise CapacityError(f"{n} x {m} problem exceeds the {MAX_PAIRS} pair guard")
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch")
    c = cost_matrix(mu.points, nu.points, CostKind.QUADRATIC)
    lp = dict(A_eq=_transport_constraints(n, m), b_eq=np.concatenate([mu.weights, nu.weights]),
              bounds=(0, None), method="highs-ds")
    tight = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
    res = linprog(c.ravel(), options=tight, **lp)
    if res.status == 2:
        # presolve can misjudge feasibility when some weights are ~1e-20
        res = linprog(c.ravel(), options={**tight, "presolve": False}, **lp)
    if res.status != 0:
        raise NumericError(f"transport LP failed: {res.message}")
    # clear solver-tolerance noise so the plan has exact marginals
    plan_mat = round_to_feasible(np.maximum(res.x.reshape(n, m), 0.0), mu.weights, nu.weights)
    plan = TransportPlan(mu, nu, plan_mat)
    marg = res.eqlin.marginals
    duals = DualPotentials(marg[:n].copy(), marg[n:].copy(), CostKind.QUADRATIC)
    cost = float(np.sum(plan.coupling * c))
    if cost_kind is CostKind.NEGDOT:
        duals = _to_negdot_duals(duals, mu, nu)
        cost = 0.5 * (cost - second_moment(mu) - second_moment(nu))
    return ExactSolution(cost, plan, duals)


def plan_cost(plan: TransportPlan, cost_kind=CostKind.QUADRATIC) -> float:
    c = cost_matrix(plan.source.points, plan.target.points, cost_kind)
    return float(np.sum(plan.coupling * c))


def duality_gap(plan: TransportPlan, duals: DualPotentials, tol: float = 1e-9) -> float:
    """Primal cost of ``plan`` minus the dual value of ``duals``.

    Raises :class:`FeasibilityError` if the duals are not admissible.
    """
    duals.check_feasible(plan.source, plan.target, tol=tol)
    return plan_cost(plan, duals.cost_kind) - duals.value(plan.source, plan.target)


# --- entropic solver ----------------------------------------------------------

@dataclass(frozen=True)
class SinkhornResult:
    cost_regularized: float
    cost_rounded_upper: float
    plan: TransportPlan
    epsilon: float
    iterations: int


def round_to_feasible(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Scale rows and columns down to the marginals, then add the rank-one
    correction carrying the missing mass; the result has exact marginals."""
    p = np.array(p, dtype=float)
    rs = p.sum(axis=1)
    x = np.where(rs > a, a / np.where(rs > 0, rs, 1.0), 1.0)
    p *= x[:, None]
    cs = p.sum(axis=0)
    y = np.where(cs > b, b / np.where(cs > 0, cs, 1.0), 1.0)
    p *= y[None, :]
    err_r = a - p.sum(axis=1)
    err_c = b - p.sum(axis=0)
    total = err_r.sum()
    if total > 0:
        p += np.outer(err_r, err_c) / total
    return p


def epsilon_schedule(start: float, target: float, factor: float = 0.5) -> list:
    eps, out = max(start, target), []
    while eps > target:
        out.append(eps)
        eps *= factor
    out.append(target)
    return out


def _log_update(f, g, c, loga, logb, eps):
    f = -eps * logsumexp(logb[None, :] + (g[None, :] - c) / eps, axis=1)
    g = -eps * logsumexp(loga[:, None] + (f[:, None] - c) / eps, axis=0)
    return f, g


def solve_sinkhorn(mu: DiscreteMeasure, nu: DiscreteMeasure, cost_kind=CostKind.QUADRATIC,
                   epsilon: float = 1e-3, factor: float = 0.5, tol: float = 1e-9,
                   max_iter: int = 500_000, stage_tol: float = 1e-5,
                   absorb_at: float = 1e30) -> SinkhornResult:
    """Entropic transport with log-domain potentials and epsilon scaling.

    The schedule starts at the squared diameter of the supports and halves
    down to ``epsilon``. Within a stage, scaling vectors are iterated against
    the stabilised kernel ``a b^T exp((f + g - C) / eps)`` and absorbed into the log
    potentials ``f, g`` whenever they leave ``[1/absorb_at, absorb_at]``.
    Intermediate stages stop at ``stage_tol`` and the final one at ``tol``
    (L1 residual of the row marginal). The rounded plan is feasible, so
    ``cost_rounded_upper`` bounds the exact optimum from above.
    """
    cost_kind = CostKind(cost_kind)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    c = cost_matrix(mu.points, nu.points, CostKind.QUADRATIC)
    a, b = mu.weights, nu.weights
    loga, logb = np.log(a), np.log(b)
    f, g = np.zeros(a.size), np.zeros(b.size)
    schedule = epsilon_schedule(float(c.max()) if c.size else epsilon, epsilon, factor)
    total_it = 0
    err = np.inf
    for k, eps in enumerate(schedule):
        final = k == len(schedule) - 1
        goal = tol if final else stage_tol
        history = []
        f, g = _log_update(f, g, c, loga, logb, eps)
        kern = np.exp(loga[:, None] + logb[None, :] + (f[:, None] + g[None, :] - c) / eps)
        u, v = np.ones(a.size), np.ones(b.size)
        for it in range(max_iter):
            kv = kern @ v
            if np.any(kv <= 0):
                f, g = _log_update(f + eps * np.log(u), g + eps * np.log(v), c, loga, logb, eps)
                kern = np.exp(loga[:, None] + logb[None, :] + (f[:, None] + g[None, :] - c) / eps)
                u, v = np.ones(a.size), np.ones(b.size)
                kv = kern @ v
            u = a / kv
            ktu = kern.T @ u
            v = b / np.where(ktu > 0, ktu, np.inf)
            total_it += 1
            if max(u.max(), v.max()) > absorb_at or min(u.min(), v[v > 0].min(initial=1.0)) < 1 / absorb_at:
                f, g = f + eps * np.log(u), g + eps * np.log(np.where(v > 0, v, 1.0))
                f, g = _log_update(f, g, c, loga, logb, eps)
                kern = np.exp(loga[:, None] + logb[None, :] + (f[:, None] + g[None, :] - c) / eps)
                u, v = np.ones(a.size), np.ones(b.size)
            if it % 10 == 0:
                err = float(np.abs(u * (kern @ v) - a).sum())
                history.append(err)
                if err < goal:
                    break
        else:
            if final:
                raise ConvergenceError(
                    f"Sinkhorn did not reach {tol:g} at epsilon={eps:g} (residual {err:.3g})",
                    residual=err, history=history)
        f, g = f + eps * np.log(u), g + eps * np.log(np.where(v > 0, v, 1.0))
    eps = schedule[-1]
    p = np.exp(loga[:, None] + logb[None, :] + (f[:, None] + g[None, :] - c) / eps)
    pos = p > 0
    kl = float(np.sum(p[pos] * np.log(p[pos] / np.outer(a, b)[pos])))
    reg = float(np.sum(p * c)) + eps * kl
    rounded = round_to_feasible(p, a, b)
    plan = TransportPlan(mu, nu, rounded)
    upper = float(np.sum(plan.coupling * c))
    if cost_kind is CostKind.NEGDOT:
        shift = second_moment(mu) + second_moment(nu)
        reg, upper = 0.5 * (reg - shift), 0.5 * (upper - shift)
    return SinkhornResult(reg, upper, plan, eps, total_it)


# --- one-dimensional transport ------------------------------------------------

@dataclass(frozen=True)
class _QuantilePieces:
    """Quantile function as segments: on ``[c[k], c[k+1]]`` it runs linearly
    from ``q0[k]`` to ``q1[k]`` (constant for atoms)."""

    c: np.ndarray
    q0: np.ndarray
    q1: np.ndarray

    def locate(self, t):
        k = np.searchsorted(self.c, t, side="right") - 1
        return np.clip(k, 0, self.q0.size - 1)

    def at(self, t, k=None):
        t = np.asarray(t, dtype=float)
        k = self.locate(t) if k is None else k
        width = self.c[k + 1] - self.c[k]
        frac = np.where(width > 0, (t - self.c[k]) / np.where(width > 0, width, 1.0), 0.0)
        return self.q0[k] + np.clip(frac, 0.0, 1.0) * (self.q1[k] - self.q0[k])


def _cumulative(w):
    c = np.concatenate([[0.0], np.cumsum(w)])
    c /= c[-1]
    return c


def _pieces(m) -> _QuantilePieces:
    if isinstance(m, DiscreteMeasure):
        if m.dim != 1:
            raise ValueError("quantile transport needs one-dimensional measures")
        order = np.argsort(m.points[:, 0], kind="stable")
        x, w = m.points[order, 0], m.weights[order]
        return _QuantilePieces(_cumulative(w), x, x)
    if isinstance(m, GridDensity):
        if m.dim != 1:
            raise ValueError("quantile transport needs one-dimensional measures")
        e = m.grid.edges(0)
        w = m.masses
        keep = w > 0
        return _QuantilePieces(_cumulative(w[keep]), e[:-1][keep], e[1:][keep])
    raise TypeError(f"unsupported measure {type(m).__name__}")


def quantile_function(m):
    """Generalised inverse CDF of a 1D discrete or grid measure."""
    pieces = _pieces(m)

    def q(t):
        t = np.asarray(t, dtype=float)
        if isinstance(m, DiscreteMeasure):
            k = np.clip(np.searchsorted(pieces.c[1:], t, side="left"), 0, pieces.q0.size - 1)
            return pieces.q0[k]
        return pieces.at(t)

    return q


def cdf_function(m):
    """CDF of a 1D measure; piecewise linear for grid densities."""
    if isinstance(m, GridDensity):
        e = m.grid.edges(0)
        cum = _cumulative(m.masses)
        return lambda x: np.interp(x, e, cum)
    if isinstance(m, DiscreteMeasure):
        order = np.argsort(m.points[:, 0], kind="stable")
        x, cum = m.points[order, 0], np.cumsum(m.weights[order])
        return lambda t: np.where(np.asarray(t) < x[0], 0.0,
                                  cum[np.clip(np.searchsorted(x, t, side="right") - 1, 0, x.size - 1)])
    raise TypeError(f"unsupported measure {type(m).__name__}")


def quantile_w2_1d(mu, nu) -> float:
    """Squared W2 between 1D measures, ``int_0^1 (Q_mu - Q_nu)^2 dt``.

    Grid densities are treated as piecewise constant, so both quantile
    functions are piecewise linear between the merged breakpoints and the
    integral is evaluated exactly there.
    """
    pm, pn = _pieces(mu), _pieces(nu)
    t = np.union1d(pm.c, pn.c)
    t0, t1 = t[:-1], t[1:]
    dt = t1 - t0
    keep = dt > 0
    t0, t1, dt = t0[keep], t1[keep], dt[keep]
    mid = 0.5 * (t0 + t1)
    km, kn = pm.locate(mid), pn.locate(mid)
    d0 = pm.at(t0, km) - pn.at(t0, kn)
    d1 = pm.at(t1, km) - pn.at(t1, kn)
    return float(np.sum(dt * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0))


# --- dispatch -------------------------------------------------------------------

def _block_stats(gd: GridDensity, block: int):
    """Centroid atoms of cell blocks and the mean within-block variance."""
    pts = gd.grid.points()
    w = gd.masses.ravel()
    shape = gd.grid.shape
    ids = np.stack(np.meshgrid(*[np.arange(s) // block for s in shape], indexing="ij"), axis=-1)
    nb = [-(-s // block) for s in shape]
    label = np.ravel_multi_index(tuple(ids[..., k].ravel() for k in range(gd.dim)), nb)
    mass = np.bincount(label, weights=w, minlength=int(np.prod(nb)))
    keep = mass > 0
    centroid = np.stack([np.bincount(label, weights=w * pts[:, k], minlength=mass.size) for k in range(gd.dim)],
                        axis=1)
    centroid[keep] /= mass[keep, None]
    spread = np.sum(w * np.sum((pts - centroid[label]) ** 2, axis=1))
    return DiscreteMeasure.from_unnormalized(centroid[keep], mass[keep]), float(spread)


def _emd2(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """Exact squared W2 between discrete measures by network simplex (POT)."""
    for key in ("PYTORCH", "JAX", "CUPY", "TENSORFLOW"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{key}", "1")
    import ot

    c = cost_matrix(a.points, b.points)
    val = ot.emd2(a.weights, b.weights, c, numItermax=10 ** 8, check_marginals=False)
    return float(max(val, 0.0))


def _grid_atoms(m, block: int) -> DiscreteMeasure:
    """Centroid atoms of ``block``-wide cell blocks of a grid density, dropping
    atoms lighter than ``PRUNE_MASS``; discrete measures pass through."""
    if isinstance(m, DiscreteMeasure):
        return m
    if not isinstance(m, GridDensity):
        raise TypeError("mixed Gaussian / numeric inputs need a common representation")
    if block == 1:
        pts, w = m.grid.points(), m.masses.ravel()
    else:
        atoms, _ = _block_stats(m, block)
        pts, w = atoms.points, atoms.weights
    keep = w > PRUNE_MASS
    return DiscreteMeasure.from_unnormalized(pts[keep], w[keep])


def _atom_count(m, block: int) -> int:
    if isinstance(m, DiscreteMeasure):
        return m.weights.size
    if block == 1:
        return int(np.count_nonzero(m.masses > PRUNE_MASS))
    return _grid_atoms(m, block).weights.size


def w2_squared_with_error(mu, nu, max_atoms: int = 2500):
    """Squared W2 with a discretisation error estimate, dispatched on type.

    Gaussians use the closed form; 1D inputs use quantile transport (exact for
    the represented measures); other discrete inputs use :func:`solve_exact`.
    Grid densities in two dimensions become cell-centre atoms (cells below
    ``PRUNE_MASS`` dropped; blocks of cells merged into centroids while either
    side exceeds ``max_atoms``) and are solved exactly by network simplex. The
    error estimate is the change when the block width is doubled, plus the
    mean within-block squared spread of both sides when blocks were merged.
    """
    if isinstance(mu, GaussianParams) and isinstance(nu, GaussianParams):
        return gaussian_w2_squared(mu, nu), 0.0
    if mu.dim == 1 and nu.dim == 1:
        return quantile_w2_1d(mu, nu), 0.0
    if isinstance(mu, DiscreteMeasure) and isinstance(nu, DiscreteMeasure):
        return solve_exact(mu, nu).cost, 0.0
    block = 1
    while max(_atom_count(mu, block), _atom_count(nu, block)) > max_atoms:
        block += 1
    fine = _emd2(_grid_atoms(mu, block), _grid_atoms(nu, block))
    coarse = _emd2(_grid_atoms(mu, 2 * block), _grid_atoms(nu, 2 * block))
    err = abs(fine - coarse)
    if block > 1:
        # merged blocks hide their own spread; it bounds W2^2 from above
        err += sum(_block_stats(m, block)[1] for m in (mu, nu) if isinstance(m, GridDensity))
    return fine, err


def negdot_cost(mu, nu) -> float:
    """``inf_pi int -x.y dpi`` through ``(W2^2 - M2(mu) - M2(nu)) / 2``."""
    w2, _ = w2_squared_with_error(mu, nu)
    return 0.5 * (w2 - second_moment(mu) - second_moment(nu))


def dumps_plan(plan: TransportPlan, threshold: float = 0.0) -> str:
    """Source and target in the measure text format, then ``i j mass`` lines."""
    out = ["# source", dumps(plan.source).rstrip(), "# target", dumps(plan.target).rstrip(), "# coupling"]
    out += [f"{i} {j} {format(w, '.17g')}" for i, j, w in plan.triplets(threshold)]
    return "\n".join(out) + "\n"


def loads_plan(text: str) -> TransportPlan:
    from .measures import loads
    blocks, cur = {}, None
    for line in text.splitlines():
        if line.startswith("# "):
            cur = line[2:].strip()
            blocks[cur] = []
        elif line.strip():
            blocks[cur].append(line)
    src = loads("\n".join(blocks["source"]))
    tgt = loads("\n".join(blocks["target"]))
    p = np.zeros((src.size, tgt.size))
    for ln in blocks.get("coupling", []):
        i, j, w = ln.split()
        p[int(i), int(j)] = float(w)
    return TransportPlan(src, tgt, p)
