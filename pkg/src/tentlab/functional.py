"""Discrete Legendre transforms, grid entropies and the log-Laplace functional."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import ConvergenceError, PreconditionError, TruncationError
from .measures import Grid, GridDensity, GridFunction, barycenter, second_moment

DECAY_MARGIN = 30.0
LOG_2PI = math.log(2 * math.pi)


class Estimate(NamedTuple):
    """Quadrature value with its refinement error estimate ``|I_h - I_2h|``."""

    value: float
    error: float


# --- Legendre transform -------------------------------------------------------

def lower_hull(x: np.ndarray, fx: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull of ``(x, fx)``; ``x`` ascending.

    Collinear points are dropped, so consecutive hull slopes strictly increase.
    """
    hull = []
    for i in range(x.size):
        while len(hull) >= 2:
            j, k = hull[-2], hull[-1]
            # drop k if it lies on or above the chord j -> i
            if (fx[k] - fx[j]) * (x[i] - x[j]) >= (fx[i] - fx[j]) * (x[k] - x[j]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull, dtype=int)


@dataclass(frozen=True)
class Conjugate1D:
    """Exact conjugate of finitely many samples, kept as the hull data."""

    xs: np.ndarray
    fs: np.ndarray
    slopes: np.ndarray
    open_left: bool
    open_right: bool

    def __call__(self, y, extend: bool = True) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.xs.size == 0:
            return np.full(y.shape, -np.inf)
        k = np.searchsorted(self.slopes, y, side="left")
        out = self.xs[k] * y - self.fs[k]
        if extend and self.slopes.size:
            if self.open_left:
                out = np.where(y < self.slopes[0], np.inf, out)
            if self.open_right:
                out = np.where(y > self.slopes[-1], np.inf, out)
        return out

    @property
    def slope_range(self):
        if self.slopes.size == 0:
            return (float(self.xs[0]), float(self.xs[0])) if self.xs.size else (0.0, 0.0)
        return float(self.slopes[0]), float(self.slopes[-1])


def conjugate_1d(x, fx, open_left: bool = True, open_right: bool = True) -> Conjugate1D:
    """Conjugate ``y -> max_i (x_i y - f_i)`` over the finite samples.

    ``open_left``/``open_right`` say whether the function continues beyond the
    first/last finite sample (a truncated grid) rather than jumping to
    ``+inf``. With ``extend=True`` at evaluation, slopes beyond the hull's
    range on an open side map to ``+inf``, as for the untruncated function.
    """
    x = np.asarray(x, dtype=float)
    fx = np.asarray(fx, dtype=float)
    fin = np.isfinite(fx)
    if np.any(fx[~fin] < 0):
        raise PreconditionError("conjugate input takes the value -inf")
    xs, fs = x[fin], fx[fin]
    if xs.size == 0:
        return Conjugate1D(xs, fs, np.empty(0), False, False)
    idx = lower_hull(xs, fs)
    hx, hf = xs[idx], fs[idx]
    slopes = np.diff(hf) / np.diff(hx)
    first, last = np.flatnonzero(fin)[[0, -1]]
    return Conjugate1D(hx, hf, slopes, open_left and first == 0, open_right and last == x.size - 1)


def convex_envelope_1d(x, fx) -> np.ndarray:
    """Discrete convex envelope (piecewise-linear lower hull) at the samples."""
    x = np.asarray(x, dtype=float)
    conj = conjugate_1d(x, fx)
    if conj.slopes.size == 0:
        return np.where(np.isfinite(fx), fx, np.inf)
    # second conjugate evaluated from the conjugate's own breakpoints
    s = conj.slopes
    back = conjugate_1d(s, conj(s, extend=False), open_left=False, open_right=False)
    out = back(x, extend=False)
    lo, hi = conj.xs[0], conj.xs[-1]
    return np.where((x >= lo) & (x <= hi), out, np.inf)


def _aligned_axis(lo: float, hi: float, n_core: int, pad: float = 0.1):
    if not hi > lo:
        width = max(1.0, abs(lo))
        lo, hi = lo - 0.5 * width, hi + 0.5 * width
    h = (hi - lo) / n_core
    n_pad = int(math.ceil(pad * n_core))
    return lo - n_pad * h, hi + n_pad * h, n_core + 2 * n_pad


def default_conjugate_grid(f: GridFunction, n_core=None) -> Grid:
    """Slope range of the samples, padded by 10% with cell edges on its ends."""
    v = np.asarray(f.values)
    lowers, uppers, shape = [], [], []
    for k in range(f.dim):
        x = f.grid.axis(k)
        lo, hi = np.inf, -np.inf
        lines = np.moveaxis(v, k, -1).reshape(-1, v.shape[k])
        for row in lines:
            if not np.isfinite(row).any():
                continue
            a, b = conjugate_1d(x, row).slope_range
            lo, hi = min(lo, a), max(hi, b)
        nc = f.grid.shape[k] if n_core is None else np.broadcast_to(n_core, (f.dim,))[k]
        a, b, n = _aligned_axis(lo, hi, int(nc))
        lowers.append(a)
        uppers.append(b)
        shape.append(n)
    return Grid(tuple(lowers), tuple(uppers), tuple(shape))


def mass_conjugate_grid(f: GridFunction, level: float = 60.0, probe: int = 257) -> Grid:
    """Conjugate grid for integrating ``exp(-f*)``.

    The slope range of the default grid is cut down to the box where a
    coarse conjugate stays within ``level`` of its minimum, then resampled
    with as many cells as the input. Ends that are not cut keep a cell edge
    on the slope-range end.
    """
    full = default_conjugate_grid(f, n_core=probe)
    coarse = np.asarray(legendre(f, full).values)
    keep = np.isfinite(coarse) & (coarse <= np.min(coarse) + level)
    lowers, uppers, shape = [], [], []
    for k in range(f.dim):
        y = full.axis(k)
        hit = np.flatnonzero(np.moveaxis(keep, k, 0).reshape(y.size, -1).any(axis=1))
        hk = full.spacing[k]
        n_pad = int(math.ceil(0.1 * probe))
        s_lo, s_hi = full.lower[k] + n_pad * hk, full.upper[k] - n_pad * hk
        a = max(s_lo, y[hit[0]] - 2 * hk)
        b = min(s_hi, y[hit[-1]] + 2 * hk)
        lo, hi, n = _aligned_axis(a, b, f.grid.shape[k])
        lowers.append(lo)
        uppers.append(hi)
        shape.append(n)
    return Grid(tuple(lowers), tuple(uppers), tuple(shape))


def _conjugate_lines(values, x, y, extend):
    out = np.empty((values.shape[0], y.size))
    for i, row in enumerate(values):
        out[i] = conjugate_1d(x, row)(y, extend=extend)
    return out


def legendre(f: GridFunction, out_grid: Grid | None = None, extend: bool = True) -> GridFunction:
    """Convex conjugate ``f*(y) = sup_x (x.y - f(x))`` over the grid samples.

    One dimension uses the lower hull of the samples followed by a monotone
    merge with the sorted output slopes. Two dimensions apply the 1D
    transform along axis 0, then axis 1. With ``extend`` the grid is read as a
    truncation of a function living on all of R^d, and slopes that are never
    attained inside the box are set to ``+inf``.
    """
    if f.dim not in (1, 2):
        raise ValueError("conjugates are implemented for dimensions 1 and 2")
    if not f.mask.any():
        raise PreconditionError("empty effective domain")
    out_grid = default_conjugate_grid(f) if out_grid is None else out_grid
    v = np.asarray(f.values)
    if f.dim == 1:
        vals = conjugate_1d(f.grid.axis(0), v)(out_grid.axis(0), extend=extend)
        return GridFunction(out_grid, vals)
    x0, x1 = f.grid.axis(0), f.grid.axis(1)
    y0, y1 = out_grid.axis(0), out_grid.axis(1)
    # partial[x1_j, y0_i] = sup_{x0} (x0 y0 - f(x0, x1_j))
    partial = _conjugate_lines(v.T, x0, y0, extend)
    neg = -partial.T  # shape (y0, x1); convex in x1 for each y0
    out = np.empty((y0.size, y1.size))
    for i, row in enumerate(neg):
        if np.any(row == -np.inf):
            out[i] = np.inf
        else:
            out[i] = conjugate_1d(x1, row)(y1, extend=extend)
    return GridFunction(out_grid, out)


def legendre_bruteforce(f: GridFunction, out_grid: Grid) -> np.ndarray:
    """O(N M) reference: direct maximum over all sample pairs, no extension."""
    xs = f.grid.points()[f.mask.ravel()]
    fv = np.asarray(f.values).ravel()[f.mask.ravel()]
    ys = out_grid.points()
    out = np.empty(ys.shape[0])
    for start in range(0, ys.shape[0], 512):
        blk = ys[start:start + 512]
        out[start:start + 512] = np.max(blk @ xs.T - fv[None, :], axis=1)
    return out.reshape(out_grid.shape)


# --- entropies ------------------------------------------------------------------

def _neg_entropy_sum(rho: GridDensity) -> float:
    v = rho.values
    pos = v > 0
    return float(np.sum(v[pos] * np.log(v[pos])) * rho.cell_volume)


def differential_entropy(rho: GridDensity) -> float:
    """``S(rho) = -int rho log rho`` by the midpoint rule, ``0 log 0 = 0``."""
    return -_neg_entropy_sum(rho)


def differential_entropy_estimate(rho: GridDensity) -> Estimate:
    s = differential_entropy(rho)
    return Estimate(s, abs(s - differential_entropy(rho.subsampled())))


def rel_entropy_gaussian(rho: GridDensity) -> float:
    """``Ent_gamma(rho) = -S(rho) + M2(rho)/2 + (d/2) log 2 pi``."""
    return -differential_entropy(rho) + 0.5 * second_moment(rho) + 0.5 * rho.dim * LOG_2PI


def rel_entropy_gaussian_estimate(rho: GridDensity) -> Estimate:
    e = rel_entropy_gaussian(rho)
    return Estimate(e, abs(e - rel_entropy_gaussian(rho.subsampled())))


def rel_entropy(rho: GridDensity, potential: GridFunction) -> float:
    """Entropy of ``rho`` relative to the normalised ``exp(-V)`` on the same grid."""
    if potential.grid != rho.grid:
        raise ValueError("density and potential must share a grid")
    v = np.asarray(potential.values)
    pos = rho.values > 0
    if np.any(~np.isfinite(v[pos])):
        return math.inf
    log_z = potential.log_integral_exp(-1.0)
    return -differential_entropy(rho) + float(np.sum(rho.masses[pos] * v[pos])) + log_z


def rel_entropy_estimate(rho: GridDensity, potential: GridFunction) -> Estimate:
    e = rel_entropy(rho, potential)
    sub = GridFunction(potential.grid.subsampled(), np.asarray(potential.values)[::2])
    return Estimate(e, abs(e - rel_entropy(rho.subsampled(), sub)))


def entropy_dx(rho: GridDensity) -> float:
    """``Ent_dx(rho) = int rho log rho = -S(rho)``."""
    return _neg_entropy_sum(rho)


# --- log-Laplace functional -------------------------------------------------------

@dataclass(frozen=True)
class TiltedMoments:
    log_laplace: float
    mean: np.ndarray
    covariance: np.ndarray


def _boundary_mask(shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for k in range(len(shape)):
        idx = [slice(None)] * len(shape)
        idx[k] = 0
        mask[tuple(idx)] = True
        idx[k] = -1
        mask[tuple(idx)] = True
    return mask


def check_decay(log_values: np.ndarray, margin: float = DECAY_MARGIN) -> float:
    """Gap between the interior maximum and the largest boundary value of a
    log-integrand; raises :class:`TruncationError` if below ``margin``."""
    lv = np.asarray(log_values)
    border = _boundary_mask(lv.shape)
    top = np.max(lv)
    edge = np.max(lv[border])
    gap = top - edge
    if not gap >= margin:
        raise TruncationError(f"integrand decays by only {gap:.3g} (< {margin}) at the grid boundary")
    return float(gap)


def tilted_moments(f: GridFunction, lam, margin: float = DECAY_MARGIN) -> TiltedMoments:
    """``Lambda(lam) = log int exp(f + lam.x) dx`` with its gradient (tilted
    mean) and Hessian (tilted covariance)."""
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (f.dim,))
    mesh = f.grid.mesh()
    lv = np.asarray(f.values) + sum(l * m for l, m in zip(lam, mesh))
    check_decay(lv, margin)
    top = np.max(lv)
    w = np.exp(lv - top)
    z = w.sum()
    lap = float(top + math.log(z) + math.log(f.grid.cell_volume))
    w = w / z
    mean = np.array([np.sum(w * m) for m in mesh])
    cov = np.array([[np.sum(w * (a - mean[i]) * (b - mean[j])) for j, b in enumerate(mesh)]
                    for i, a in enumerate(mesh)])
    return TiltedMoments(lap, mean, cov)


def log_laplace(f: GridFunction, lam=0.0) -> float:
    return tilted_moments(f, lam).log_laplace


def log_laplace_grad(f: GridFunction, lam=0.0) -> np.ndarray:
    return tilted_moments(f, lam).mean


@dataclass(frozen=True)
class Recentering:
    lam: np.ndarray
    f_tilde: GridFunction
    g_tilde: GridFunction | None
    iterations: int
    residual: float


def shift_partner(g: GridFunction, lam) -> GridFunction:
    """``g~(y) = g(y + lam)``: the same samples on the grid translated by ``-lam``."""
    return GridFunction(g.grid.shifted(-np.asarray(lam, dtype=float)), np.asarray(g.values))


def recenter(f: GridFunction, g: GridFunction | None = None, tol: float = 1e-8,
             max_iter: int = 100, trust_radius: float = 1e3, damping: float = 1e-10) -> Recentering:
    """Find ``lam`` with ``int x exp(f + lam.x) dx = 0`` by damped Newton on the
    convex log-Laplace functional, with Armijo backtracking.

    Returns ``f~ = f + lam.x`` and, if given, the shifted partner
    ``g~(y) = g(y + lam)``.
    """
    lam = np.zeros(f.dim)
    tm = tilted_moments(f, lam)
    history = [float(np.linalg.norm(tm.mean))]
    it = 0
    while history[-1] > tol:
        if it >= max_iter:
            raise ConvergenceError("recentering did not converge", history[-1], history)
        it += 1
        step = -np.linalg.solve(tm.covariance + damping * np.eye(f.dim), tm.mean)
        t = 1.0
        while True:
            trial = lam + t * step
            if np.linalg.norm(trial) > trust_radius:
                raise ConvergenceError("recentering parameter left the trust region; "
                                       "the function may not decay fast enough", history[-1], history)
            try:
                cand = tilted_moments(f, trial)
            except TruncationError:
                cand = None
            if cand is not None and cand.log_laplace <= tm.log_laplace + 1e-4 * t * (tm.mean @ step) + 1e-14 * abs(tm.log_laplace):
                break
            t *= 0.5
            if t < 1e-12:
                raise ConvergenceError("line search failed during recentering", history[-1], history)
        lam, tm = trial, cand
        history.append(float(np.linalg.norm(tm.mean)))
    mesh = f.grid.mesh()
    f_t = GridFunction(f.grid, np.asarray(f.values) + sum(l * m for l, m in zip(lam, mesh)))
    g_t = shift_partner(g, lam) if g is not None else None
    return Recentering(lam, f_t, g_t, it, history[-1])


def tilted_barycenter(f: GridFunction) -> np.ndarray:
    return barycenter(f.density())


def log_integral_estimate(f: GridFunction, sign: float = 1.0) -> Estimate:
    """``log int exp(sign f)`` with the refinement estimate from the
    every-other-sample grid."""
    v = f.log_integral_exp(sign)
    sub = np.asarray(f.values)[tuple(slice(None, None, 2) for _ in range(f.dim))]
    try:
        v2 = GridFunction(f.grid.subsampled(), sub).log_integral_exp(sign)
    except PreconditionError:
        return Estimate(v, math.inf)
    return Estimate(v, abs(v - v2))
