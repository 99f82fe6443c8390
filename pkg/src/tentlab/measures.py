"""Measure and function representations shared by every checker.

Three measure classes are supported:

* :class:`DiscreteMeasure` -- finitely many weighted atoms, used by the exact
  transport solvers;
* :class:`GridDensity` -- a density sampled at the cell centres of a regular
  grid on a box, integrated with the midpoint rule;
* :class:`GaussianParams` -- mean and covariance, for closed forms.

Grid functions with values in the extended reals (:class:`GridFunction`,
:class:`ConvexPotential`) mark infinite values with ``+inf``/``-inf`` and carry
the finite-domain mask explicitly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .exceptions import PreconditionError

# Relative rank threshold for "not supported on a hyperplane". A config knob,
# not a mathematical claim.
HYPERPLANE_RANK_TOL = 1e-10
TOL_CONVEX = 1e-8


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Regular cell-centred grid on ``prod_k [lower_k, upper_k]``."""

    lower: tuple
    upper: tuple
    shape: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        shape = tuple(int(v) for v in np.atleast_1d(self.shape))
        if not (len(lower) == len(upper) == len(shape)):
            raise ValueError("lower, upper and shape must have the same length")
        if len(shape) not in (1, 2):
            raise ValueError("grids are limited to dimension 1 or 2")
        if any(n < 1 for n in shape):
            raise ValueError("every axis needs at least one cell")
        if any(not (math.isfinite(a) and math.isfinite(b) and b > a)
               for a, b in zip(lower, upper)):
            raise ValueError("each axis needs finite bounds with lower < upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def regular(cls, lower, upper, n) -> "Grid":
        """Grid with the same bounds / cell count on every axis when scalars
        are given for some arguments and sequences for others."""
        dims = [len(v) for v in (lower, upper, n) if np.ndim(v) > 0]
        d = dims[0] if dims else 1
        bc = lambda v: tuple(np.broadcast_to(np.asarray(v), (d,)).tolist())
        return cls(bc(lower), bc(upper), bc(n))

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / np.array(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis(self, k: int) -> np.ndarray:
        h = self.spacing[k]
        return self.lower[k] + (np.arange(self.shape[k]) + 0.5) * h

    def edges(self, k: int) -> np.ndarray:
        h = self.spacing[k]
        return self.lower[k] + np.arange(self.shape[k] + 1) * h

    def mesh(self) -> list:
        return np.meshgrid(*[self.axis(k) for k in range(self.dim)], indexing="ij")

    def points(self) -> np.ndarray:
        """Cell centres as an ``(N, d)`` array in C order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def sq_norm(self) -> np.ndarray:
        return sum(m ** 2 for m in self.mesh())

    def is_origin_symmetric(self, axis=None) -> bool:
        axes = range(self.dim) if axis is None else [axis]
        return all(abs(self.lower[k] + self.upper[k]) <= 1e-12 * (self.upper[k] - self.lower[k])
                   for k in axes)

    def subsampled(self) -> "Grid":
        """Grid made of every other cell centre, with doubled spacing."""
        h = self.spacing
        n = tuple((s + 1) // 2 for s in self.shape)
        lower = tuple(self.lower[k] - 0.5 * h[k] for k in range(self.dim))
        upper = tuple(lower[k] + 2 * h[k] * n[k] for k in range(self.dim))
        return Grid(lower, upper, n)

    def shifted(self, offset) -> "Grid":
        offset = np.broadcast_to(np.asarray(offset, dtype=float), (self.dim,))
        return Grid(tuple(np.add(self.lower, offset)), tuple(np.add(self.upper, offset)), self.shape)


def _subsample(values: np.ndarray) -> np.ndarray:
    return values[tuple(slice(None, None, 2) for _ in range(values.ndim))]


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure.

    Zero-weight atoms are dropped and the weights are renormalised to sum to
    one; total weights further than ``1e-9`` from one are rejected.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[0] != w.shape[0]:
            raise ValueError("points must be (n, d) with one weight per point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("atom locations must be finite")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        total = w.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        keep = w > 0
        pts, w = pts[keep], w[keep]
        if w.size == 0:
            raise ValueError("measure has no atoms")
        if abs(w.sum() - 1.0) > 1e-14:
            w = w / w.sum()
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    @classmethod
    def from_unnormalized(cls, points, weights) -> "DiscreteMeasure":
        w = np.asarray(weights, dtype=float)
        return cls(points, w / w.sum())

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def reflected(self) -> "DiscreteMeasure":
        return DiscreteMeasure(-self.points, self.weights)

    def translated(self, offset) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points + np.asarray(offset, dtype=float), self.weights)


@dataclass(frozen=True)
class GridDensity:
    """Probability density sampled at cell centres; normalised on construction."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("density values must be finite and nonnegative")
        total = v.sum() * self.grid.cell_volume
        if not total > 0:
            raise ValueError("density has zero mass on the grid")
        if abs(total - 1.0) > 1e-13:
            v = v / total
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_function(cls, fn: Callable, grid: Grid) -> "GridDensity":
        """Sample an (unnormalised) density ``fn(x)`` or ``fn(x1, x2)``."""
        return cls(grid, np.broadcast_to(fn(*grid.mesh()), grid.shape))

    @classmethod
    def from_log_values(cls, grid: Grid, log_values) -> "GridDensity":
        lv = np.asarray(log_values, dtype=float).reshape(grid.shape)
        top = np.max(lv)
        if not np.isfinite(top):
            raise ValueError("log-density must be finite somewhere")
        return cls(grid, np.exp(lv - top))

    @classmethod
    def from_log_function(cls, log_fn: Callable, grid: Grid) -> "GridDensity":
        return cls.from_log_values(grid, np.broadcast_to(log_fn(*grid.mesh()), grid.shape))

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def cell_volume(self) -> float:
        return self.grid.cell_volume

    @property
    def masses(self) -> np.ndarray:
        return self.values * self.grid.cell_volume

    def expect(self, fn_values) -> float:
        return float(np.sum(self.masses * fn_values))

    def subsampled(self) -> "GridDensity":
        """Every other sample on a grid of doubled spacing, renormalised.

        Used for the ``|I_h - I_2h|`` refinement error estimates.
        """
        return GridDensity(self.grid.subsampled(), _subsample(self.values))

    def to_discrete(self, block: int = 1) -> DiscreteMeasure:
        """Atoms at the centres of ``block``-wide cell blocks carrying the
        block mass. Each atom is within half a block diagonal of its mass."""
        m = self.masses
        if block > 1:
            pads = [(0, (-s) % block) for s in m.shape]
            m = np.pad(m, pads)
            shp = []
            for s in m.shape:
                shp += [s // block, block]
            m = m.reshape(shp).sum(axis=tuple(range(1, 2 * self.dim, 2)))
        h = self.grid.spacing * block
        axes = [self.grid.lower[k] + (np.arange(m.shape[k]) + 0.5) * h[k] for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([a.ravel() for a in mesh], axis=1)
        w = m.ravel()
        keep = w > 0
        return DiscreteMeasure.from_unnormalized(pts[keep], w[keep])

    def block_radius(self, block: int = 1) -> float:
        """Half diagonal of a ``block``-wide cell block."""
        return 0.5 * float(np.linalg.norm(self.grid.spacing * block))


@dataclass(frozen=True)
class GaussianParams:
    """Non-degenerate Gaussian ``N(mean, covariance)``."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float)).ravel()
        c = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if c.shape != (m.size, m.size):
            raise ValueError("covariance must be d x d with d = len(mean)")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(c))):
            raise ValueError("Gaussian parameters must be finite")
        if np.max(np.abs(c - c.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(c))):
            raise ValueError("covariance is not symmetric")
        c = 0.5 * (c + c.T)
        if np.linalg.eigvalsh(c)[0] <= 0:
            raise PreconditionError("covariance is not positive definite")
        object.__setattr__(self, "mean", _frozen(m))
        object.__setattr__(self, "covariance", _frozen(c))

    @classmethod
    def standard(cls, d: int = 1) -> "GaussianParams":
        return cls(np.zeros(d), np.eye(d))

    @property
    def dim(self) -> int:
        return self.mean.size

    def log_pdf(self, *coords) -> np.ndarray:
        x = np.stack(np.broadcast_arrays(*coords), axis=-1) - self.mean
        prec = np.linalg.inv(self.covariance)
        quad = np.einsum("...i,ij,...j->...", x, prec, x)
        _, logdet = np.linalg.slogdet(self.covariance)
        return -0.5 * quad - 0.5 * logdet - 0.5 * self.dim * math.log(2 * math.pi)

    def on_grid(self, grid: Grid) -> GridDensity:
        return GridDensity.from_log_function(self.log_pdf, grid)


@dataclass(frozen=True)
class GridFunction:
    """Extended-real function sampled on a grid.

    ``values`` may hold ``+inf`` or ``-inf`` as sentinels; ``mask`` is true
    exactly where the value is finite.
    """

    grid: Grid
    values: np.ndarray
    mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            v = v.reshape(self.grid.shape)
        if np.any(np.isnan(v)):
            raise ValueError("grid function values must not be NaN")
        mask = np.isfinite(v)
        if not mask.any():
            raise PreconditionError("empty effective domain")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "mask", _frozen(mask, dtype=bool))

    @classmethod
    def from_function(cls, fn: Callable, grid: Grid, **kwargs):
        return cls(grid, np.broadcast_to(fn(*grid.mesh()), grid.shape), **kwargs)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def finite_values(self) -> np.ndarray:
        return self.values[self.mask]

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def log_integral_exp(self, sign: float = 1.0) -> float:
        """``log int exp(sign * f) dx`` by the midpoint rule."""
        v = sign * self.values
        top = np.max(v)
        if not np.isfinite(top):
            raise PreconditionError("exponent is not finite anywhere")
        return float(top + np.log(np.sum(np.exp(v - top))) + np.log(self.grid.cell_volume))

    def density(self, sign: float = 1.0) -> GridDensity:
        """Normalised ``exp(sign * f)``."""
        return GridDensity.from_log_values(self.grid, sign * self.values)


def _second_differences(values: np.ndarray, h: float) -> np.ndarray:
    with np.errstate(invalid="ignore"):  # inf - inf outside the effective domain
        return (values[2:] - 2 * values[1:-1] + values[:-2]) / h ** 2


@dataclass(frozen=True)
class ConvexPotential(GridFunction):
    """Convex grid function; ``+inf`` outside its effective domain.

    Convexity is checked on construction with tolerance ``tol_convex`` plus a
    rounding allowance proportional to ``eps * max|f| / h**2``.
    """

    tol_convex: float = TOL_CONVEX

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values == -np.inf):
            raise PreconditionError("a convex potential cannot take the value -inf")
        worst = convexity_violation(self)
        if worst > 0:
            raise PreconditionError(f"potential is not convex (second difference below -tol by {worst:.3g})")

    @classmethod
    def from_function(cls, fn, grid, **kwargs):
        return cls(grid, np.broadcast_to(fn(*grid.mesh()), grid.shape), **kwargs)

    def with_values(self, values) -> "ConvexPotential":
        return ConvexPotential(self.grid, values, tol_convex=self.tol_convex)


def _rounding_allowance(values, h):
    fin = values[np.isfinite(values)]
    scale = np.max(np.abs(fin)) if fin.size else 0.0
    return 16 * np.finfo(float).eps * scale / h ** 2


def convexity_violation(f: GridFunction, tol: float | None = None) -> float:
    """Amount by which the discrete convexity test fails (<= 0 means pass)."""
    tol = getattr(f, "tol_convex", TOL_CONVEX) if tol is None else tol
    v = np.asarray(f.values)
    h = f.grid.spacing
    worst = -np.inf
    if f.dim == 1:
        d2 = _second_differences(v, h[0])
        ok = np.isfinite(d2)
        if ok.any():
            worst = np.max(-d2[ok] - tol - _rounding_allowance(v, h[0]))
        # +inf inside a finite interval breaks convexity of the domain
        idx = np.flatnonzero(f.mask)
        if idx.size and not np.all(f.mask[idx[0]:idx[-1] + 1]):
            return np.inf
        return float(worst)
    # 2D: eigenvalues of the central-difference Hessian at interior points
    fxx = (v[2:, 1:-1] - 2 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / h[0] ** 2
    fyy = (v[1:-1, 2:] - 2 * v[1:-1, 1:-1] + v[1:-1, :-2]) / h[1] ** 2
    fxy = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4 * h[0] * h[1])
    ok = np.isfinite(fxx) & np.isfinite(fyy) & np.isfinite(fxy)
    if ok.any():
        a, b, c = fxx[ok], fyy[ok], fxy[ok]
        lam_min = 0.5 * (a + b) - np.sqrt(0.25 * (a - b) ** 2 + c ** 2)
        allowance = _rounding_allowance(v, min(h))
        worst = np.max(-lam_min - tol - allowance)
    return float(worst)


@dataclass(frozen=True)
class TransportPlan:
    """Coupling between two discrete measures."""

    source: DiscreteMeasure
    target: DiscreteMeasure
    coupling: np.ndarray

    def __post_init__(self):
        p = np.array(self.coupling, dtype=float)
        if p.shape != (self.source.size, self.target.size):
            raise ValueError("coupling shape must be (n_source, n_target)")
        if np.any(p < -1e-14):
            raise ValueError("coupling must be nonnegative")
        p = np.maximum(p, 0.0)
        if np.max(np.abs(p.sum(axis=1) - self.source.weights)) > 1e-8:
            raise ValueError("coupling row sums differ from source weights")
        if np.max(np.abs(p.sum(axis=0) - self.target.weights)) > 1e-8:
            raise ValueError("coupling column sums differ from target weights")
        object.__setattr__(self, "coupling", _frozen(p))

    def triplets(self, threshold: float = 0.0):
        i, j = np.nonzero(self.coupling > threshold)
        return [(int(a), int(b), float(self.coupling[a, b])) for a, b in zip(i, j)]


class Verdict(str, enum.Enum):
    HOLDS = "Holds"
    HOLDS_WITHIN_ERROR = "HoldsWithinError"
    VIOLATED = "Violated"


def _verdict(gap: float, err: float) -> Verdict:
    if gap < -err:
        return Verdict.VIOLATED
    if gap < 0:
        return Verdict.HOLDS_WITHIN_ERROR
    return Verdict.HOLDS


@dataclass(frozen=True)
class GapReport:
    """Outcome of one inequality check ``lhs <= rhs``.

    ``gap = rhs - lhs``; the verdict is ``Violated`` exactly when the gap is
    below ``-discretization_error_estimate``.
    """

    lhs: float
    rhs: float
    gap: float
    discretization_error_estimate: float
    verdict: Verdict
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.gap != self.rhs - self.lhs and not (math.isnan(self.gap) and math.isnan(self.rhs - self.lhs)):
            raise ValueError("gap must equal rhs - lhs")
        if Verdict(self.verdict) != _verdict(self.gap, self.discretization_error_estimate):
            raise ValueError("verdict inconsistent with gap and error estimate")

    @classmethod
    def from_sides(cls, lhs, rhs, error=0.0, **details) -> "GapReport":
        lhs, rhs, error = float(lhs), float(rhs), abs(float(error))
        gap = rhs - lhs
        return cls(lhs, rhs, gap, error, _verdict(gap, error), dict(details))

    @property
    def holds(self) -> bool:
        return self.verdict is not Verdict.VIOLATED

    def to_dict(self) -> dict:
        out = {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "gap": self.gap,
            "discretization_error_estimate": self.discretization_error_estimate,
            "verdict": Verdict(self.verdict).value,
        }
        if self.details:
            out["details"] = {k: _jsonable(v) for k, v in self.details.items()}
        return out


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, GapReport):
        return v.to_dict()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


Measure = Union[DiscreteMeasure, GridDensity, GaussianParams]


def barycenter(m: Measure) -> np.ndarray:
    if isinstance(m, DiscreteMeasure):
        return m.weights @ m.points
    if isinstance(m, GaussianParams):
        return np.array(m.mean)
    if isinstance(m, GridDensity):
        return np.array([m.expect(c) for c in m.grid.mesh()])
    raise TypeError(f"unsupported measure type {type(m).__name__}")


def second_moment(m: Measure) -> float:
    if isinstance(m, DiscreteMeasure):
        return float(m.weights @ np.sum(m.points ** 2, axis=1))
    if isinstance(m, GaussianParams):
        return float(np.trace(m.covariance) + m.mean @ m.mean)
    if isinstance(m, GridDensity):
        return m.expect(m.grid.sq_norm())
    raise TypeError(f"unsupported measure type {type(m).__name__}")


def dim_of(m) -> int:
    return m.dim


def is_centered(m: Measure, tol: float | None = None) -> bool:
    if tol is None:
        tol = 1e-6 if isinstance(m, GridDensity) else 1e-8
    return bool(np.linalg.norm(barycenter(m)) <= tol)


def _reflect_compare(values: np.ndarray, axes: Sequence[int], tol: float) -> bool:
    ref = np.flip(values, axis=tuple(axes))
    fin = np.isfinite(values)
    if not np.array_equal(fin, np.isfinite(ref)):
        return False
    if np.any(values[~fin] != ref[~fin]):
        return False
    scale = 1.0 + (np.max(np.abs(values[fin])) if fin.any() else 0.0)
    return bool(np.max(np.abs(values[fin] - ref[fin]), initial=0.0) <= tol * scale)


def is_unconditional(gd, tol: float = 1e-6) -> bool:
    """Invariance under each coordinate reflection ``x_i -> -x_i``.

    Accepts grid densities and grid functions; the grid must be symmetric
    about the origin on every axis, otherwise the answer is ``False``.
    """
    if not gd.grid.is_origin_symmetric():
        return False
    return all(_reflect_compare(np.asarray(gd.values), [k], tol) for k in range(gd.dim))


def is_symmetric(gd, tol: float = 1e-6) -> bool:
    """Invariance under ``x -> -x``."""
    if not gd.grid.is_origin_symmetric():
        return False
    return _reflect_compare(np.asarray(gd.values), list(range(gd.dim)), tol)


def support_rank(m: DiscreteMeasure, tol: float = HYPERPLANE_RANK_TOL) -> int:
    """Affine rank of the support; ``rank < dim`` means it lies in a hyperplane."""
    centered = m.points - barycenter(m)
    if m.size < 2:
        return 0
    s = np.linalg.svd(centered * np.sqrt(m.weights)[:, None], compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


# --- text serialisation -----------------------------------------------------

def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".17g")


def dumps(obj) -> str:
    """Serialise a grid density, grid function or discrete measure.

    Grid objects: header ``dim n0 [n1] lower... upper...`` then one value per
    line in C order. Discrete measures: header ``dim n`` then one line per
    atom, ``weight x1 [x2 ...]``.
    """
    if isinstance(obj, (GridDensity, GridFunction)):
        g = obj.grid
        header = [str(g.dim)] + [str(n) for n in g.shape] + [_fmt(v) for v in g.lower + g.upper]
        lines = [" ".join(header)] + [_fmt(v) for v in np.asarray(obj.values).ravel()]
        return "\n".join(lines) + "\n"
    if isinstance(obj, DiscreteMeasure):
        lines = [f"{obj.dim} {obj.size}"]
        for w, p in zip(obj.weights, obj.points):
            lines.append(" ".join([_fmt(w)] + [_fmt(c) for c in p]))
        return "\n".join(lines) + "\n"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def loads(text: str, kind: str = "density"):
    """Inverse of :func:`dumps`.

    ``kind`` selects the grid class (``"density"``, ``"function"`` or
    ``"potential"``); discrete measures are recognised from the header.
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    head = lines[0].split()
    d = int(head[0])
    if len(head) == 2:
        n = int(head[1])
        rows = np.array([[float(t) for t in ln.split()] for ln in lines[1:1 + n]])
        return DiscreteMeasure(rows[:, 1:].reshape(n, d), rows[:, 0])
    if len(head) != 1 + 3 * d:
        raise ValueError("malformed header line")
    shape = tuple(int(t) for t in head[1:1 + d])
    lower = tuple(float(t) for t in head[1 + d:1 + 2 * d])
    upper = tuple(float(t) for t in head[1 + 2 * d:1 + 3 * d])
    grid = Grid(lower, upper, shape)
    vals = np.array([float(t) for t in lines[1:1 + int(np.prod(shape))]]).reshape(shape)
    cls = {"density": GridDensity, "function": GridFunction, "potential": ConvexPotential}[kind]
    return cls(grid, vals)
