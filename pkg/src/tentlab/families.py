"""Seeded, versioned random families used by sweeps and property tests.

Every generator takes a master seed and a case index and draws from its own
``SeedSequence(seed, spawn_key=(index,))`` stream, so a single case can be
replayed without regenerating the whole sweep. Bump ``FAMILY_VERSION`` when a
generator changes the distribution it draws from.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import random_spd
from .inequalities import santalo_optimal_partner
from .measures import ConvexPotential, GaussianParams, Grid, GridDensity, GridFunction, barycenter

FAMILY_VERSION = 2

GRID_1D = Grid.regular(-14.0, 14.0, 2048)
GRID_2D = Grid.regular((-9.0, -9.0), (9.0, 9.0), (48, 48))
KINDS = ("gaussian", "mixture", "uniform")


def case_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


@dataclass(frozen=True)
class Case:
    """One generated input: a label plus the objects the checker consumes."""

    label: str
    items: tuple


# --- measures -------------------------------------------------------------------

def _mixture_density(grid: Grid, means, covs, weights) -> GridDensity:
    pts = np.stack(grid.mesh(), axis=-1)
    val = np.zeros(grid.shape)
    for m, c, w in zip(means, covs, weights):
        ci = np.linalg.inv(c)
        z = pts - m
        q = np.einsum("...i,ij,...j->...", z, ci, z)
        val += w * np.exp(-0.5 * q) / math.sqrt(np.linalg.det(c))
    return GridDensity(grid, val)


def random_mixture(rng, d: int, centered: bool, grid: Grid | None = None) -> GridDensity:
    grid = grid or (GRID_1D if d == 1 else GRID_2D)
    k = int(rng.integers(2, 4))
    w = rng.dirichlet(np.ones(k))
    means = rng.uniform(-2.5, 2.5, size=(k, d))
    if centered:
        means -= w @ means
    else:
        means += rng.uniform(-1.5, 1.5, size=d)
    covs = [random_spd(rng, d, (0.15, 1.2)) for _ in range(k)]
    gd = _mixture_density(grid, means, covs, w)
    if centered:
        # truncation and the midpoint rule shift the barycenter slightly
        gd = _mixture_density(grid, means - barycenter(gd), covs, w)
    return gd


def random_uniform(rng, d: int, centered: bool, grid: Grid | None = None) -> GridDensity:
    """Uniform density on an interval (1D) or a rotated rectangle (2D).

    Centred sets are symmetric about the origin, so on an origin-symmetric
    grid the sampled barycenter vanishes exactly.
    """
    grid = grid or (GRID_1D if d == 1 else GRID_2D)
    half = rng.uniform(0.6, 3.0, size=d)
    shift = np.zeros(d) if centered else rng.uniform(-1.5, 1.5, size=d)
    pts = np.stack(grid.mesh(), axis=-1) - shift
    if d == 2:
        a = rng.uniform(0, math.pi)
        rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        pts = pts @ rot
    inside = np.all(np.abs(pts) <= half, axis=-1)
    return GridDensity(grid, inside.astype(float))


def random_gaussian(rng, d: int, centered: bool) -> GaussianParams:
    mean = np.zeros(d) if centered else rng.uniform(-1.5, 1.5, size=d)
    return GaussianParams(mean, random_spd(rng, d, (0.3, 2.5)))


def random_measure(rng, kind: str, d: int, centered: bool):
    if kind == "gaussian":
        return random_gaussian(rng, d, centered)
    if kind == "mixture":
        return random_mixture(rng, d, centered)
    if kind == "uniform":
        return random_uniform(rng, d, centered)
    raise ValueError(f"unknown family {kind!r}")


def sweep_case(seed: int, index: int) -> Case:
    """Centred ``mu`` and arbitrary ``nu``; even indices are 1D, odd are 2D."""
    rng = case_rng(seed, index)
    d = 1 + index % 2
    k_mu, k_nu = (KINDS[i] for i in rng.integers(0, len(KINDS), size=2))
    mu = random_measure(rng, k_mu, d, centered=True)
    nu = random_measure(rng, k_nu, d, centered=bool(rng.integers(0, 2)))
    return Case(f"d{d}:{k_mu}/{k_nu}", (mu, nu))


# --- functional pairs --------------------------------------------------------------

def random_admissible_pair(seed: int, index: int, grid: Grid | None = None) -> Case:
    """``(f, g)`` with ``f(x) + g(y) <= -xy`` and ``exp(f)`` not centred.

    ``f`` is a shifted quadratic-plus-quartic with a bounded oscillation;
    ``g`` is its optimal partner lowered by a constant and a nonnegative bump.
    """
    rng = case_rng(seed, index)
    grid = grid or Grid.regular(-12.0, 12.0, 2049)
    a = rng.uniform(0.5, 2.0)
    b = rng.uniform(0.0, 0.05)
    m = rng.uniform(-1.5, 1.5)
    eps, k = rng.uniform(0.0, 0.3), rng.uniform(0.5, 3.0)
    x = grid.axis(0)
    f = GridFunction(grid, -a * (x - m) ** 2 / 2 - b * (x - m) ** 4 + eps * np.cos(k * x))
    g0 = santalo_optimal_partner(f)
    y = g0.grid.axis(0)
    drop = rng.uniform(0.0, 0.5)
    bump = rng.uniform(0.0, 0.5) * np.exp(-(y - rng.uniform(-1, 1)) ** 2)
    return Case(f"a={a:.3f},m={m:.3f}", (f, g0.with_values(g0.values - drop - bump)))


def random_unconditional_convex(seed: int, index: int, d: int = 1) -> Case:
    """Even convex ``f = sum_i a_i |x_i|^p_i + c |x|^q + b |x|^2`` on a symmetric grid."""
    rng = case_rng(seed, index)
    if d == 1:
        grid = Grid.regular(-30.0, 30.0, 4001)
    else:
        grid = Grid.regular((-22.0, -22.0), (22.0, 22.0), (221, 221))
    mesh = grid.mesh()
    a = rng.uniform(0.2, 1.5, size=d)
    p = rng.uniform(1.0, 2.5, size=d)
    c, q = rng.uniform(0.0, 0.5), rng.uniform(1.0, 2.0)
    b = rng.uniform(0.0, 0.3)
    r2 = sum(z ** 2 for z in mesh)
    vals = sum(ai * np.abs(z) ** pi for ai, pi, z in zip(a, p, mesh)) + c * r2 ** (q / 2) + b * r2
    return Case(f"d{d}:p={np.round(p, 3).tolist()}", (ConvexPotential(grid, vals),))


def ulc_pair(seed: int, index: int, grid: Grid | None = None) -> Case:
    """Symmetric ``mu`` and arbitrary ``nu`` on the grid of the reference potential."""
    rng = case_rng(seed, index)
    grid = grid or Grid.regular(-8.0, 8.0, 4096)
    x = grid.axis(0)
    s = rng.uniform(0.2, 1.2)
    m = rng.uniform(0.0, 2.0)
    mu = GridDensity(grid, np.exp(-(x - m) ** 2 / (2 * s * s)) + np.exp(-(x + m) ** 2 / (2 * s * s)))
    c, t = rng.uniform(-2.0, 2.0), rng.uniform(0.3, 1.5)
    if rng.integers(0, 2):
        nu = GridDensity(grid, np.exp(-(x - c) ** 2 / (2 * t * t)))
    else:
        nu = GridDensity(grid, (np.abs(x - c) <= t).astype(float))
    return Case(f"m={m:.3f},c={c:.3f}", (mu, nu))


def moment_map_target(seed: int, index: int) -> Case:
    """Centred 1D target density: Gaussian mixture or a trapezoid-like blend."""
    rng = case_rng(seed, index)
    if index % 2 == 0:
        mu = random_mixture(rng, 1, centered=True, grid=Grid.regular(-8.0, 8.0, 8192))
        return Case("mixture", (mu,))
    grid = Grid.regular(-4.0, 4.0, 8192)
    x = grid.axis(0)
    w = rng.uniform(0.5, 2.0)
    s = rng.uniform(0.1, 0.6)
    vals = np.exp(-np.maximum(np.abs(x) - w, 0.0) ** 2 / (2 * s * s))
    return Case("plateau", (GridDensity(grid, vals),))
