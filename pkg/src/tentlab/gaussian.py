"""Closed-form Gaussian quantities and the exact equality-family checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericError
from .measures import GapReport, GaussianParams

CONDITION_GUARD = 1e12
CLOSED_FORM_TOL = 1e-9


def _sym_sqrt(m: np.ndarray) -> np.ndarray:
    m = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(m)
    if w[-1] <= 0 or w[0] < -1e-12 * w[-1]:
        raise NumericError("matrix square root of a non-PSD matrix")
    if w[0] <= 0 or w[-1] / w[0] > CONDITION_GUARD:
        raise NumericError(f"condition number above {CONDITION_GUARD:g} in matrix square root")
    return (v * np.sqrt(w)) @ v.T


def gaussian_rel_entropy(g: GaussianParams) -> float:
    """Relative entropy of ``N(m, A)`` with respect to the standard Gaussian:
    ``(tr A - d - log det A + |m|^2) / 2``."""
    a = g.covariance
    _, logdet = np.linalg.slogdet(a)
    return 0.5 * float(np.trace(a) - g.dim - logdet + g.mean @ g.mean)


def gaussian_w2_squared(g1: GaussianParams, g2: GaussianParams) -> float:
    """Squared Bures-Wasserstein distance."""
    if g1.dim != g2.dim:
        raise ValueError("dimension mismatch")
    a, b = g1.covariance, g2.covariance
    ra = _sym_sqrt(a)
    cross = _sym_sqrt(ra @ b @ ra)
    dm = g1.mean - g2.mean
    val = float(dm @ dm + np.trace(a) + np.trace(b) - 2 * np.trace(cross))
    return max(val, 0.0)


def gaussian_w2(g1: GaussianParams, g2: GaussianParams) -> float:
    return float(np.sqrt(gaussian_w2_squared(g1, g2)))


@dataclass(frozen=True)
class EqualityFamilyCase:
    """``mu = N(0, A)`` and ``nu = N(m, A^{-1})``."""

    A: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.A, dtype=float))
        m = np.atleast_1d(np.asarray(self.m, dtype=float)).ravel()
        GaussianParams(m, a)  # validates SPD and shapes
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "m", m)

    @property
    def mu(self) -> GaussianParams:
        return GaussianParams(np.zeros_like(self.m), self.A)

    @property
    def nu(self) -> GaussianParams:
        return GaussianParams(self.m, np.linalg.inv(self.A))


def talagrand_closed_form(mu: GaussianParams, nu: GaussianParams, tol: float = CLOSED_FORM_TOL) -> GapReport:
    lhs = gaussian_w2_squared(mu, nu)
    rhs = 2 * gaussian_rel_entropy(mu) + 2 * gaussian_rel_entropy(nu)
    return GapReport.from_sides(lhs, rhs, tol * (1 + abs(lhs)), mode="closed_form")


def equality_family_gap(case: EqualityFamilyCase) -> GapReport:
    """Both sides of the symmetrised inequality on an equality case; the gap
    should vanish to rounding."""
    return talagrand_closed_form(case.mu, case.nu)


def noncentered_counterexample(m1, m2, slack: float = CLOSED_FORM_TOL) -> GapReport:
    """Would-be inequality ``|m1 - m2|^2 <= |m1|^2 + |m2|^2`` for two
    standard-covariance Gaussians, neither assumed centred.

    Equivalent to ``2 m1.m2 >= 0``; fails whenever the means point in
    opposing directions.
    """
    m1 = np.atleast_1d(np.asarray(m1, dtype=float))
    m2 = np.atleast_1d(np.asarray(m2, dtype=float))
    d = m1.size
    g1, g2 = GaussianParams(m1, np.eye(d)), GaussianParams(m2, np.eye(d))
    lhs = gaussian_w2_squared(g1, g2)
    rhs = 2 * gaussian_rel_entropy(g1) + 2 * gaussian_rel_entropy(g2)
    return GapReport.from_sides(lhs, rhs, slack, cross_term=float(2 * m1 @ m2))


def random_spd(rng: np.random.Generator, d: int, eig_range=(0.2, 5.0)) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    w = rng.uniform(*eig_range, size=d)
    a = (q * w) @ q.T
    return 0.5 * (a + a.T)


def random_equality_case(rng: np.random.Generator, d: int, max_norm: float = 3.0) -> EqualityFamilyCase:
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    radius = max_norm * rng.uniform() ** (1.0 / d)
    return EqualityFamilyCase(random_spd(rng, d), radius * direction)
