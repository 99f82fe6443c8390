"""scikit-learn style wrappers around the moment-map and transport solvers.

These are thin adapters for pipelines and hyperparameter search; the
numerical work stays in :mod:`tentlab.moment_map` and :mod:`tentlab.transport`.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .measures import DiscreteMeasure, Grid
from .moment_map import solve_moment_map_1d
from .transport import solve_exact, solve_sinkhorn


def _column(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError("expected a single feature")
        X = X[:, 0]
    return X


class MomentMapEstimator(TransformerMixin, BaseEstimator):
    """Moment map of the empirical measure of a 1D sample.

    The sample is centred before solving (its mean is kept in ``center_``).
    ``transform`` applies ``phi'``, which pushes the fitted density
    ``exp(-phi)`` to the centred sample; ``score_samples`` returns ``-phi``.

    Parameters
    ----------
    half_width : float or None
        Grid is ``[-half_width, half_width]``; ``None`` uses the solver default.
    n : int
        Number of grid cells.
    tol : float
        Pushforward residual the solver must reach.
    method : {"auto", "fixed_point", "variational"}
    """

    def __init__(self, half_width=None, n=2048, tol=1e-6, method="auto"):
        self.half_width = half_width
        self.n = n
        self.tol = tol
        self.method = method

    def fit(self, X, y=None):
        x = _column(X)
        self.center_ = float(np.mean(x))
        target = DiscreteMeasure.uniform((x - self.center_)[:, None])
        grid = None if self.half_width is None else Grid.regular(-self.half_width, self.half_width, self.n)
        self.solution_ = solve_moment_map_1d(target, grid, tol=self.tol, method=self.method, n=self.n)
        self.grid_ = self.solution_.grid
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "solution_")
        x = _column(X)
        y = np.interp(x, self.grid_.axis(0), self.solution_.dphi)
        return (y + self.center_)[:, None]

    def score_samples(self, X):
        check_is_fitted(self, "solution_")
        return -np.interp(_column(X), self.grid_.axis(0), self.solution_.phi.values)


class TransportEstimator(BaseEstimator):
    """Optimal coupling between the rows of ``X`` and the rows of ``y``
    (uniform weights, squared Euclidean cost).

    ``transform`` sends each row to the barycentric image of the nearest
    fitted source point.

    Parameters
    ----------
    method : {"exact", "sinkhorn"}
    epsilon : float
        Final regularisation for ``method="sinkhorn"``.
    """

    def __init__(self, method="exact", epsilon=1e-3):
        self.method = method
        self.epsilon = epsilon

    def fit(self, X, y):
        X = check_array(X)
        Y = check_array(y)
        if X.shape[1] != Y.shape[1]:
            raise ValueError("X and y must have the same number of features")
        mu, nu = DiscreteMeasure.uniform(X), DiscreteMeasure.uniform(Y)
        if self.method == "exact":
            sol = solve_exact(mu, nu)
            self.cost_, plan = sol.cost, sol.plan
        elif self.method == "sinkhorn":
            sol = solve_sinkhorn(mu, nu, epsilon=self.epsilon)
            self.cost_, plan = sol.cost_rounded_upper, sol.plan
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.coupling_ = np.asarray(plan.coupling)
        self.source_ = X
        self.images_ = (self.coupling_ @ Y) / self.coupling_.sum(axis=1, keepdims=True)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "coupling_")
        X = check_array(X)
        nearest = np.argmin(((X[:, None, :] - self.source_[None]) ** 2).sum(-1), axis=1)
        return self.images_[nearest]
