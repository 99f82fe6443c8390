"""Numerical laboratory for sharp transport-entropy inequalities of the Gaussian measure.

Submodules: ``measures`` (grids, measures, gap reports), ``gaussian`` (closed
forms), ``transport`` (exact, entropic and quantile optimal transport),
``functional`` (Legendre transforms, entropies, recentering),
``inequalities`` (the checkers), ``moment_map``, ``concentration``,
``families`` (seeded random inputs), ``scenarios`` and ``cli``.
"""
from .exceptions import (CapacityError, ConvergenceError, FeasibilityError, LabError, NumericError,
                         PreconditionError, SchemaMismatchError, TruncationError)
from .measures import (ConvexPotential, DiscreteMeasure, GapReport, GaussianParams, Grid, GridDensity,
                       GridFunction, TransportPlan, Verdict)

__version__ = "0.1.0"
