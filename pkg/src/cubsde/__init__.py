"""Cubature-tree BSDE solver with sparse-grid projection and extrapolation."""

from .cubature import CubatureFormula, MomentReport, Path, make_order3, scale, validate_moments
from .engine import (
    ExtrapolatedReport,
    SolveReport,
    TreeResult,
    extrapolated_solve,
    implicit_step,
    sparse_solve,
    tree_solve,
)
from .forward import ChildSet, Problem, children, ode_step, stratonovich_drift
from .multiindex import concat, degree, enumerate_degree_set
from .problems import NamedProblem, REGISTRY, get
from .sparse import (
    Hypercube,
    SparseInterpolant,
    count_nodes,
    enumerate_nodes,
    hierarchize,
    minimal_hypercube,
)
from .timegrid import TimeGrid, build, refine_midpoints

__version__ = "0.1.0"
