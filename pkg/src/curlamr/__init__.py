"""Adaptive lowest-order edge-element (Whitney) toolkit for 3D H(curl)
interface problems.

Provides conforming tetrahedral meshes with marked-edge bisection, Nedelec
ND0 assembly for the electric-field problem and its magnetizing-field dual,
duality-based and residual-based a posteriori error estimators (including a
localized vertex-patch recovery), and an estimate-mark-refine driver.
"""

from .mesh import TetMesh, VertexPatch, build_box_mesh, bisect, vertex_patch
from .quadrature import QuadratureRule, simplex_rule, triangle_rule, edge_rule
from .fem import (
    EdgeSpace,
    SolutionField,
    whitney_basis,
    assemble_primal,
    assemble_auxiliary,
    interpolate_edge,
    energy_error,
)
from .linalg import SparseSymMatrix, SolveConfig, pcg, dense_saddle_solve
from .problems import ProblemSpec, Example1Params, example1, example2, get_problem
from .estimators import (
    EstimateReport,
    BrokenField,
    eta_new,
    eta_tilde,
    eta_res,
    recover_local,
    duality_gap,
)
from .amr import AmrConfig, ConvergenceRecord, dorfler_mark, run_amr

__version__ = "0.1.0"

__all__ = [
    "TetMesh",
    "VertexPatch",
    "build_box_mesh",
    "bisect",
    "vertex_patch",
    "QuadratureRule",
    "simplex_rule",
    "triangle_rule",
    "edge_rule",
    "EdgeSpace",
    "SolutionField",
    "whitney_basis",
    "assemble_primal",
    "assemble_auxiliary",
    "interpolate_edge",
    "energy_error",
    "SparseSymMatrix",
    "SolveConfig",
    "pcg",
    "dense_saddle_solve",
    "ProblemSpec",
    "Example1Params",
    "example1",
    "example2",
    "get_problem",
    "EstimateReport",
    "BrokenField",
    "eta_new",
    "eta_tilde",
    "eta_res",
    "recover_local",
    "duality_gap",
    "AmrConfig",
    "ConvergenceRecord",
    "dorfler_mark",
    "run_amr",
]
