"""Quasi-Trefftz discontinuous Galerkin solver for diffusion-advection-reaction problems."""
from .assembly import DGParameters, DGSystem, assemble, recommend_gamma, upwind_identity_check
from .basis import (BasisSet, LocalBasis, LocalPolynomial, build_bases, build_full_poly_basis,
                    build_qt_basis, build_qt_bases, qt_dimension, qt_residual, taylor_of)
from .estimator import QuasiTrefftzDG
from .mesh import Mesh, classify_boundary, export_mesh, generate_structured, import_mesh
from .problem import BUILTINS, CoefficientField, ProblemSpec, builtin, validate_problem
from .solve_analyze import (DiscreteSolution, ErrorReport, compute_errors, convergence_rates,
                            solve)

__version__ = "0.1.0"

__all__ = [
    "BUILTINS", "BasisSet", "CoefficientField", "DGParameters", "DGSystem",
    "DiscreteSolution", "ErrorReport", "LocalBasis", "LocalPolynomial", "Mesh",
    "ProblemSpec", "QuasiTrefftzDG", "assemble", "build_bases", "build_full_poly_basis",
    "build_qt_basis", "build_qt_bases", "builtin", "classify_boundary", "compute_errors",
    "convergence_rates", "export_mesh", "generate_structured", "import_mesh", "qt_dimension",
    "qt_residual", "recommend_gamma", "solve", "taylor_of", "upwind_identity_check",
    "validate_problem",
]
