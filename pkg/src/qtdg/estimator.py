"""Estimator-style front end: fit on (mesh, problem), predict at points."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import _validation as val
from .assembly import DGParameters, assemble
from .basis import build_bases
from .mesh import Mesh, classify_boundary, generate_structured
from .problem import ProblemSpec, builtin, validate_problem
from .solve_analyze import ErrorReport, compute_errors, solve


class QuasiTrefftzDG(BaseEstimator, RegressorMixin):
    """Interior-penalty DG solver on quasi-Trefftz or full polynomial spaces.

    Parameters
    ----------
    degree : int
        Polynomial degree p.
    space : {'qt', 'full'}
    epsilon : {-1, 0, 1} or {'sipg', 'iipg', 'nipg'}
    gamma : float, '8p2' or dict
        Penalty value or rule.
    quad_order : int, optional
        Quadrature points per direction (default p + 1).
    nu : float, optional
        Diffusion level when ``problem`` names a dominated-regime builtin.

    ``fit(mesh, problem)`` accepts a :class:`Mesh` or a structured level n,
    and a :class:`ProblemSpec` or a builtin name.
    """

    def __init__(self, degree=2, space="qt", epsilon=-1, gamma="8p2",
                 quad_order=None, nu=None):
        self.degree = degree
        self.space = space
        self.epsilon = epsilon
        self.gamma = gamma
        self.quad_order = quad_order
        self.nu = nu

    def _resolve(self, mesh, problem):
        if isinstance(problem, str):
            problem = builtin(problem, self.nu)
        if not isinstance(problem, ProblemSpec):
            raise TypeError("problem must be a ProblemSpec or a builtin name")
        if not isinstance(mesh, Mesh):
            mesh = generate_structured(int(mesh), problem.dim)
        return mesh, problem

    def fit(self, mesh, problem):
        p = val.check_degree(self.degree)
        space = val.check_space(self.space)
        eps = val.check_epsilon(self.epsilon)
        gamma = val.gamma_for(val.check_gamma(self.gamma), p)
        mesh, problem = self._resolve(mesh, problem)
        mesh = classify_boundary(mesh, problem)
        self.problem_report_ = validate_problem(problem, mesh, p)
        self.params_ = DGParameters(eps, gamma, self.quad_order)
        self.mesh_, self.problem_ = mesh, problem
        self.bases_ = build_bases(mesh, problem.coefficients, p, space)
        self.system_ = assemble(mesh, problem, self.bases_, self.params_)
        self.solution_ = solve(self.system_)
        self.n_dofs_ = self.bases_.n_dofs
        self.n_features_in_ = mesh.dim
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "solution_")
        return self.solution_(val.check_points(X, self.n_features_in_))

    def error_report(self, exact=None, with_dar=False) -> ErrorReport:
        check_is_fitted(self, "solution_")
        return compute_errors(self.solution_, exact, gamma=self.params_.gamma,
                              with_dar=with_dar)
