"""Direct solve, error norms and convergence rates."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import DGParameters, DGSystem
from .basis import BasisSet
from .errors import ContractError, MissingExactSolution, NonMonotoneH, SingularMatrix
from .mesh import DIRICHLET, INTERIOR, Mesh
from .problem import ProblemSpec
from .quadrature import element_rule, map_to_simplex

# pivots below this fraction of the largest one count as a breakdown
PIVOT_RTOL = 1e-13


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    coefficients: np.ndarray
    mesh: Mesh
    bases: BasisSet
    problem: ProblemSpec | None = None
    params: DGParameters | None = None
    residual: float = 0.0

    def __post_init__(self):
        if len(self.coefficients) != self.bases.n_dofs:
            raise ContractError("coefficient vector does not match the basis dofs")

    @property
    def local(self) -> np.ndarray:
        """Coefficients reshaped to (E, N)."""
        return self.coefficients.reshape(len(self.bases), self.bases.local_dimension)

    def evaluate_on(self, points, elements, with_grad=True):
        """u_h and grad u_h at per-element points (m, Q, d)."""
        v, g = self.bases.evaluate(points, elements, with_grad)
        c = self.local[np.asarray(elements)]
        val = np.einsum("eqn,en->eq", v, c)
        grad = np.einsum("eqnd,en->eqd", g, c) if with_grad else None
        return val, grad

    def __call__(self, points) -> np.ndarray:
        """Values at arbitrary points; points outside the mesh give NaN."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        owner = self.mesh.locate(pts)
        out = np.full(len(pts), np.nan)
        for t in np.unique(owner[owner >= 0]):
            sel = owner == t
            v, _ = self.bases[t].evaluate(pts[sel])
            out[sel] = v @ self.local[t]
        return out


def solve(system: DGSystem) -> DiscreteSolution:
    """Sparse LU solve; raises SingularMatrix on factorization breakdown."""
    A = sp.csc_matrix(system.A)
    if A.shape[0] != A.shape[1]:
        raise ContractError("system matrix is not square")
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularMatrix(f"LU factorization failed: {exc}") from None
    piv = np.abs(lu.U.diagonal())
    if piv.size and piv.min() <= PIVOT_RTOL * piv.max():
        raise SingularMatrix(f"LU pivot ratio {piv.min() / piv.max():.2e} below "
                             f"{PIVOT_RTOL:g}; check gamma, epsilon and boundary labels")
    x = lu.solve(system.b)
    if not np.all(np.isfinite(x)):
        raise SingularMatrix("solution contains non-finite values")
    r = system.A @ x - system.b
    bnorm = np.abs(system.b).max()
    rel = float(np.abs(r).max() / bnorm) if bnorm > 0 else float(np.abs(r).max())
    return DiscreteSolution(x, system.mesh, system.bases, system.problem, system.params, rel)


# errors -------------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorReport:
    err_L2: float
    err_H1: float
    err_H1_semi: float
    err_Linf: float
    dofs: int
    h_nominal: float
    h_actual: float
    err_dar: float | None = None
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _exact_pair(problem, exact):
    """(u, grad u) callables on (n, d) arrays."""
    if exact is None:
        if problem is None or problem.exact is None:
            name = problem.name if problem is not None else "the problem"
            raise MissingExactSolution(f"{name} has no exact solution")
        exact = problem.exact
    if isinstance(exact, tuple):
        return exact
    d = exact.d
    grad = lambda x: np.column_stack(  # noqa: E731
        [exact.derivative(tuple(int(i == k) for i in range(d)), x) for k in range(d)])
    return exact, grad


def compute_errors(solution: DiscreteSolution,
                   exact=None,
                   n_quad: int | None = None,
                   gamma: float | None = None,
                   with_dar: bool = False) -> ErrorReport:
    """L2, H1 and Linf errors of u_h against the exact solution.

    ``exact`` may be a field with a derivative oracle or a pair of callables
    (u, grad_u); by default the problem's own exact solution is used. The
    quadrature has max(p + 2, n_quad) points per direction. Linf is the max
    over those nodes and the mesh vertices. With ``with_dar`` the DG energy
    norm of the error is added (needs ``gamma`` or the solve parameters).
    """
    u, grad_u = _exact_pair(solution.problem, exact)
    mesh, bases = solution.mesh, solution.bases
    d, E = mesh.dim, mesh.n_elements
    n = max(bases.degree + 2, n_quad or 0)
    pts, w = map_to_simplex(element_rule(d, n), mesh.vertices[mesh.elements])
    Q = pts.shape[1]
    flat = pts.reshape(-1, d)
    uh, guh = solution.evaluate_on(pts, np.arange(E))
    e = uh - np.asarray(u(flat)).reshape(E, Q)
    ge = guh - np.asarray(grad_u(flat)).reshape(E, Q, d)
    l2 = math.sqrt(max(float(np.sum(w * e ** 2)), 0.0))
    semi = math.sqrt(max(float(np.sum(w[..., None] * ge ** 2)), 0.0))

    # vertices, evaluated from every element that owns them
    vpts = mesh.vertices[mesh.elements]
    vh, _ = solution.evaluate_on(vpts, np.arange(E), with_grad=False)
    ev = vh - np.asarray(u(vpts.reshape(-1, d))).reshape(vh.shape)
    linf = float(max(np.abs(e).max(), np.abs(ev).max()))

    dar = None
    if with_dar:
        if gamma is None:
            if solution.params is None:
                raise ContractError("dar-norm needs gamma")
            gamma = solution.params.gamma
        dar = _dar_error(solution, u, pts, w, ge, e, gamma, n)
    return ErrorReport(l2, math.sqrt(l2 ** 2 + semi ** 2), semi, linf, bases.n_dofs,
                       float(mesh.h_nominal), float(mesh.h), dar,
                       {"linf_sampling": "quadrature nodes + vertices", "n_quad": n})


def _dar_error(solution, u, pts, w, ge, e, gamma, n):
    mesh, problem = solution.mesh, solution.problem
    if problem is None:
        raise ContractError("dar-norm needs the problem coefficients")
    c = problem.coefficients
    d, E, Q = mesh.dim, *pts.shape[:2]
    K = c.K_values(pts.reshape(-1, d)).reshape(E, Q, d, d)
    total = float(np.einsum("eq,eqi,eqij,eqj->", w, ge, K, ge))
    total += float(np.sum(w * e ** 2))
    inner = mesh.facets_of_kind(INTERIOR)
    outer = np.flatnonzero(mesh.facet_kind != INTERIOR)
    # (facets, penalty jump term, |beta.n| jump term)
    for f_set, penal, upw in ((inner, True, True),
                              (mesh.facets_of_kind(DIRICHLET), True, False),
                              (outer, False, True)):
        if len(f_set) == 0 or not (penal or (upw and not c.beta_is_zero)):
            continue
        fp, fw = mesh.facet_quadrature(n, f_set)
        F, Qf, _ = fp.shape
        T = mesh.facet_elements[f_set]
        uex = np.asarray(u(fp.reshape(-1, d))).reshape(F, Qf)
        jump = solution.evaluate_on(fp, T[:, 0], with_grad=False)[0] - uex
        if np.all(T[:, 1] >= 0):
            jump -= solution.evaluate_on(fp, T[:, 1], with_grad=False)[0] - uex
        if penal:
            total += float(np.sum(fw * (gamma / mesh.facet_diameters[f_set])[:, None] * jump ** 2))
        if upw and not c.beta_is_zero:
            bn = np.einsum("fqd,fd->fq", c.beta_values(fp.reshape(-1, d)).reshape(F, Qf, d),
                           mesh.facet_normals[f_set])
            total += 0.5 * float(np.sum(fw * np.abs(bn) * jump ** 2))
    return math.sqrt(max(total, 0.0))


def convergence_rates(reports: Sequence[ErrorReport]) -> list[tuple[float, float, float]]:
    """log(e_coarse / e_fine) / log(h_coarse / h_fine) per consecutive pair."""
    if len(reports) < 2:
        raise ContractError("need at least two reports")
    hs = [r.h_actual for r in reports]
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise NonMonotoneH(f"h_actual must decrease strictly, got {hs}")
    return [tuple(rate(getattr(c, k), getattr(f, k), c.h_actual, f.h_actual)
                  for k in ("err_L2", "err_H1", "err_Linf"))
            for c, f in zip(reports, reports[1:])]


def rate(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> float:
    if e_coarse <= 0 or e_fine <= 0:
        return float("nan")
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)
