"""Assembly of the interior-penalty DG form with upwinded advection.

Matrix convention: ``A[i, j] = a(w_j, v_i)``, rows are test functions and
columns trial functions. Every facet integral is evaluated once and scattered
to both neighbouring element blocks, so the two sides always share the same
quadrature. Interior facets use the normal of their first element and the
jump sign +1 (first element) / -1 (second element).
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import BasisSet
from .errors import ContractError, QuadratureUnavailable, UnclassifiedFacet
from .mesh import BOUNDARY, DIRICHLET, INTERIOR, NEUMANN, Mesh, generate_structured
from .problem import ProblemSpec, builtin
from .quadrature import element_rule, map_to_simplex

SIPG, IIPG, NIPG = -1, 0, 1
VARIANTS = {"sipg": SIPG, "iipg": IIPG, "nipg": NIPG}


@dataclass(frozen=True)
class DGParameters:
    """epsilon in {-1, 0, 1} (SIPG, IIPG, NIPG) and a positive penalty gamma."""

    epsilon: int = SIPG
    gamma: float = 32.0
    quad_order: int | None = None

    def __post_init__(self):
        if self.epsilon not in (-1, 0, 1):
            raise ContractError(f"epsilon must be -1, 0 or 1, got {self.epsilon}")
        if not self.gamma > 0:
            raise ContractError(f"gamma must be positive, got {self.gamma}")
        if self.quad_order is not None and self.quad_order < 1:
            raise ContractError("quad_order must be >= 1")

    def n_quad(self, p: int) -> int:
        return self.quad_order if self.quad_order is not None else p + 1


@dataclass(frozen=True, eq=False)
class DGSystem:
    A: sp.csr_matrix
    b: np.ndarray
    offsets: np.ndarray
    mesh: Mesh
    problem: ProblemSpec
    bases: BasisSet
    params: DGParameters

    @property
    def n_dofs(self) -> int:
        return int(self.offsets[-1])

    def dof_range(self, t: int) -> range:
        return range(int(self.offsets[t]), int(self.offsets[t + 1]))

    def block(self, t: int, s: int) -> np.ndarray:
        return self.A[self.offsets[t]:self.offsets[t + 1],
                      self.offsets[s]:self.offsets[s + 1]].toarray()

    def n_nonzero_blocks(self) -> int:
        N = self.bases.local_dimension
        coo = self.A.tocoo()
        keep = coo.data != 0
        pairs = np.unique(np.column_stack([coo.row[keep] // N, coo.col[keep] // N]), axis=0)
        return len(pairs)

    def dump_matrix(self) -> str:
        coo = self.A.tocoo()
        buf = io.StringIO()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            buf.write(f"{r} {c} {float(v)!r}\n")
        return buf.getvalue()

    def dump_rhs(self) -> str:
        return "".join(f"{float(v)!r}\n" for v in self.b)


def _kgrad_dot_n(K, grads, normals):
    """(K grad phi) . n for K (F,Q,d,d), grads (F,Q,N,d), normals (F,d)."""
    Kn = np.einsum("fqij,fi->fqj", K, normals)  # K symmetric is not assumed
    return np.einsum("fqnj,fqj->fqn", grads, Kn)


def _facet_data(mesh, problem, bases, facets, n):
    pts, w = mesh.facet_quadrature(n, facets)
    F, Q, d = pts.shape
    flat = pts.reshape(-1, d)
    c = problem.coefficients
    K = c.K_values(flat).reshape(F, Q, d, d)
    normals = mesh.facet_normals[facets]
    bn = np.einsum("fqd,fd->fq", c.beta_values(flat).reshape(F, Q, d), normals)
    return pts, w, K, normals, bn


class _Scatter:
    """Coordinate triplets accumulated in a fixed order."""

    def __init__(self, offsets, N):
        self.offsets, self.N = offsets, N
        self.rows, self.cols, self.vals = [], [], []
        self.local = np.arange(N)

    def add(self, test_el, trial_el, blocks):
        # blocks: (m, N, N) with rows = test functions
        r = self.offsets[test_el][:, None, None] + self.local[None, :, None]
        c = self.offsets[trial_el][:, None, None] + self.local[None, None, :]
        r, c = np.broadcast_arrays(r, c)
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())
        self.vals.append(blocks.ravel())

    def matrix(self, n):
        if not self.rows:
            return sp.csr_matrix((n, n))
        coo = sp.coo_matrix((np.concatenate(self.vals),
                             (np.concatenate(self.rows), np.concatenate(self.cols))),
                            shape=(n, n))
        return coo.tocsr()


def assemble(mesh: Mesh, problem: ProblemSpec, bases: BasisSet,
             params: DGParameters) -> DGSystem:
    """Global sparse matrix and load vector of the DG discretization."""
    if len(bases) != mesh.n_elements:
        raise ContractError("bases and mesh have different element counts")
    if np.any(mesh.facet_kind == BOUNDARY):
        bad = np.flatnonzero(mesh.facet_kind == BOUNDARY)
        raise UnclassifiedFacet(f"{len(bad)} boundary facets are not classified "
                                f"(first: facet {bad[0]}); run classify_boundary")
    p, d, N = bases.degree, mesh.dim, bases.local_dimension
    n = params.n_quad(p)
    try:
        rule = element_rule(d, n)
    except (ValueError, ContractError) as exc:
        raise QuadratureUnavailable(f"no rule with {n} points: {exc}") from None
    eps, gamma = params.epsilon, params.gamma
    offsets = bases.offsets
    E = mesh.n_elements
    scatter = _Scatter(offsets, N)
    b = np.zeros(offsets[-1])
    c = problem.coefficients
    elems = np.arange(E)

    # volume terms
    pts, w = map_to_simplex(rule, mesh.vertices[mesh.elements])
    Q = pts.shape[1]
    flat = pts.reshape(-1, d)
    phi, dphi = bases.evaluate(pts)
    K = c.K_values(flat).reshape(E, Q, d, d)
    Kg = np.einsum("eqij,eqnj->eqni", K, dphi)
    vol = np.einsum("eq,eqti,eqsi->est", w, Kg, dphi)
    if not c.beta_is_zero:
        beta = c.beta_values(flat).reshape(E, Q, d)
        bgrad = np.einsum("eqi,eqsi->eqs", beta, dphi)
        vol -= np.einsum("eq,eqt,eqs->est", w, phi, bgrad)
    if not c.sigma_is_zero:
        sig = c.sigma_values(flat).reshape(E, Q)
        vol += np.einsum("eq,eqt,eqs->est", w * sig, phi, phi)
    scatter.add(elems, elems, vol)
    if problem.source is not None:
        f = np.asarray(problem.source(flat), dtype=float).reshape(E, Q)
        b += np.einsum("eq,eqs->es", w * f, phi).ravel()

    # interior facets
    inner = mesh.facets_of_kind(INTERIOR)
    if len(inner):
        fpts, fw, fK, nrm, bn = _facet_data(mesh, problem, bases, inner, n)
        pen = gamma / mesh.facet_diameters[inner]
        T = mesh.facet_elements[inner]
        sides = []
        for s, sgn in ((0, 1.0), (1, -1.0)):
            v, g = bases.evaluate(fpts, T[:, s])
            sides.append((v, _kgrad_dot_n(fK, g, nrm), sgn))
        for vs, fls, ss in sides:
            for vt, flt, st in sides:
                kernel = (pen[:, None] * ss * st + 0.5 * bn * ss + 0.5 * np.abs(bn) * ss * st)
                blk = np.einsum("fq,fqt,fqs->fst", fw * kernel, vt, vs)
                blk -= 0.5 * ss * np.einsum("fq,fqt,fqs->fst", fw, flt, vs)
                if eps:
                    blk += 0.5 * eps * st * np.einsum("fq,fqt,fqs->fst", fw, vt, fls)
                scatter.add(T[:, 0 if ss > 0 else 1], T[:, 0 if st > 0 else 1], blk)

    # Dirichlet facets
    dfac = mesh.facets_of_kind(DIRICHLET)
    if len(dfac):
        fpts, fw, fK, nrm, bn = _facet_data(mesh, problem, bases, dfac, n)
        F, Qf, _ = fpts.shape
        pen = gamma / mesh.facet_diameters[dfac]
        T = mesh.facet_elements[dfac, 0]
        v, g = bases.evaluate(fpts, T)
        fl = _kgrad_dot_n(fK, g, nrm)
        blk = np.einsum("fq,fqt,fqs->fst", fw * pen[:, None], v, v)
        blk -= np.einsum("fq,fqt,fqs->fst", fw, fl, v)
        if eps:
            blk += eps * np.einsum("fq,fqt,fqs->fst", fw, v, fl)
        scatter.add(T, T, blk)
        gD = np.asarray(problem.boundary.g_D(fpts.reshape(-1, d)), dtype=float).reshape(F, Qf)
        load = np.einsum("fq,fqs->fs", fw * gD * (pen[:, None] - bn), v)
        if eps:
            load += eps * np.einsum("fq,fqs->fs", fw * gD, fl)
        np.add.at(b, offsets[T][:, None] + np.arange(N), load)

    # Neumann facets
    nfac = mesh.facets_of_kind(NEUMANN)
    if len(nfac):
        fpts, fw, fK, nrm, bn = _facet_data(mesh, problem, bases, nfac, n)
        F, Qf, _ = fpts.shape
        T = mesh.facet_elements[nfac, 0]
        v, _ = bases.evaluate(fpts, T, with_grad=False)
        scatter.add(T, T, np.einsum("fq,fqt,fqs->fst", fw * bn, v, v))
        if problem.boundary.g_N is not None:
            gN = np.asarray(problem.boundary.g_N(fpts.reshape(-1, d), np.repeat(nrm, Qf, axis=0)),
                            dtype=float).reshape(F, Qf)
            np.add.at(b, offsets[T][:, None] + np.arange(N),
                      -np.einsum("fq,fqs->fs", fw * gN, v))

    A = scatter.matrix(int(offsets[-1]))
    return DGSystem(A, b, offsets, mesh, problem, bases, params)


# flux identities ----------------------------------------------------------------------

def upwind_trace(phi1, phi2, bn):
    """Trace taken from the element the flow comes from (side 1 if beta.n_e > 0)."""
    return np.where(bn > 0, phi1, phi2)


def upwind_identity_check(mesh: Mesh, problem: ProblemSpec, bases: BasisSet,
                          seed: int = 0, n_quad: int | None = None) -> float:
    """Max discrepancy of the two upwind/average flux identities on interior facets.

    Checks (beta phi)_upw . n_e = {beta phi} . n_e + |beta . n_e| [phi] . n_e / 2
    and {beta} . [phi^2] / 2 = {beta phi} . [phi] for a random broken function.
    """
    inner = mesh.facets_of_kind(INTERIOR)
    if len(inner) == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal((len(bases), bases.local_dimension))
    n = n_quad or bases.degree + 1
    fpts, _, _, _, bn = _facet_data(mesh, problem, bases, inner, n)
    T = mesh.facet_elements[inner]
    v1, _ = bases.evaluate(fpts, T[:, 0], with_grad=False)
    v2, _ = bases.evaluate(fpts, T[:, 1], with_grad=False)
    p1 = np.einsum("fqn,fn->fq", v1, coef[T[:, 0]])
    p2 = np.einsum("fqn,fn->fq", v2, coef[T[:, 1]])
    lhs = bn * upwind_trace(p1, p2, bn)
    rhs = 0.5 * bn * (p1 + p2) + 0.5 * np.abs(bn) * (p1 - p2)
    sq_l = 0.5 * bn * (p1 ** 2 - p2 ** 2)
    sq_r = 0.5 * bn * (p1 + p2) * (p1 - p2)
    return float(max(np.abs(lhs - rhs).max(), np.abs(sq_l - sq_r).max()))


# penalty ----------------------------------------------------------------------------

def _k_magnitude(problem: ProblemSpec, mesh: Mesh) -> float:
    return float(np.abs(problem.coefficients.K_values(mesh.barycentres)).max())


def recommend_gamma(p: int, problem: ProblemSpec, epsilon: int = SIPG,
                    mesh: Mesh | None = None) -> float:
    """8 p^2 scaled by the size of K relative to the exp_diffusion field.

    The magnitude is the max |K_ij| over element barycentres (default: the
    structured n=4 mesh). Returned for every epsilon, NIPG included, so runs
    stay comparable even though NIPG is coercive for any positive gamma.
    """
    if epsilon not in (-1, 0, 1):
        raise ContractError(f"epsilon must be -1, 0 or 1, got {epsilon}")
    mesh = mesh if mesh is not None else generate_structured(4, problem.dim)
    if problem.dim == 2:
        ref = _k_magnitude(builtin("exp_diffusion"), mesh)
    else:
        ref = 1.0
    return 8.0 * max(p, 1) ** 2 * _k_magnitude(problem, mesh) / ref
