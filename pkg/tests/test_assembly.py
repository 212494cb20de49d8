import numpy as np
import pytest

from oracles import naive_assembly
from qtdg import assembly as A
from qtdg.basis import build_bases, build_full_poly_bases, taylor_of
from qtdg.errors import ContractError, QuadratureUnavailable, UnclassifiedFacet
from qtdg.functions import Constant
from qtdg.mesh import classify_boundary, generate_structured, import_mesh
from qtdg.problem import BoundaryData, CoefficientField, ProblemSpec, builtin


def setup(name, p, n, eps=-1, gamma=32.0, space="qt", nu=0.1, quad=None):
    pr = builtin(name, nu=nu)
    m = classify_boundary(generate_structured(n), pr)
    b = build_bases(m, pr.coefficients, p, space)
    return A.assemble(m, pr, b, A.DGParameters(eps, gamma, quad)), m, pr, b


def test_parameters_validated():
    with pytest.raises(ContractError):
        A.DGParameters(epsilon=2)
    with pytest.raises(ContractError):
        A.DGParameters(gamma=0.0)
    assert A.DGParameters(quad_order=5).n_quad(2) == 5 and A.DGParameters().n_quad(3) == 4


@pytest.mark.parametrize("name", ["smooth_dar", "advdom_neumann", "exp_diffusion"])
@pytest.mark.parametrize("eps", [-1, 0, 1])
def test_matches_naive_loop_assembly(name, eps):
    S, m, pr, b = setup(name, 2, 2, eps=eps, gamma=7.0)
    Aref, bref = naive_assembly(m, pr, b, eps, 7.0, 3)
    scale = np.abs(Aref).max()
    assert np.abs(S.A.toarray() - Aref).max() <= 1e-12 * scale
    assert np.abs(S.b - bref).max() <= 1e-12 * max(1.0, np.abs(bref).max())


def _reference_triangle(labels):
    text = "dim 2\nvertices 3\n0 0\n0.5 0\n0 0.5\nelements 1\n0 1 2\n"
    text += f"boundary 3\n0 1 {labels[0]}\n1 2 {labels[1]}\n2 0 {labels[2]}\n"
    return import_mesh(text)


def _const_problem(sigma):
    c = CoefficientField.isotropic(Constant(1.0, 2), None,
                                   Constant(sigma, 2) if sigma else None)
    return ProblemSpec("c", c, BoundaryData(lambda x: np.zeros(len(x)), None, None))


def test_constant_mass_on_reference_triangle():
    m = import_mesh("dim 2\nvertices 3\n0 0\n1 0\n0 1\nelements 1\n0 1 2\n"
                    "boundary 3\n0 1 N\n1 2 N\n2 0 N\n")
    pr = _const_problem(1.0)
    S = A.assemble(classify_boundary(m, pr), pr, build_full_poly_bases(m, 0), A.DGParameters())
    assert S.A.toarray() == pytest.approx(np.array([[0.5]]))


def test_dirichlet_penalty_of_constant():
    m = _reference_triangle("DNN")
    pr = _const_problem(0.0)
    mm = classify_boundary(m, pr)
    S = A.assemble(mm, pr, build_full_poly_bases(mm, 0), A.DGParameters(gamma=4.0))
    assert S.A.toarray()[0, 0] == pytest.approx(4.0)


def test_unclassified_facets_rejected():
    pr = builtin("poly_reaction")
    m = generate_structured(2)
    with pytest.raises(UnclassifiedFacet):
        A.assemble(m, pr, build_bases(m, pr.coefficients, 2), A.DGParameters())


def test_quadrature_unavailable():
    pr = builtin("poly_reaction")
    m = classify_boundary(generate_structured(1), pr)
    with pytest.raises(QuadratureUnavailable):
        A.assemble(m, pr, build_bases(m, pr.coefficients, 2), A.DGParameters(quad_order=40))


@pytest.mark.parametrize("name", ["exp_diffusion", "poly_reaction", "reactdom"])
def test_sipg_symmetry_without_advection(name):
    S, *_ = setup(name, 2, 4)
    M = S.A.toarray()
    assert np.abs(M - M.T).max() <= 1e-12 * np.abs(M).max()


def test_sipg_coercivity():
    for n in (2, 4):
        S, *_ = setup("exp_diffusion", 2, n)
        M = S.A.toarray()
        assert np.linalg.eigvalsh(0.5 * (M + M.T)).min() > 0


@pytest.mark.parametrize("name", ["smooth_dar", "advdom_neumann", "advdom_dirichlet", "exp_diffusion"])
@pytest.mark.parametrize("eps", [-1, 1])
def test_orientation_independence(name, eps):
    S, m, pr, b = setup(name, 3, 4, eps=eps)
    F = A.assemble(m.flipped(), pr, b, S.params)
    assert np.abs((S.A - F.A).toarray()).max() <= 1e-13 * max(1.0, abs(S.A).max())
    assert np.abs(S.b - F.b).max() <= 1e-13


def test_block_sparsity():
    S, m, *_ = setup("smooth_dar", 2, 4)
    assert S.n_nonzero_blocks() == m.n_elements + 2 * len(m.interior_facets)
    assert S.n_dofs == m.n_elements * 5


@pytest.mark.parametrize("p", [2, 3, 4])
def test_galerkin_consistency(p):
    S, m, pr, b = setup("poly_reaction", p, 4)
    x = np.concatenate([b[t].coordinates(taylor_of(pr.exact, m.element(t), p))
                        for t in range(m.n_elements)])
    assert np.abs(S.A @ x - S.b).max() <= 1e-9 * np.abs(S.b).max()


def test_upwind_identity():
    for name in ("advdom_neumann", "smooth_dar"):
        S, m, pr, b = setup(name, 3, 4)
        assert A.upwind_identity_check(m, pr, b, seed=1) <= 1e-13


def test_upwind_trace_cases():
    p1, p2 = np.array([1.0, 2.0, 3.0]), np.array([-1.0, -2.0, -3.0])
    bn = np.array([0.5, -0.5, 0.0])
    up = A.upwind_trace(p1, p2, bn)
    assert up[0] == p1[0] and up[1] == p2[1]
    avg_form = 0.5 * bn * (p1 + p2) + 0.5 * np.abs(bn) * (p1 - p2)
    assert np.allclose(bn * up, avg_form)
    assert avg_form[2] == 0.5 * bn[2] * (p1[2] + p2[2])


@pytest.mark.parametrize("p,g", [(2, 32.0), (3, 72.0), (4, 128.0)])
def test_recommend_gamma(p, g):
    pr = builtin("exp_diffusion")
    for eps in (-1, 0, 1):
        assert A.recommend_gamma(p, pr, eps) == pytest.approx(g)


def test_recommend_gamma_scales_with_diffusion():
    ref = A.recommend_gamma(2, builtin("exp_diffusion"))
    small = A.recommend_gamma(2, builtin("reactdom", nu=1e-3))
    assert small < ref and small > 0


def test_dumps_and_determinism():
    S1, *_ = setup("smooth_dar", 2, 2)
    S2, *_ = setup("smooth_dar", 2, 2)
    assert S1.dump_matrix() == S2.dump_matrix() and S1.dump_rhs() == S2.dump_rhs()
    rows = S1.dump_matrix().splitlines()
    assert len(rows) == S1.A.nnz
    r, c, v = rows[0].split()
    assert float(v) == S1.A[int(r), int(c)]
    assert len(S1.dump_rhs().splitlines()) == S1.n_dofs
