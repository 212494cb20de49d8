import warnings

import numpy as np
import pytest

from oracles import fd_operator
from qtdg import multiindex as mi
from qtdg.errors import HardFailure, OracleOrderTooLow, UnknownProblem
from qtdg.functions import Constant, Exponential, Polynomial
from qtdg.mesh import DIRICHLET, classify_boundary, generate_structured
from qtdg.problem import (BUILTINS, BoundaryData, CoefficientField, ProblemSpec, builtin,
                          validate_problem)

WITH_EXACT = ("poly_reaction", "exp_diffusion", "smooth_dar")


def test_registry():
    for name in BUILTINS:
        assert builtin(name, nu=1e-2).name == name
    with pytest.raises(UnknownProblem):
        builtin("heat")


def test_derivative_examples():
    assert builtin("exp_diffusion").coefficients.derivative("K11", (1, 0), [0.5, 0.5]) == pytest.approx(1.0)
    assert builtin("poly_reaction").coefficients.derivative("sigma", (0, 0), [0.0, 0.0]) == pytest.approx(4.0)
    assert builtin("smooth_dar").coefficients.derivative("sigma", (2, 0), [0.0, 0.0]) == pytest.approx(6.0)
    assert builtin("exp_diffusion").coefficients.derivative("K12", (1, 0), [0.2, 0.3]) == 0.0


@pytest.mark.parametrize("name", WITH_EXACT)
def test_exact_solutions_are_homogeneous(name):
    pr = builtin(name)
    pts = np.random.default_rng(4).uniform(0.05, 0.95, (20, 2))
    u = pr.exact
    grad = lambda y: pr.exact_gradient(y)  # noqa: E731
    for x in pts:
        assert abs(fd_operator(pr.coefficients, u, grad, x)) <= 1e-6
    assert np.abs(pr.apply_operator(u, pts)).max() <= 1e-12


@pytest.mark.parametrize("name", BUILTINS)
def test_oracle_against_finite_differences(name):
    c = builtin(name, nu=0.1).coefficients
    pts = np.random.default_rng(5).uniform(0.1, 0.9, (10, 2))
    step = 1e-4
    for comp, f in c.entries():
        for ell in mi.enumerate_up_to(2, 2):
            for k in range(2):
                up = f.derivative(ell, pts + step * np.eye(2)[k])
                dn = f.derivative(ell, pts - step * np.eye(2)[k])
                fd = (up - dn) / (2 * step)
                ex = f.derivative(mi.add(ell, mi.unit(2, k)), pts)
                assert np.all(np.abs(fd - ex) <= 1e-5 * np.maximum(1.0, np.abs(ex))), (comp, ell, k)


@pytest.mark.parametrize("name", WITH_EXACT)
def test_dirichlet_trace(name):
    pr = builtin(name)
    m = classify_boundary(generate_structured(4), pr)
    pts, _ = m.facet_quadrature(3, m.facets_of_kind(DIRICHLET))
    flat = pts.reshape(-1, 2)
    assert np.allclose(pr.boundary.g_D(flat), pr.exact(flat), atol=1e-12, rtol=0)


def test_advdom_structure():
    c = builtin("advdom_neumann", nu=1e-3).coefficients
    pts = np.random.default_rng(6).random((10, 2))
    assert np.allclose(c.div_beta(pts), 0.0)
    g = builtin("advdom_neumann").boundary.g_D
    assert list(g(np.array([[0, 0.5], [0.2, 0], [0.6, 0]]))) == [1.0, 1.0, 0.0]


def test_validate_poly_reaction():
    pr = builtin("poly_reaction")
    rep = validate_problem(pr, classify_boundary(generate_structured(4), pr), 2)
    assert rep.k_min == pytest.approx(1.0)
    assert rep.sigma0 == pytest.approx(4 / 3)
    assert rep.warnings == ()


def test_validate_smooth_dar_sigma0():
    pr = builtin("smooth_dar")
    rep = validate_problem(pr, classify_boundary(generate_structured(4), pr), 2)
    assert rep.sigma0 == pytest.approx(1.0)


def test_validate_warns_on_zero_reaction():
    c = CoefficientField.isotropic(Constant(1.0, 2), [Constant(1.0, 2), None], None)
    pr = ProblemSpec("t", c, BoundaryData(lambda x: np.zeros(len(x)), None, lambda m, n: "D"))
    with pytest.warns(RuntimeWarning, match="sigma"):
        validate_problem(pr, generate_structured(2), 2)


def test_validate_hard_failure():
    k11 = Polynomial({(1, 0): 1.0, (0, 0): -0.5}, 2)  # negative on the left half
    c = CoefficientField([[k11, None], [None, Constant(1.0, 2)]])
    pr = ProblemSpec("t", c, BoundaryData(lambda x: np.zeros(len(x)), None, None))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(HardFailure):
            validate_problem(pr, generate_structured(2), 2)


def test_declared_order_checked():
    f = Exponential(1.0, (1.0, 0.0))
    f.max_order = 1
    c = CoefficientField.isotropic(f)
    c.check_orders(2)
    with pytest.raises(OracleOrderTooLow):
        c.check_orders(3)
