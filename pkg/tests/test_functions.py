import numpy as np
import pytest
import sympy as sp

from qtdg import multiindex as mi
from qtdg.errors import OrderTooHigh
from qtdg.functions import (AffineReciprocal, Constant, Exponential, Polynomial,
                            ReciprocalPolynomial, Scaled)

x1, x2 = sp.symbols("x1 x2")
CASES = [
    (Exponential(2.0, (1.0, -0.5)), 2 * sp.exp(x1 - x2 / 2)),
    (AffineReciprocal(3.0, (1.0, 1.0), 1.0), 3 / (x1 + x2 + 1)),
    (ReciprocalPolynomial(4.0, Polynomial({(0, 0): 1, (2, 0): 1, (0, 2): 1}, 2)),
     4 / (x1 ** 2 + x2 ** 2 + 1)),
    (Polynomial({(0, 0): 1, (1, 1): -2, (3, 0): 0.5}, 2), 1 - 2 * x1 * x2 + x1 ** 3 / 2),
    (Scaled(-1.5, Exponential(1.0, (0.3, 0.7))), -1.5 * sp.exp(0.3 * x1 + 0.7 * x2)),
    (Constant(2.5, 2), sp.Float(2.5) + 0 * x1),
]


@pytest.mark.parametrize("field,expr", CASES, ids=lambda c: type(c).__name__)
def test_derivatives_match_symbolic(field, expr):
    pts = np.random.default_rng(0).random((6, 2))
    for ell in mi.enumerate_up_to(2, 4):
        dexpr = sp.diff(expr, x1, ell[0], x2, ell[1]) if any(ell) else expr
        f = sp.lambdify((x1, x2), dexpr, "numpy")
        ref = np.broadcast_to(np.asarray(f(pts[:, 0], pts[:, 1]), float), (6,))
        got = field.derivative(ell, pts)
        assert np.allclose(got, ref, rtol=1e-11, atol=1e-11), ell


@pytest.mark.parametrize("field,expr", CASES[:3], ids=lambda c: type(c).__name__)
def test_derivative_table_layout(field, expr):
    pts = np.random.default_rng(2).random((4, 2))
    tab = field.derivative_table(3, pts)
    for col, ell in enumerate(mi.enumerate_up_to(2, 3)):
        assert np.allclose(tab[:, col], field.derivative(ell, pts))


def test_single_point_returns_scalar():
    f = Exponential(1.0, (1.0, -1.0))
    assert np.isscalar(f(np.array([0.5, 0.5])))
    assert f.derivative((1, 0), [0.5, 0.5]) == pytest.approx(1.0)


def test_declared_smoothness_is_enforced():
    f = Exponential(1.0, (1.0, 0.0))
    f.max_order = 1
    with pytest.raises(OrderTooHigh):
        f.derivative((1, 1), [0.0, 0.0])
    with pytest.raises(OrderTooHigh):
        f.derivative((1,), [0.0, 0.0])
