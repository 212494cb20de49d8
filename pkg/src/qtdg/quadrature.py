"""Gauss-Legendre rules on [0, 1], Duffy-collapsed rules on the reference
triangle, and affine maps to physical elements and facets."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ContractError, DegenerateElement

MAX_GL_POINTS = 30


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes (n_points, dim) and positive weights on a reference domain."""

    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n_points(self) -> int:
        return len(self.weights)


def _legendre_with_derivative(n: int, x: np.ndarray):
    p0, p1 = np.ones_like(x), x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [0, 1], exact to degree 2n - 1.

    Roots of P_n are found by Newton iteration from the Chebyshev-type
    asymptotic guess cos(pi (k - 1/4) / (n + 1/2)).
    """
    if not 1 <= n <= MAX_GL_POINTS:
        raise ContractError(f"gauss_legendre supports 1..{MAX_GL_POINTS} points, got {n}")
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        pn, dp = _legendre_with_derivative(n, x)
        dx = pn / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    _, dp = _legendre_with_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    # ascending nodes; symmetrize to kill last-bit asymmetry
    x, w = x[::-1], w[::-1]
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(((1.0 + x) / 2.0)[:, None], w / 2.0, 2 * n - 1)


@lru_cache(maxsize=None)
def duffy_triangle(n: int) -> QuadratureRule:
    """n*n-point rule on the triangle (0,0), (1,0), (0,1).

    Tensor Gauss-Legendre on the unit square collapsed by
    (u, v) -> (u, v (1 - u)) with Jacobian (1 - u).
    """
    g = gauss_legendre(n)
    t, w = g.nodes[:, 0], g.weights
    u, v = np.meshgrid(t, t, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    nodes = np.column_stack([u.ravel(), (v * (1.0 - u)).ravel()])
    weights = (wu * wv * (1.0 - u)).ravel()
    return QuadratureRule(nodes, weights, 2 * n - 2)


@lru_cache(maxsize=None)
def point_rule() -> QuadratureRule:
    """Trivial rule for 0-dimensional facets (1D meshes)."""
    return QuadratureRule(np.zeros((1, 0)), np.ones(1), 10**9)


def element_rule(dim: int, n: int) -> QuadratureRule:
    """Reference-element rule with n points per direction."""
    if dim == 1:
        return gauss_legendre(n)
    if dim == 2:
        return duffy_triangle(n)
    raise ContractError(f"no element rule for dimension {dim}")


def facet_rule(dim: int, n: int) -> QuadratureRule:
    if dim == 1:
        return point_rule()
    if dim == 2:
        return gauss_legendre(n)
    raise ContractError(f"no facet rule for dimension {dim}")


def map_to_simplex(rule: QuadratureRule, vertices: np.ndarray):
    """Affine image of a reference rule on a simplex or straight facet.

    ``vertices`` has shape (k+1, dim) for a k-simplex (k = rule dimension),
    or (n_simplices, k+1, dim) to map a batch. Returns physical nodes with
    shape (..., n_points, dim) and weights scaled by the k-dimensional
    Jacobian, so that they sum to the simplex measure.
    """
    verts = np.asarray(vertices, dtype=float)
    single = verts.ndim == 2
    if single:
        verts = verts[None]
    origin = verts[:, 0, :]
    edges = verts[:, 1:, :] - origin[:, None, :]  # (m, k, dim)
    k = edges.shape[1]
    if k == 0:
        pts = np.repeat(origin[:, None, :], rule.n_points, axis=1)
        jac = np.ones(len(verts))
    else:
        pts = origin[:, None, :] + np.einsum("qk,mkd->mqd", rule.nodes, edges)
        gram = np.einsum("mkd,mld->mkl", edges, edges)
        jac = np.sqrt(np.abs(np.linalg.det(gram)))
        if np.any(jac <= 1e-14 * np.max(np.abs(edges)) ** k):
            raise DegenerateElement("simplex with (near) zero Jacobian")
    weights = jac[:, None] * rule.weights[None, :]
    if single:
        return pts[0], weights[0]
    return pts, weights
