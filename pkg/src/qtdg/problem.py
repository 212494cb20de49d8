"""Boundary-value problems for div(-K grad u + beta u) + sigma u = f.

A :class:`ProblemSpec` bundles a :class:`CoefficientField` (with exact
derivative oracles), :class:`BoundaryData`, an optional source and an
optional exact solution. Builtins are available through :func:`builtin`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import multiindex as mi
from .errors import HardFailure, OracleOrderTooLow, OrderTooHigh, UnknownProblem
from .functions import (AffineReciprocal, Constant, Exponential, Polynomial,
                        ReciprocalPolynomial, ScalarFunction, Scaled)

Region = Callable[[np.ndarray, np.ndarray], str]


def _parse_component(component) -> tuple:
    """'K12' -> ('K', 0, 1); 'beta2' -> ('beta', 1); 'sigma' -> ('sigma',)."""
    if isinstance(component, tuple):
        return component
    c = str(component)
    if c == "sigma":
        return ("sigma",)
    if c.startswith("beta") and c[4:].isdigit():
        return ("beta", int(c[4:]) - 1)
    if c.startswith("K") and len(c) == 3 and c[1:].isdigit():
        return ("K", int(c[1]) - 1, int(c[2]) - 1)
    raise ValueError(f"unknown coefficient component {component!r}")


class CoefficientField:
    """Diffusion tensor K (d x d), advection beta (d) and reaction sigma.

    Entries are :class:`ScalarFunction` instances or ``None`` for an
    identically zero entry. Declaring an entry ``None`` (rather than a zero
    function) lets the basis recurrence skip it exactly.
    """

    def __init__(self, K: Sequence[Sequence[ScalarFunction | None]],
                 beta: Sequence[ScalarFunction | None] | None = None,
                 sigma: ScalarFunction | None = None):
        self.d = len(K)
        if any(len(row) != self.d for row in K):
            raise ValueError("K must be square")
        self.K = [list(row) for row in K]
        self.beta = list(beta) if beta is not None else [None] * self.d
        if len(self.beta) != self.d:
            raise ValueError("beta has the wrong length")
        self.sigma = sigma

    @classmethod
    def isotropic(cls, kappa: ScalarFunction, beta=None, sigma=None) -> "CoefficientField":
        d = kappa.d
        K = [[kappa if j == m else None for m in range(d)] for j in range(d)]
        return cls(K, beta, sigma)

    @staticmethod
    def _nonzero(f):
        return f is not None and not f.is_zero

    @property
    def beta_is_zero(self) -> bool:
        return not any(self._nonzero(b) for b in self.beta)

    @property
    def sigma_is_zero(self) -> bool:
        return not self._nonzero(self.sigma)

    def entries(self):
        """(component tuple, field) for every declared nonzero entry."""
        for j in range(self.d):
            for m in range(self.d):
                if self._nonzero(self.K[j][m]):
                    yield ("K", j, m), self.K[j][m]
        for j in range(self.d):
            if self._nonzero(self.beta[j]):
                yield ("beta", j), self.beta[j]
        if self._nonzero(self.sigma):
            yield ("sigma",), self.sigma

    def _field(self, comp):
        if comp[0] == "K":
            return self.K[comp[1]][comp[2]]
        if comp[0] == "beta":
            return self.beta[comp[1]]
        return self.sigma

    # point evaluation ----------------------------------------------------------
    def K_values(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float).reshape(-1, self.d)
        out = np.zeros((len(pts), self.d, self.d))
        for j in range(self.d):
            for m in range(self.d):
                if self._nonzero(self.K[j][m]):
                    out[:, j, m] = self.K[j][m](pts)
        return out

    def beta_values(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float).reshape(-1, self.d)
        out = np.zeros((len(pts), self.d))
        for j in range(self.d):
            if self._nonzero(self.beta[j]):
                out[:, j] = self.beta[j](pts)
        return out

    def sigma_values(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float).reshape(-1, self.d)
        if self.sigma_is_zero:
            return np.zeros(len(pts))
        return self.sigma(pts)

    def div_beta(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float).reshape(-1, self.d)
        out = np.zeros(len(pts))
        for j in range(self.d):
            if self._nonzero(self.beta[j]):
                out += self.beta[j].derivative(mi.unit(self.d, j), pts)
        return out

    # derivative oracle ---------------------------------------------------------
    def derivative(self, component, ell, x):
        """Exact D^ell of one coefficient entry ('K11', 'beta2', 'sigma', ...)."""
        f = self._field(_parse_component(component))
        if f is None:
            pts = np.asarray(x, dtype=float)
            return 0.0 if pts.ndim == 1 else np.zeros(len(pts))
        return f.derivative(ell, x)

    def check_orders(self, p: int) -> None:
        """Raise unless K, beta are C^max(p-1,1) and sigma is C^max(p-2,0)."""
        need_kb, need_s = max(p - 1, 1), max(p - 2, 0)
        for comp, f in self.entries():
            need = need_s if comp[0] == "sigma" else need_kb
            if f.max_order is not None and f.max_order < need:
                raise OracleOrderTooLow(
                    f"{comp} declared C^{f.max_order}, degree {p} needs C^{need}")


@dataclass(frozen=True)
class BoundaryData:
    """g_D(x) on the Dirichlet part, g_N(x, n) = -K grad u . n on the Neumann part.

    ``region(midpoint, normal)`` returns 'D' or 'N' for each boundary facet;
    ``None`` means classification by the sign of beta . n.
    """

    g_D: Callable[[np.ndarray], np.ndarray]
    g_N: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    region: Region | None = None


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    coefficients: CoefficientField
    boundary: BoundaryData
    source: Callable[[np.ndarray], np.ndarray] | None = None
    exact: ScalarFunction | None = None
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.coefficients.d

    @property
    def homogeneous(self) -> bool:
        return self.source is None

    def exact_gradient(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return np.column_stack([self.exact.derivative(mi.unit(self.dim, k), pts)
                                for k in range(self.dim)])

    def apply_operator(self, u: ScalarFunction, x) -> np.ndarray:
        """L u = div(-K grad u + beta u) + sigma u, using exact derivatives."""
        d, c = self.dim, self.coefficients
        pts = np.asarray(x, dtype=float).reshape(-1, d)
        out = c.sigma_values(pts) * u(pts)
        for j in range(d):
            ej = mi.unit(d, j)
            for m in range(d):
                if not c._nonzero(c.K[j][m]):
                    continue
                em = mi.unit(d, m)
                Kjm = c.K[j][m]
                out -= (Kjm.derivative(ej, pts) * u.derivative(em, pts)
                        + Kjm(pts) * u.derivative(mi.add(ej, em), pts))
            if c._nonzero(c.beta[j]):
                b = c.beta[j]
                out += b.derivative(ej, pts) * u(pts) + b(pts) * u.derivative(ej, pts)
        return out


# builtins --------------------------------------------------------------------------

def _dirichlet_from_exact(u: ScalarFunction):
    return lambda x: u(np.asarray(x, dtype=float).reshape(-1, u.d))


def _all(label: str) -> Region:
    return lambda mid, n: label


def _poly_reaction() -> ProblemSpec:
    one = Constant(1.0, 2)
    q = Polynomial({(0, 0): 1.0, (2, 0): 1.0, (0, 2): 1.0}, 2)
    coeffs = CoefficientField.isotropic(one, None, ReciprocalPolynomial(4.0, q))
    return ProblemSpec("poly_reaction", coeffs,
                       BoundaryData(_dirichlet_from_exact(q), None, _all("D")), exact=q)


def _exp_diffusion() -> ProblemSpec:
    kappa = Exponential(1.0, (1.0, -1.0))
    u = Exponential(1.0, (-1.0, 1.0))
    coeffs = CoefficientField.isotropic(kappa)
    return ProblemSpec("exp_diffusion", coeffs,
                       BoundaryData(_dirichlet_from_exact(u), None, _all("D")), exact=u)


def _smooth_dar() -> ProblemSpec:
    kappa = Polynomial({(0, 0): 1.0, (1, 0): 1.0, (0, 1): 1.0}, 2)
    beta = [Constant(1.0, 2), None]
    sigma = AffineReciprocal(3.0, (1.0, 1.0), 1.0)
    u = AffineReciprocal(1.0, (1.0, 1.0), 1.0)
    coeffs = CoefficientField.isotropic(kappa, beta, sigma)

    def g_N(x, n):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        grad = np.column_stack([u.derivative((1, 0), x), u.derivative((0, 1), x)])
        flux = -kappa(x)[:, None] * grad
        return np.einsum("qd,qd->q", flux, np.broadcast_to(n, flux.shape))

    def region(mid, n):
        return "D" if abs(mid[0]) < 1e-12 else "N"

    return ProblemSpec("smooth_dar", coeffs,
                       BoundaryData(_dirichlet_from_exact(u), g_N, region), exact=u)


def _advdom_gD(x):
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    tol = 1e-12
    left = x[:, 0] <= tol
    bottom_left = (x[:, 1] <= tol) & (x[:, 0] <= 1.0 / 3.0)
    return np.where(left | bottom_left, 1.0, 0.0)


def _advdom(nu: float, dirichlet_outflow: bool) -> ProblemSpec:
    kappa = Constant(nu, 2)
    beta = [Polynomial({(0, 0): 1.0, (0, 1): 1.0}, 2),
            Polynomial({(0, 0): 2.0, (1, 0): -1.0}, 2)]
    coeffs = CoefficientField.isotropic(kappa, beta, None)
    if dirichlet_outflow:
        region, name = _all("D"), "advdom_dirichlet"
    else:
        def region(mid, n):
            return "D" if (mid[0] < 1e-12 or mid[1] < 1e-12) else "N"
        name = "advdom_neumann"
    g_N = lambda x, n: np.zeros(len(np.asarray(x).reshape(-1, 2)))  # noqa: E731
    return ProblemSpec(name, coeffs, BoundaryData(_advdom_gD, g_N, region),
                       params={"nu": nu})


def _reactdom(nu: float) -> ProblemSpec:
    coeffs = CoefficientField.isotropic(
        Constant(nu, 2), None, Polynomial({(0, 0): 1.0, (1, 0): 1.0, (0, 1): 1.0}, 2))
    g_D = lambda x: np.ones(len(np.asarray(x).reshape(-1, 2)))  # noqa: E731
    return ProblemSpec("reactdom", coeffs, BoundaryData(g_D, None, _all("D")),
                       params={"nu": nu})


BUILTINS = ("poly_reaction", "exp_diffusion", "smooth_dar",
            "advdom_neumann", "advdom_dirichlet", "reactdom")
NEEDS_NU = ("advdom_neumann", "advdom_dirichlet", "reactdom")


def builtin(name: str, nu: float | None = None) -> ProblemSpec:
    """Named problem; the dominated-regime ones need the diffusion level ``nu``."""
    if name in NEEDS_NU:
        nu = 0.1 if nu is None else float(nu)
        if nu <= 0:
            raise UnknownProblem(f"{name} needs nu > 0")
        if name == "reactdom":
            return _reactdom(nu)
        return _advdom(nu, name == "advdom_dirichlet")
    table = {"poly_reaction": _poly_reaction, "exp_diffusion": _exp_diffusion,
             "smooth_dar": _smooth_dar}
    if name not in table:
        raise UnknownProblem(f"unknown problem {name!r}; choose from {', '.join(BUILTINS)}")
    return table[name]()


# validation -------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemReport:
    k_min: float            # min eigenvalue of sym(K) over samples
    sigma0: float           # min of sigma + div(beta)/2
    k11_min: float          # min K_11 at barycentres
    has_dirichlet: bool | None
    warnings: tuple[str, ...]


def validate_problem(problem: ProblemSpec, mesh, p: int, n_quad: int | None = None) -> ProblemReport:
    """Sample the coefficient assumptions on barycentres and quadrature nodes.

    Violations are reported as warnings, except K_11(x_T) <= 0 which makes
    the basis recurrence impossible and raises :class:`HardFailure`.
    """
    from .quadrature import element_rule, map_to_simplex

    c = problem.coefficients
    rule = element_rule(mesh.dim, n_quad or p + 1)
    qp, _ = map_to_simplex(rule, mesh.vertices[mesh.elements])
    samples = np.vstack([mesh.barycentres, qp.reshape(-1, mesh.dim),
                         mesh.vertices])
    K = c.K_values(samples)
    k_min = float(np.linalg.eigvalsh(0.5 * (K + K.transpose(0, 2, 1))).min())
    sigma0 = float((c.sigma_values(samples) + 0.5 * c.div_beta(samples)).min())
    k11 = c.K_values(mesh.barycentres)[:, 0, 0]
    k11_min = float(k11.min())
    notes = []
    if k_min <= 0:
        notes.append(f"ellipticity fails: min eigenvalue of K is {k_min:.3e}")
    if sigma0 <= 0:
        notes.append(f"sigma + div(beta)/2 has minimum {sigma0:.3e} <= 0")
    has_d = None
    if np.any(mesh.facet_kind != 0) and not np.any(mesh.facet_kind == 3):
        has_d = bool(np.any(mesh.facet_kind == 1))
        if not has_d:
            notes.append("no Dirichlet facets: Gamma_D is empty")
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if k11_min <= 0:
        raise HardFailure(f"K_11(x_T) = {k11_min:.3e} <= 0 at a barycentre")
    return ProblemReport(k_min, sigma0, k11_min, has_d, tuple(notes))


__all__ = ["CoefficientField", "BoundaryData", "ProblemSpec", "ProblemReport",
           "builtin", "validate_problem", "BUILTINS", "OrderTooHigh"]
