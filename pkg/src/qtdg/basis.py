"""Local polynomial spaces in scaled-monomial form.

Every local function is v(x) = sum_k a_k ((x - x_T) / h_T)^k over |k| <= p,
stored as a coefficient vector in the canonical (graded-lex) multi-index
order. Quasi-Trefftz bases are produced by the coefficient recurrence that
enforces D^i(L v)(x_T) = 0 for |i| <= p - 2, walking the multi-indices
diagonal by diagonal so each step only reads coefficients already known.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from . import multiindex as mi
from .errors import ContractError, OracleOrderTooLow, OrderTooHigh, SingularLeadingCoefficient
from .problem import CoefficientField

QT, FULL = "quasi-trefftz", "full-polynomial"


def qt_dimension(d: int, p: int) -> int:
    """Dimension of the local quasi-Trefftz space.

    (p+d-2)! (2p+d-1) / ((d-1)! p!) for p >= 2, and the full S_{d,p} below.
    """
    if d < 1 or p < 0:
        raise ContractError("qt_dimension needs d >= 1 and p >= 0")
    if p < 2:
        return mi.n_monomials(d, p)
    return mi.n_monomials(d - 1, p) + mi.n_monomials(d - 1, p - 1)


# evaluation -----------------------------------------------------------------------

def _monomials(y: np.ndarray, p: int, with_grad: bool):
    """Scaled monomials y^k and their y-gradients, canonical order.

    y has shape (..., d). Returns M (..., S) and dM (..., S, d) or None.
    """
    d = y.shape[-1]
    idx = np.array(mi.enumerate_up_to(d, p), dtype=np.int64).reshape(-1, d)
    powers = np.ones(y.shape[:-1] + (d, p + 1))
    for e in range(1, p + 1):
        powers[..., e] = powers[..., e - 1] * y
    # factors[..., m, s] = y_m ** k_m(s)
    factors = np.stack([powers[..., m, idx[:, m]] for m in range(d)], axis=-2)
    M = np.prod(factors, axis=-2)
    if not with_grad:
        return M, None
    dM = np.empty(M.shape + (d,))
    for m in range(d):
        lowered = idx[:, m] - 1
        dfac = np.where(idx[:, m] > 0, idx[:, m] * powers[..., m, np.maximum(lowered, 0)], 0.0)
        others = np.prod(np.delete(factors, m, axis=-2), axis=-2) if d > 1 else 1.0
        dM[..., m] = dfac * others
    return M, dM


@dataclass(frozen=True, eq=False)
class LocalPolynomial:
    """One scaled-monomial polynomial on an element."""

    coefficients: np.ndarray  # (S,)
    center: np.ndarray
    scale: float
    degree: int

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        M, _ = _monomials((x - self.center) / self.scale, self.degree, False)
        return M @ self.coefficients

    def gradient(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        _, dM = _monomials((x - self.center) / self.scale, self.degree, True)
        return np.einsum("qsd,s->qd", dM, self.coefficients) / self.scale

    def derivative_at_center(self, k) -> float:
        """D^k v(x_T) = a_k k! / h^|k|."""
        pos = mi.index_map(len(self.center), self.degree).get(tuple(k))
        if pos is None:
            return 0.0
        return self.coefficients[pos] * mi.factorial(k) / self.scale ** sum(k)


@dataclass(frozen=True, eq=False)
class LocalBasis:
    """Basis of a local space: coefficient matrix (N, S), one row per member."""

    coefficients: np.ndarray
    center: np.ndarray
    scale: float
    degree: int
    kind: str

    @property
    def dimension(self) -> int:
        return self.coefficients.shape[0]

    @property
    def members(self) -> list[LocalPolynomial]:
        return [LocalPolynomial(row, self.center, self.scale, self.degree)
                for row in self.coefficients]

    def evaluate(self, points):
        """Values (n, N) and gradients (n, N, d) of every member."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        M, dM = _monomials((x - self.center) / self.scale, self.degree, True)
        values = M @ self.coefficients.T
        grads = np.einsum("qsd,ns->qnd", dM, self.coefficients) / self.scale
        return values, grads

    def coordinates(self, poly: LocalPolynomial) -> np.ndarray:
        """Least-squares coefficients of ``poly`` in this basis."""
        lam, *_ = np.linalg.lstsq(self.coefficients.T, poly.coefficients, rcond=None)
        return lam


def evaluate(basis: LocalBasis, points):
    return basis.evaluate(points)


class BasisSet:
    """Bases for all elements of a mesh, stored as stacked arrays.

    ``coefficients`` has shape (E, N, S); every element has the same kind,
    degree and dimension N. Indexing yields :class:`LocalBasis` views.
    """

    def __init__(self, coefficients, centers, scales, degree: int, kind: str):
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.centers = np.asarray(centers, dtype=float)
        self.scales = np.asarray(scales, dtype=float)
        self.degree, self.kind = degree, kind
        for a in (self.coefficients, self.centers, self.scales):
            a.setflags(write=False)

    def __len__(self):
        return len(self.coefficients)

    def __getitem__(self, t) -> LocalBasis:
        return LocalBasis(self.coefficients[t], self.centers[t], float(self.scales[t]),
                          self.degree, self.kind)

    def __iter__(self):
        return (self[t] for t in range(len(self)))

    @property
    def local_dimension(self) -> int:
        return self.coefficients.shape[1]

    @property
    def n_dofs(self) -> int:
        return len(self) * self.local_dimension

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(len(self) + 1) * self.local_dimension

    def evaluate(self, points, elements=None, with_grad=True):
        """Values (m, Q, N) and gradients (m, Q, N, d) at per-element points.

        ``points`` has shape (m, Q, d) and belongs to ``elements`` (default:
        all elements in order).
        """
        el = np.arange(len(self)) if elements is None else np.asarray(elements)
        c = self.coefficients[el]
        h = self.scales[el]
        y = (points - self.centers[el][:, None, :]) / h[:, None, None]
        M, dM = _monomials(y, self.degree, with_grad)
        values = np.einsum("eqs,ens->eqn", M, c)
        if not with_grad:
            return values, None
        grads = np.einsum("eqsd,ens->eqnd", dM, c) / h[:, None, None, None]
        return values, grads


# full polynomial space ----------------------------------------------------------

def _centers_scales(mesh_or_element):
    if hasattr(mesh_or_element, "barycentres"):
        return mesh_or_element.barycentres, mesh_or_element.diameters
    return (np.asarray(mesh_or_element.barycentre)[None],
            np.array([mesh_or_element.diameter]))


def build_full_poly_basis(element, p: int) -> LocalBasis:
    """Unit scaled monomials spanning all polynomials of degree <= p."""
    return build_full_poly_bases(element, p)[0]


def build_full_poly_bases(mesh, p: int) -> BasisSet:
    centers, scales = _centers_scales(mesh)
    S = mi.n_monomials(centers.shape[1], p)
    coeffs = np.broadcast_to(np.eye(S), (len(centers), S, S)).copy()
    return BasisSet(coeffs, centers, scales, p, FULL)


# quasi-Trefftz recurrence ------------------------------------------------------------

@dataclass(frozen=True)
class _Term:
    comp: tuple          # ('K', j, m) | ('beta', j) | ('sigma',)
    ell: int             # position of ell in the comp's derivative table
    src: int             # position of the coefficient read
    factor: Fraction
    hpow: int


@lru_cache(maxsize=None)
def recurrence_stencil(d: int, p: int):
    """Steps (target position, terms) of the coefficient recurrence.

    Solving D^i(L v)(x_T) = 0 for the coefficient of i + 2e_1 gives

        a_{i+2e1} = 1/K11(x_T) * sum_terms factor * D^ell c(x_T) * h^hpow * a_src

    with the exact rational ``factor`` and power ``hpow`` fixed per term.
    Steps come in algorithm-diagonal order over i (|i| <= p - 2).
    """
    pos = mi.index_map(d, p)
    e = [mi.unit(d, j) for j in range(d)]
    e1x2 = mi.add(e[0], e[0])
    kb_pos = mi.index_map(d, max(p - 1, 1))
    s_pos = mi.index_map(d, max(p - 2, 0))
    steps = []
    for i in mi.enumerate_up_to(d, p - 2, mi.DIAGONAL):
        target = mi.add(i, e1x2)
        denom = mi.factorial(target)
        terms = []
        for j in range(d):
            ipj = mi.add(i, e[j])
            fij = mi.factorial(ipj)
            for ell in mi.lower_set(ipj):
                base = Fraction(fij, mi.factorial(ell) * denom)
                rest = mi.sub(ipj, ell)
                for m in range(d):
                    if j == 0 and m == 0 and not any(ell):
                        continue
                    mult = i[m] + (1 if j == m else 0) - ell[m] + 1
                    terms.append(_Term(("K", j, m), kb_pos[ell], pos[mi.add(rest, e[m])],
                                       -base * mult, sum(ell)))
                terms.append(_Term(("beta", j), kb_pos[ell], pos[rest], base, sum(ell) + 1))
        fi = mi.factorial(i)
        for ell in mi.lower_set(i):
            terms.append(_Term(("sigma",), s_pos[ell], pos[mi.sub(i, ell)],
                               Fraction(fi, mi.factorial(ell) * denom), sum(ell) + 2))
        steps.append((pos[target], tuple(terms)))
    return tuple(steps)


def cauchy_data(d: int, p: int) -> np.ndarray:
    """Unit Cauchy data, shape (S, N): first the k1 = 0 slice (degree <= p in
    the remaining variables), then the k1 = 1 slice (degree <= p - 1)."""
    pos = mi.index_map(d, p)
    cols = []
    for k1, q in ((0, p), (1, p - 1)):
        if q < 0:
            continue
        rest = mi.enumerate_up_to(d - 1, q) if d > 1 else ((),)
        cols.extend(pos[(k1,) + r] for r in rest)
    out = np.zeros((len(pos), len(cols)))
    out[cols, np.arange(len(cols))] = 1.0
    return out


def coefficient_tables(coeffs: CoefficientField, centers, p: int) -> dict:
    """D^ell of every declared nonzero coefficient entry at the centers.

    K and beta need |ell| <= max(p-1, 1), sigma |ell| <= max(p-2, 0).
    """
    coeffs.check_orders(p)
    kb, s = max(p - 1, 1), max(p - 2, 0)
    tables = {}
    for comp, f in coeffs.entries():
        order = s if comp[0] == "sigma" else kb
        try:
            tables[comp] = f.derivative_table(order, centers)
        except OrderTooHigh as exc:
            raise OracleOrderTooLow(str(exc)) from None
    return tables


def run_recurrence(d: int, p: int, tables: dict, scales, k11, cauchy, exact=False):
    """Fill all coefficients with k1 >= 2 from the Cauchy slices.

    ``tables[comp]`` has shape (E, S_order); ``scales`` and ``k11`` shape (E,);
    ``cauchy`` shape (S, N). Returns coefficients of shape (E, S, N). With
    ``exact=True`` all arithmetic uses the object dtype, so Fraction inputs
    give exact rational results.
    """
    E = len(scales)
    if exact:
        a = np.empty((E,) + cauchy.shape, dtype=object)
        a[...] = np.vectorize(Fraction, otypes=[object])(np.asarray(cauchy))[None]
        conv = lambda f: f  # noqa: E731
    else:
        a = np.broadcast_to(np.asarray(cauchy, dtype=float), (E,) + cauchy.shape).copy()
        conv = float
    hpows = {}

    def hp(k):
        if k not in hpows:
            hpows[k] = np.asarray(scales) ** k if not exact else np.array(
                [s ** k for s in scales], dtype=object)
        return hpows[k]

    for target, terms in recurrence_stencil(d, p):
        acc = 0
        for t in terms:
            tab = tables.get(t.comp)
            if tab is None:
                continue
            w = conv(t.factor) * tab[:, t.ell] * hp(t.hpow)
            acc = acc + w[:, None] * a[:, t.src, :]
        a[:, target, :] = acc / np.asarray(k11)[:, None]
    return a


def build_qt_bases(mesh, coeffs: CoefficientField, p: int) -> BasisSet:
    """Quasi-Trefftz bases on every element (or on a single Element)."""
    centers, scales = _centers_scales(mesh)
    d = centers.shape[1]
    if coeffs.d != d:
        raise ContractError("coefficient dimension does not match the mesh")
    if p < 2:
        full = build_full_poly_bases(mesh, p)
        return BasisSet(full.coefficients, centers, scales, p, QT)
    tables = coefficient_tables(coeffs, centers, p)
    k11 = tables[("K", 0, 0)][:, 0] if ("K", 0, 0) in tables else np.zeros(len(centers))
    if np.any(k11 <= 0):
        raise SingularLeadingCoefficient(
            f"K_11(x_T) = {k11.min():.3e} <= 0; the recurrence divides by it")
    a = run_recurrence(d, p, tables, scales, k11, cauchy_data(d, p))
    return BasisSet(np.transpose(a, (0, 2, 1)), centers, scales, p, QT)


def build_qt_basis(element, coeffs: CoefficientField, p: int) -> LocalBasis:
    """Quasi-Trefftz basis on one element (see :func:`build_qt_bases`)."""
    return build_qt_bases(element, coeffs, p)[0]


def build_bases(mesh, coeffs: CoefficientField, p: int, space: str = "qt") -> BasisSet:
    if space in ("qt", QT):
        return build_qt_bases(mesh, coeffs, p)
    if space in ("full", FULL):
        return build_full_poly_bases(mesh, p)
    raise ContractError(f"unknown space {space!r}")


# residual and Taylor polynomials ------------------------------------------------------

def operator_derivatives(basis: LocalBasis, coeffs: CoefficientField) -> np.ndarray:
    """Scaled D^i(L b_J)(x_T) for |i| <= p - 2, shape (N, n_i).

    Uses the Leibniz expansion of L with the exact derivatives
    D^k b(x_T) = a_k k! / h^|k| and the coefficient oracle; each entry is
    multiplied by h^(|i|+2) / (i + 2e_1)!.
    """
    d, p, h = len(basis.center), basis.degree, basis.scale
    if p < 2:
        return np.zeros((basis.dimension, 0))
    pos = mi.index_map(d, p)
    x = basis.center
    e = [mi.unit(d, j) for j in range(d)]

    def D(k):  # D^k b_J(x_T) for all J
        k = tuple(k)
        if sum(k) > p:
            return np.zeros(basis.dimension)
        return basis.coefficients[:, pos[k]] * mi.factorial(k) / h ** sum(k)

    cache = {}

    def coef(comp, ell):
        key = (comp, ell)
        if key not in cache:
            cache[key] = float(coeffs.derivative(comp, ell, x))
        return cache[key]

    names_k = [[f"K{j + 1}{m + 1}" for m in range(d)] for j in range(d)]
    out = []
    for i in mi.enumerate_up_to(d, p - 2):
        val = np.zeros(basis.dimension)
        for j in range(d):
            ipj = mi.add(i, e[j])
            for ell in mi.lower_set(ipj):
                b = mi.binomial(ipj, ell)
                rest = mi.sub(ipj, ell)
                for m in range(d):
                    c = coef(names_k[j][m], ell)
                    if c:
                        val -= b * c * D(mi.add(rest, e[m]))
                c = coef(f"beta{j + 1}", ell)
                if c:
                    val += b * c * D(rest)
        for ell in mi.lower_set(i):
            c = coef("sigma", ell)
            if c:
                val += mi.binomial(i, ell) * c * D(mi.sub(i, ell))
        scale = h ** (sum(i) + 2) / mi.factorial(mi.add(i, mi.add(e[0], e[0])))
        out.append(val * scale)
    return np.column_stack(out)


def qt_residual(basis: LocalBasis, coeffs: CoefficientField) -> float:
    """max over members and |i| <= p-2 of the scaled |D^i(L b_J)(x_T)|."""
    r = operator_derivatives(basis, coeffs)
    return float(np.abs(r).max()) if r.size else 0.0


def taylor_of(u, element, p: int) -> LocalPolynomial:
    """Degree-p Taylor polynomial of ``u`` at the element barycentre, with
    scaled-monomial coefficients h^|j| D^j u(x_T) / j!."""
    center = np.asarray(element.barycentre, dtype=float)
    h = float(element.diameter)
    d = len(center)
    coeffs = []
    for j in mi.enumerate_up_to(d, p):
        try:
            dj = u.derivative(j, center)
        except OrderTooHigh as exc:
            raise OracleOrderTooLow(str(exc)) from None
        coeffs.append(h ** sum(j) * float(dj) / mi.factorial(j))
    return LocalPolynomial(np.array(coeffs), center, h, p)


def dump_basis(basis: LocalBasis) -> str:
    """Text table, one line per (J, k, a_k)."""
    d = len(basis.center)
    idx = mi.enumerate_up_to(d, basis.degree)
    buf = io.StringIO()
    for J, row in enumerate(basis.coefficients):
        for k, a in zip(idx, row):
            buf.write(f"{J} {' '.join(map(str, k))} {float(a)!r}\n")
    return buf.getvalue()


def s_dimension_identity(d: int, p: int) -> bool:
    """S_{d,p} - S_{d,p-2} == N_{d,p} (independent dimension count)."""
    return comb(p + d, d) - (comb(p - 2 + d, d) if p >= 2 else 0) == qt_dimension(d, p)
