"""Scalar fields with exact derivative oracles.

Every field is vectorized over points: ``f(x)`` takes an array of shape
(n, d) (or a single point of shape (d,)) and ``f.derivative(ell, x)`` returns
D^ell f at those points. Derivatives are closed-form; nothing here uses
automatic or numerical differentiation.
"""
from __future__ import annotations

from math import factorial as _ifact
from typing import Mapping, Sequence

import numpy as np

from . import multiindex as mi
from .errors import OrderTooHigh


def _as_points(x, d: int):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(1, d) if single else x.reshape(-1, d)
    return pts, single


def _power(pts: np.ndarray, k: Sequence[int]) -> np.ndarray:
    out = np.ones(len(pts))
    for m, e in enumerate(k):
        if e:
            out = out * pts[:, m] ** e
    return out


class ScalarFunction:
    """Base class. Subclasses implement ``_eval`` and ``_derivative``.

    ``max_order`` is the declared smoothness (``None`` for analytic fields);
    asking for a higher derivative raises :class:`OrderTooHigh`.
    """

    d: int
    max_order: int | None = None
    is_zero = False

    def __call__(self, x):
        pts, single = _as_points(x, self.d)
        val = self._eval(pts)
        return val[0] if single else val

    def derivative(self, ell: Sequence[int], x):
        ell = tuple(int(a) for a in ell)
        if len(ell) != self.d:
            raise OrderTooHigh(f"multi-index {ell} has wrong length for d={self.d}")
        if self.max_order is not None and sum(ell) > self.max_order:
            raise OrderTooHigh(
                f"D^{ell} requested but field is only declared C^{self.max_order}")
        pts, single = _as_points(x, self.d)
        val = self._derivative(ell, pts) if any(ell) else self._eval(pts)
        return val[0] if single else val

    def derivative_table(self, order: int, x) -> np.ndarray:
        """D^ell f(x) for every |ell| <= order, canonical order, shape (n, S)."""
        pts, _ = _as_points(x, self.d)
        idx = mi.enumerate_up_to(self.d, order)
        if self.max_order is not None and order > self.max_order:
            raise OrderTooHigh(f"order {order} exceeds declared C^{self.max_order}")
        return np.column_stack([self.derivative(ell, pts) for ell in idx])

    def _eval(self, pts):
        raise NotImplementedError

    def _derivative(self, ell, pts):
        raise NotImplementedError


class Constant(ScalarFunction):
    def __init__(self, value: float, d: int):
        self.value, self.d = float(value), d
        self.is_zero = self.value == 0.0

    def _eval(self, pts):
        return np.full(len(pts), self.value)

    def _derivative(self, ell, pts):
        return np.zeros(len(pts))

    def __repr__(self):
        return f"Constant({self.value}, d={self.d})"


class Polynomial(ScalarFunction):
    """Sum of c_k x^k over a sparse set of multi-indices k."""

    def __init__(self, coeffs: Mapping[tuple, float], d: int):
        self.d = d
        self.coeffs = {tuple(k): float(c) for k, c in coeffs.items() if c != 0}
        for k in self.coeffs:
            if len(k) != d or min(k) < 0:
                raise ValueError(f"bad exponent {k} for d={d}")
        self.is_zero = not self.coeffs

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.coeffs), default=0)

    def _eval(self, pts):
        out = np.zeros(len(pts))
        for k, c in self.coeffs.items():
            out += c * _power(pts, k)
        return out

    def _derivative(self, ell, pts):
        out = np.zeros(len(pts))
        for k, c in self.coeffs.items():
            if mi.leq(ell, k):
                fall = 1
                for a, b in zip(k, ell):
                    fall *= _ifact(a) // _ifact(a - b)
                out += c * fall * _power(pts, mi.sub(k, ell))
        return out

    def taylor_coefficients(self, pts) -> dict:
        """D^j q(x)/j! for all j up to the degree, each an array over points."""
        out = {}
        for j in mi.enumerate_up_to(self.d, self.degree):
            out[j] = self._derivative(j, pts) / mi.factorial(j) if any(j) else self._eval(pts)
        return out

    def __repr__(self):
        return f"Polynomial({self.coeffs}, d={self.d})"


class Exponential(ScalarFunction):
    """c * exp(w . x)."""

    def __init__(self, scale: float, rate: Sequence[float]):
        self.scale = float(scale)
        self.rate = np.asarray(rate, dtype=float)
        self.d = len(self.rate)

    def _eval(self, pts):
        return self.scale * np.exp(pts @ self.rate)

    def _derivative(self, ell, pts):
        return np.prod(self.rate ** np.asarray(ell)) * self._eval(pts)

    def __repr__(self):
        return f"Exponential({self.scale}, rate={self.rate.tolist()})"


class AffineReciprocal(ScalarFunction):
    """c / (w . x + b); D^ell = c (-1)^|ell| |ell|! w^ell / (w . x + b)^(|ell|+1)."""

    def __init__(self, scale: float, rate: Sequence[float], shift: float):
        self.scale, self.shift = float(scale), float(shift)
        self.rate = np.asarray(rate, dtype=float)
        self.d = len(self.rate)

    def _eval(self, pts):
        return self.scale / (pts @ self.rate + self.shift)

    def _derivative(self, ell, pts):
        n = sum(ell)
        s = pts @ self.rate + self.shift
        return (self.scale * (-1) ** n * _ifact(n)
                * np.prod(self.rate ** np.asarray(ell)) / s ** (n + 1))

    def __repr__(self):
        return f"AffineReciprocal({self.scale}, rate={self.rate.tolist()}, shift={self.shift})"


class ReciprocalPolynomial(ScalarFunction):
    """c / q(x) for a polynomial q that does not vanish on the domain.

    Derivatives come from the power series of 1/q about each point, obtained
    by the Cauchy-product recurrence s_k = -(1/t_0) sum_{0<j<=k} t_j s_{k-j}
    where t_j are the Taylor coefficients of q; then D^ell f = c ell! s_ell.
    """

    def __init__(self, scale: float, denominator: Polynomial):
        self.scale = float(scale)
        self.q = denominator
        self.d = denominator.d

    def _eval(self, pts):
        return self.scale / self.q._eval(pts)

    def _series(self, order: int, pts) -> dict:
        t = self.q.taylor_coefficients(pts)
        inv_t0 = 1.0 / t[(0,) * self.d]
        s = {}
        for k in mi.enumerate_up_to(self.d, order):
            if not any(k):
                s[k] = inv_t0
                continue
            acc = np.zeros(len(pts))
            for j, tj in t.items():
                if any(j) and mi.leq(j, k):
                    acc = acc + tj * s[mi.sub(k, j)]
            s[k] = -inv_t0 * acc
        return s

    def _derivative(self, ell, pts):
        return self.scale * mi.factorial(ell) * self._series(sum(ell), pts)[ell]

    def derivative_table(self, order, x):
        pts, _ = _as_points(x, self.d)
        s = self._series(order, pts)
        return np.column_stack([self.scale * mi.factorial(k) * s[k]
                                for k in mi.enumerate_up_to(self.d, order)])

    def __repr__(self):
        return f"ReciprocalPolynomial({self.scale}, {self.q!r})"


class Scaled(ScalarFunction):
    """c * f for another field f."""

    def __init__(self, scale: float, base: ScalarFunction):
        self.scale, self.base, self.d = float(scale), base, base.d
        self.max_order = base.max_order
        self.is_zero = base.is_zero or self.scale == 0.0

    def _eval(self, pts):
        return self.scale * self.base._eval(pts)

    def _derivative(self, ell, pts):
        return self.scale * self.base._derivative(ell, pts)

    def __repr__(self):
        return f"Scaled({self.scale}, {self.base!r})"
