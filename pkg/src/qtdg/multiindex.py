"""Multi-index arithmetic and enumeration.

Multi-indices are plain tuples of non-negative ints. All factorial and
binomial arithmetic is exact (Python ints / Fractions).
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import comb, factorial as _ifact, prod
from typing import Iterator, Sequence

from .errors import ContractError

MultiIndex = tuple[int, ...]

GRADED_LEX = "graded-lexicographic"
DIAGONAL = "algorithm-diagonal"


def order(i: Sequence[int]) -> int:
    """Length |i| of a multi-index."""
    return sum(i)


def leq(i: Sequence[int], j: Sequence[int]) -> bool:
    """Entry-wise partial order ``i <= j``."""
    return all(a <= b for a, b in zip(i, j))


def unit(d: int, k: int) -> MultiIndex:
    """Canonical unit multi-index e_k (0-based ``k``)."""
    return tuple(1 if m == k else 0 for m in range(d))


def add(i: Sequence[int], j: Sequence[int]) -> MultiIndex:
    return tuple(a + b for a, b in zip(i, j))


def sub(i: Sequence[int], j: Sequence[int]) -> MultiIndex:
    return tuple(a - b for a, b in zip(i, j))


def factorial(i: Sequence[int]) -> int:
    """i! = product of the entry factorials."""
    return prod(_ifact(a) for a in i)


def binomial(i: Sequence[int], j: Sequence[int]) -> int:
    """Multi-index binomial coefficient, requires ``j <= i``."""
    if len(i) != len(j) or not leq(j, i):
        raise ContractError(f"binomial({tuple(i)}, {tuple(j)}) needs j <= i")
    return prod(comb(a, b) for a, b in zip(i, j))


def n_monomials(d: int, p: int) -> int:
    """S_{d,p}: dimension of polynomials of degree <= p in d variables."""
    if p < 0:
        return 0
    return comb(p + d, d)


def lower_set(i: Sequence[int]) -> Iterator[MultiIndex]:
    """All multi-indices l <= i, in lexicographic order."""
    return product(*(range(a + 1) for a in i))


def _graded_key(k: MultiIndex) -> tuple:
    # degree first, then larger leading entries first: (1,0) before (0,1)
    return (sum(k), tuple(-a for a in k))


def _compositions(d: int, r: int) -> Iterator[MultiIndex]:
    """All multi-indices of length d with |k| = r."""
    if d == 1:
        yield (r,)
        return
    for first in range(r, -1, -1):
        for rest in _compositions(d - 1, r - first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def enumerate_up_to(d: int, p: int, order: str = GRADED_LEX) -> tuple[MultiIndex, ...]:
    """Every multi-index k with |k| <= p exactly once.

    ``graded-lexicographic`` (the canonical storage order) sorts by degree and
    then by descending leading entries, so d=2, p=1 gives (0,0), (1,0), (0,1).
    ``algorithm-diagonal`` walks diagonals |k| = r upwards and, within each
    diagonal, increasing k_1; ties in the remaining entries are graded-lex.
    """
    if d < 1 or p < 0:
        raise ContractError(f"enumerate_up_to needs d >= 1, p >= 0 (got d={d}, p={p})")
    if order == GRADED_LEX:
        out = []
        for r in range(p + 1):
            out.extend(_compositions(d, r))
        return tuple(out)
    if order == DIAGONAL:
        out = []
        for r in range(p + 1):
            for k1 in range(r + 1):
                if d == 1:
                    if k1 == r:
                        out.append((r,))
                    continue
                out.extend((k1,) + rest for rest in _compositions(d - 1, r - k1))
        return tuple(out)
    raise ContractError(f"unknown enumeration order {order!r}")


@lru_cache(maxsize=None)
def index_map(d: int, p: int) -> dict[MultiIndex, int]:
    """Position of each multi-index in the canonical order."""
    return {k: n for n, k in enumerate(enumerate_up_to(d, p))}


def inverse_factorial_sum(d: int, k: int) -> Fraction:
    """Sum of 1/i! over |i| = k, which equals d**k / k!."""
    return sum((Fraction(1, factorial(i)) for i in _compositions(d, k)), Fraction(0))
