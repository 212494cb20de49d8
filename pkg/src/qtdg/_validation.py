"""Input checks shared by the estimator and the command line."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .assembly import VARIANTS
from .errors import ContractError

SPACES = ("qt", "full")


def check_degree(p) -> int:
    if isinstance(p, bool) or not isinstance(p, numbers.Integral) or p < 0:
        raise ContractError(f"degree must be a non-negative integer, got {p!r}")
    return int(p)


def check_epsilon(eps) -> int:
    """Accepts -1/0/1 or the names sipg/iipg/nipg."""
    if isinstance(eps, str):
        key = eps.strip().lower()
        if key in VARIANTS:
            return VARIANTS[key]
        try:
            eps = int(key)
        except ValueError:
            raise ContractError(f"unknown scheme variant {eps!r}") from None
    if isinstance(eps, numbers.Real) and float(eps) in (-1.0, 0.0, 1.0):
        return int(eps)
    raise ContractError(f"epsilon must be -1, 0 or 1, got {eps!r}")


def check_space(space: str) -> str:
    if space not in SPACES:
        raise ContractError(f"space must be one of {SPACES}, got {space!r}")
    return space


def check_gamma(gamma):
    """A positive number, the string '8p2', or a mapping degree -> value."""
    if isinstance(gamma, str):
        if gamma.lower() in ("8p2", "eight_p_squared"):
            return "8p2"
        try:
            gamma = float(gamma)
        except ValueError:
            raise ContractError(f"bad gamma rule {gamma!r}") from None
    if isinstance(gamma, dict):
        table = {int(k): float(v) for k, v in gamma.items()}
        if any(v <= 0 for v in table.values()):
            raise ContractError("gamma table values must be positive")
        return table
    if isinstance(gamma, numbers.Real) and not isinstance(gamma, bool) and gamma > 0:
        return float(gamma)
    raise ContractError(f"gamma must be positive, '8p2' or a table, got {gamma!r}")


def gamma_for(rule, p: int) -> float:
    if rule == "8p2":
        return 8.0 * max(p, 1) ** 2
    if isinstance(rule, dict):
        if p not in rule:
            raise ContractError(f"gamma table has no entry for p={p}")
        return rule[p]
    return float(rule)


def check_levels(levels) -> list[int]:
    levels = [int(n) for n in levels]
    if not levels or any(n < 1 for n in levels):
        raise ContractError("mesh levels must be positive integers")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ContractError(f"mesh levels must increase strictly, got {levels}")
    return levels


def check_points(X, dim: int) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.shape[1] != dim:
        raise ContractError(f"points must have {dim} columns, got {X.shape[1]}")
    return X
