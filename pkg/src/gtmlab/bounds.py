"""Closed-form branching numbers, growth rates and the dimension lower bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from .errors import ConfigError
from .precision import format_hp, working_context

__all__ = [
    "BOUNDS_PRECISION",
    "DimensionReport",
    "gamma_m",
    "gamma_m_float",
    "lambda_m",
    "selection_window",
    "theorem_bound",
    "verify_gamma_recursion",
    "weak_ceiling",
]

BOUNDS_PRECISION = 128


def _check_m(m) -> int:
    if isinstance(m, bool) or int(m) != m or m < 2:
        raise ConfigError(f"m must be an integer >= 2, got {m!r}")
    return int(m)


def lambda_m(m: int) -> int:
    """Number of children each SNS interval spawns."""
    m = _check_m(m)
    if m == 2:
        return 2
    return {0: m, 1: m - 3, 2: m - 2, 3: m - 1}[m % 4]


def selection_window(m: int) -> tuple[int, int]:
    """``(ceil(m/4), floor(3m/4))``, the range of j whose tangencies are used."""
    return -(-m // 4), (3 * m) // 4


def gamma_m(m: int):
    """Growth rate of |x_n'| along the SNS, at 128 bits."""
    m = _check_m(m)
    with working_context(BOUNDS_PRECISION):
        if m == 2:
            return 8 * (5 + gmpy2.sqrt(mpfr(29)))
        return 1 + 32 * mpfr(m) + gmpy2.sqrt(1 + 192 * mpfr(m) + 1024 * mpfr(m) ** 2)


def gamma_m_float(m: int) -> float:
    return float(gamma_m(m))


@dataclass
class DimensionReport:
    m: int
    lambda_m: int
    gamma_m: object
    bound: object
    weak_bound: object
    empirical: dict | None = field(default=None)

    def to_dict(self) -> dict:
        out = {
            "m": self.m,
            "lambda_m": self.lambda_m,
            "gamma_m": format_hp(self.gamma_m),
            "bound": format_hp(self.bound),
            "weak_bound": format_hp(self.weak_bound),
        }
        if self.empirical is not None:
            out["empirical"] = self.empirical
        return out


def weak_ceiling(m: int):
    """Simple upper bound on gamma_m used by the weak dimension bound."""
    return mpfr(88) if m == 2 else 64 * mpfr(m) + 4


def theorem_bound(m: int) -> DimensionReport:
    """``log Lambda_m / log gamma_m`` and the weaker ``log Lambda_m / log(ceiling)``.

    The ceiling on gamma_m is 64m+4, except for m = 2 where the growth
    system is different and the ceiling is 88.
    """
    m = _check_m(m)
    lam = lambda_m(m)
    gam = gamma_m(m)
    with working_context(BOUNDS_PRECISION):
        log_lam = gmpy2.log(mpfr(lam))
        bound = log_lam / gmpy2.log(gam)
        weak = log_lam / gmpy2.log(weak_ceiling(m))
    return DimensionReport(m=m, lambda_m=lam, gamma_m=gam, bound=bound, weak_bound=weak)


def verify_gamma_recursion(m: int, iterations: int = 200, rtol: float = 1e-8) -> bool:
    """Iterate the derivative-growth system from (1, 1); check the ratio tends to gamma_m.

    m > 2 uses the coefficient matrix [[64m, 2], [128m, 2]]; m = 2 the
    scalar recurrence a_{k+1} = 80 a_k + 256 a_{k-1}.
    """
    return abs(gamma_growth_ratio(m, iterations) / gamma_m(m) - 1) <= rtol


def gamma_growth_ratio(m: int, iterations: int = 200):
    m = _check_m(m)
    with working_context(BOUNDS_PRECISION):
        prev, cur = mpfr(1), mpfr(1)
        ratio = mpfr(0)
        for _ in range(iterations):
            if m == 2:
                nxt = 80 * cur + 256 * prev
                ratio = nxt / cur
                prev, cur = cur / nxt, mpfr(1)
            else:
                # (x, y) -> (64m x + 2y, 128m x + 2y), normalised by x
                x, y = 64 * m * cur + 2 * prev, 128 * m * cur + 2 * prev
                ratio = x / cur
                cur, prev = mpfr(1), y / x
        return ratio


def second_eigenvalue(m: int) -> float:
    """Smaller root of the characteristic polynomial (negative for every m >= 2)."""
    m = _check_m(m)
    if m == 2:
        return 40 - math.sqrt(1856)
    return 1 + 32 * m - math.sqrt(1 + 192 * m + 1024 * m * m)
