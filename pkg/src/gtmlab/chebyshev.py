"""Chebyshev polynomials of the second kind and unimodular 2x2 matrices.

The family used throughout is ``d_0 = 0``, ``d_1 = 1``,
``d_{k+1}(t) = t d_k(t) - d_{k-1}(t)``, so that ``d_k(2 cos th) =
sin(k th) / sin(th)``.  (This is ``U_{k-1}(t/2)`` in the usual notation.)
"""

from __future__ import annotations

from typing import NamedTuple

import gmpy2
from gmpy2 import mpfr

from .errors import NotUnimodularError
from .precision import hp

__all__ = [
    "Mat2",
    "cheb_eval",
    "cheb_deriv",
    "cheb_jet",
    "cheb_table",
    "identity",
    "matpow_binary",
    "sl2_pow",
    "transfer_matrix",
]


def cheb_jet(k: int, t):
    """Return ``(d_k, d_k', d_{k-1}, d_{k-1}')`` at ``t`` in one sweep.

    ``d_{-1}`` is taken as ``-1`` (it continues the recurrence backwards),
    so the tuple is defined for ``k = 0`` as well.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    prev, cur = mpfr(-1), mpfr(0)
    dprev, dcur = mpfr(0), mpfr(0)
    for _ in range(k):
        # d_{j+1}' = d_j + t d_j' - d_{j-1}'
        prev, cur, dprev, dcur = (
            cur, t * cur - prev,
            dcur, cur + t * dcur - dprev,
        )
    return cur, dcur, prev, dprev


def cheb_table(kmax: int, t):
    """Lists ``[d_0..d_kmax]`` and ``[d_0'..d_kmax']`` at ``t``."""
    t = hp(t)
    vals, ders = [mpfr(0)], [mpfr(0)]
    prev, dprev = mpfr(-1), mpfr(0)
    for _ in range(kmax):
        cur, dcur = vals[-1], ders[-1]
        vals.append(t * cur - prev)
        ders.append(cur + t * dcur - dprev)
        prev, dprev = cur, dcur
    return vals, ders


def cheb_eval(k: int, t):
    """``d_k(t)`` by the three-term recurrence."""
    return cheb_jet(k, hp(t))[0]


def cheb_deriv(k: int, t):
    """``d_k'(t)`` by the differentiated recurrence (valid for every real t)."""
    return cheb_jet(k, hp(t))[1]


class Mat2(NamedTuple):
    a11: object
    a12: object
    a21: object
    a22: object

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a11 * other.a11 + self.a12 * other.a21,
            self.a11 * other.a12 + self.a12 * other.a22,
            self.a21 * other.a11 + self.a22 * other.a21,
            self.a21 * other.a12 + self.a22 * other.a22,
        )

    @property
    def trace(self):
        return self.a11 + self.a22

    @property
    def det(self):
        return self.a11 * self.a22 - self.a12 * self.a21

    def scale(self, c) -> "Mat2":
        return Mat2(c * self.a11, c * self.a12, c * self.a21, c * self.a22)

    def __sub__(self, other: "Mat2") -> "Mat2":
        return Mat2(*(p - q for p, q in zip(self, other)))

    def max_abs(self):
        return max(abs(v) for v in self)

    def det_defect(self):
        """|det - 1| relative to the size of the products that cancel in det."""
        scale = max(mpfr(1), abs(self.a11 * self.a22), abs(self.a12 * self.a21))
        return abs(self.det - 1) / scale


def identity() -> Mat2:
    return Mat2(mpfr(1), mpfr(0), mpfr(0), mpfr(1))


def transfer_matrix(t, v) -> Mat2:
    """One-site transfer matrix ``[[t - v, -1], [1, 0]]``."""
    return Mat2(t - v, mpfr(-1), mpfr(1), mpfr(0))


def matpow_binary(A: Mat2, k: int) -> Mat2:
    result = identity()
    base = A
    while k:
        if k & 1:
            result = result @ base
        k >>= 1
        if k:
            base = base @ base
    return result


def sl2_pow(A: Mat2, k: int, check: bool = True) -> Mat2:
    """``A**k`` for unimodular ``A`` via ``d_k(Tr A) A - d_{k-1}(Tr A) I``.

    Falls back to binary exponentiation when ``|Tr A| > 4``, where d_k grows
    like ``|Tr A|**(k-1)`` and the Cayley-Hamilton form loses digits.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if check:
        prec = gmpy2.get_context().precision
        if A.det_defect() > mpfr(2) ** (8 - prec):
            raise NotUnimodularError(f"det A = {A.det} is not 1")
    tr = A.trace
    if abs(tr) > 4:
        return matpow_binary(A, k)
    dk, _, dk1, _ = cheb_jet(k, tr)
    return Mat2(dk * A.a11 - dk1, dk * A.a12, dk * A.a21, dk * A.a22 - dk1)
