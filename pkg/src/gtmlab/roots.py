"""Bracketed root finding at MPFR precision."""

from __future__ import annotations

import gmpy2
from gmpy2 import mpfr

from .errors import PrecisionExhaustedError

__all__ = ["BracketError", "bisect_sign", "solve_bracketed"]


class BracketError(PrecisionExhaustedError):
    """The endpoint values do not straddle the target."""


def _eps(t):
    prec = gmpy2.get_context().precision
    return mpfr(2) ** (4 - prec) * max(mpfr(1), abs(t))


def solve_bracketed(f, lo, hi, target=0, flo=None, fhi=None):
    """Root of ``f(t) = target`` in ``[lo, hi]``, Newton safeguarded by bisection.

    ``f`` returns ``(value, derivative)``.  ``flo``/``fhi`` may pass values
    already known at the endpoints.  The bracket must show a sign change;
    if it holds several crossings one of them is returned.
    """
    if lo > hi:
        lo, hi = hi, lo
        flo, fhi = fhi, flo
    glo = (f(lo)[0] if flo is None else flo) - target
    ghi = (f(hi)[0] if fhi is None else fhi) - target
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    if (glo > 0) == (ghi > 0):
        raise BracketError(f"no sign change of f - {target} on [{lo}, {hi}]")
    # neg/pos: ends where f - target is negative/positive
    neg, pos = (lo, hi) if glo < 0 else (hi, lo)
    t = lo + (hi - lo) * glo / (glo - ghi)
    if not (lo < t < hi):
        t = (lo + hi) / 2
    prev_step = abs(hi - lo)
    prec = gmpy2.get_context().precision
    for _ in range(4 * prec + 64):
        g, dg = f(t)
        g -= target
        if g == 0:
            return t
        if g < 0:
            neg = t
        else:
            pos = t
        a, b = (neg, pos) if neg < pos else (pos, neg)
        if b - a <= _eps(t):
            return t
        step = g / dg if dg != 0 else None
        cand = t - step if step is not None else None
        if cand is None or not (a < cand < b) or abs(step) > prev_step / 2:
            cand = (a + b) / 2
            step = t - cand
        prev_step = abs(step)
        if abs(step) <= _eps(t):
            return cand
        t = cand
    raise PrecisionExhaustedError("root iteration did not converge")


def bisect_sign(g, lo, hi, iterations=None):
    """Bisection on the sign of ``g`` (a plain-valued function) over ``[lo, hi]``."""
    glo = g(lo)
    if (glo > 0) == (g(hi) > 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]")
    prec = gmpy2.get_context().precision
    for _ in range(iterations or prec + 64):
        mid = (lo + hi) / 2
        if mid == lo or mid == hi or hi - lo <= _eps(mid):
            break
        gm = g(mid)
        if gm == 0:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return (lo + hi) / 2
