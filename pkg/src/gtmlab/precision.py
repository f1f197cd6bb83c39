"""High-precision reals on top of gmpy2's MPFR.

All arithmetic in the package runs on ``gmpy2.mpfr`` under whatever
context precision is active.  Public entry points take a *declared*
precision (what tolerances are measured against) and run internally at a
*working* precision that adds guard bits for the growth of the trace
polynomials with the level.
"""

from __future__ import annotations

import math
import os
from contextlib import contextmanager
from decimal import Decimal
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr

from .errors import ConfigError

__all__ = [
    "DEFAULT_PRECISION",
    "MIN_PRECISION",
    "default_precision",
    "exact_rational",
    "format_hp",
    "guard_bits",
    "hp",
    "tolerance",
    "working_context",
    "working_precision",
]

MIN_PRECISION = 64
DEFAULT_PRECISION = 128
SAFETY_BITS = 32


def default_precision() -> int:
    """Declared precision from ``GTM_PRECISION_BITS``, else 128."""
    raw = os.environ.get("GTM_PRECISION_BITS")
    if not raw:
        return DEFAULT_PRECISION
    try:
        bits = int(raw)
    except ValueError:
        raise ConfigError(f"GTM_PRECISION_BITS must be an integer, got {raw!r}")
    return check_precision(bits)


def check_precision(bits) -> int:
    bits = int(bits)
    if bits < MIN_PRECISION:
        raise ConfigError(f"precision must be >= {MIN_PRECISION} bits, got {bits}")
    return bits


def growth_rate(m: int) -> float:
    """Per-level growth used to size guard bits (gamma_m, or 64m+4 for m=1)."""
    if m >= 2:
        from .bounds import gamma_m_float

        return gamma_m_float(m)
    return 64.0 * m + 4.0


def guard_bits(m: int, level: int) -> int:
    return 2 * level * math.ceil(math.log2(growth_rate(m))) + SAFETY_BITS


def working_precision(precision: int, m: int, level: int) -> int:
    return precision + guard_bits(m, level)


@contextmanager
def working_context(bits: int):
    """Run the block with MPFR context precision ``bits``."""
    with gmpy2.context(gmpy2.get_context(), precision=int(bits)) as ctx:
        yield ctx


def exact_rational(value) -> Fraction:
    """Exact rational from a decimal string, int, float, Decimal or Fraction.

    Strings are parsed as decimals, never through a binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ConfigError("boolean is not a real number")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(Decimal(value.strip()))
        except Exception:
            raise ConfigError(f"not a decimal number: {value!r}")
    if isinstance(value, (float, Decimal)):
        if not math.isfinite(float(value)):
            raise ConfigError(f"not finite: {value!r}")
        return Fraction(value)
    if isinstance(value, type(mpfr(0))):
        return Fraction(*value.as_integer_ratio())
    raise ConfigError(f"cannot interpret {value!r} as a real number")


def hp(value):
    """Convert ``value`` to an mpfr at the active context precision."""
    if isinstance(value, type(mpfr(0))):
        return mpfr(value)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return mpfr(value)
    q = exact_rational(value)
    return mpfr(gmpy2.mpq(q.numerator, q.denominator))


def tolerance(precision: int, slack: int = 16):
    """``2**(slack - precision)`` as an mpfr."""
    return mpfr(2) ** (slack - int(precision))


def format_hp(x, bits: int | None = None) -> str:
    """Decimal string with enough digits to round-trip at ``bits`` (default: x's own)."""
    if not isinstance(x, type(mpfr(0))):
        x = mpfr(x, bits or DEFAULT_PRECISION)
    elif bits is not None and bits < x.precision:
        x = mpfr(x, bits)
    bits = x.precision
    digits = math.ceil(bits * math.log10(2)) + 1
    if gmpy2.is_zero(x):
        return "0"
    return format(x, f".{digits}g")
