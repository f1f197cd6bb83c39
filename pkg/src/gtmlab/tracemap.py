"""Trace-map orbit of the generalized Thue-Morse substitution.

For ``a -> a^m b^m``, ``b -> b^m a^m`` and coupling ``lam`` the level-n
transfer matrices obey ``M_{n+1} = N_n^m M_n^m``, ``N_{n+1} = M_n^m N_n^m``
with ``M_0, N_0`` the one-site matrices at potential ``+lam`` and
``-lam``.  We track ``x_n = Tr M_n``, ``y_n = Tr M_n N_n`` and their
t-derivatives.

From level 1 on ``Tr M_n = Tr N_n`` and the orbit follows

    x_{n+1} = d_m(x_n)^2 (y_n - 2) + 2
    y_{n+1} = d_{2m}(x_n)^2 (y_n - 2) + 2.

At level 0 the two traces differ (``t - lam`` and ``t + lam``), so the
first step uses the general two-trace expansion of ``Tr(A^p B^q)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from gmpy2 import mpfr

from .chebyshev import Mat2, cheb_jet, sl2_pow, transfer_matrix
from .errors import ConfigError, OracleCapExceeded, PrecisionExhaustedError
from .precision import exact_rational, hp

__all__ = [
    "DEFAULT_WORD_CAP",
    "ModelParams",
    "TraceJet",
    "initial_jet",
    "matrix_oracle",
    "step_jet",
    "substitution_word",
    "trace_eval",
    "word_oracle",
]

DEFAULT_WORD_CAP = 10**7


@dataclass(frozen=True)
class ModelParams:
    """Substitution exponent ``m`` and coupling ``lam`` (kept as an exact rational)."""

    m: int
    lam: Fraction

    def __post_init__(self):
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"m must be an integer >= 1, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        lam = exact_rational(self.lam)
        if lam <= 0:
            raise ConfigError(f"lambda must be > 0, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)

    @property
    def lam_hp(self):
        """Coupling as an mpfr at the active precision."""
        return hp(self.lam)


@dataclass(frozen=True)
class TraceJet:
    x: object
    y: object
    dx: object
    dy: object
    level: int


def initial_jet(params: ModelParams, t) -> TraceJet:
    t = hp(t)
    lam = params.lam_hp
    return TraceJet(x=t - lam, y=t * t - lam * lam - 2, dx=mpfr(1), dy=2 * t, level=0)


def _two_trace(p, q, a, da, b, db, y, dy):
    """``Tr(A^p B^q)`` and its derivative from ``Tr A = a``, ``Tr B = b``, ``Tr AB = y``."""
    dp, dp_, dp1, dp1_ = cheb_jet(p, a)
    dq, dq_, dq1, dq1_ = cheb_jet(q, b)
    value = dp * dq * y - a * dp * dq1 - b * dp1 * dq + 2 * dp1 * dq1
    ddp, ddp1 = dp_ * da, dp1_ * da
    ddq, ddq1 = dq_ * db, dq1_ * db
    deriv = (
        (ddp * dq + dp * ddq) * y + dp * dq * dy
        - (da * dp * dq1 + a * ddp * dq1 + a * dp * ddq1)
        - (db * dp1 * dq + b * ddp1 * dq + b * dp1 * ddq)
        + 2 * (ddp1 * dq1 + dp1 * ddq1)
    )
    return value, deriv


def step_jet(params: ModelParams, jet: TraceJet) -> TraceJet:
    """Advance the orbit and its derivatives by one level."""
    m = params.m
    if jet.level < 0:
        raise ConfigError("jet level must be >= 0")
    if jet.level == 0:
        # Tr N_0 = x_0 + 2 lam, same derivative as x_0
        a, da = jet.x, jet.dx
        b, db = jet.x + 2 * params.lam_hp, jet.dx
        x, dx = _two_trace(m, m, a, da, b, db, jet.y, jet.dy)
        y, dy = _two_trace(2 * m, 2 * m, a, da, b, db, jet.y, jet.dy)
        return TraceJet(x=x, y=y, dx=dx, dy=dy, level=1)

    dm, dm_, _, _ = cheb_jet(m, jet.x)
    d2m, d2m_, _, _ = cheb_jet(2 * m, jet.x)
    ym2 = jet.y - 2
    return TraceJet(
        x=dm * dm * ym2 + 2,
        y=d2m * d2m * ym2 + 2,
        dx=2 * dm * dm_ * ym2 * jet.dx + dm * dm * jet.dy,
        dy=2 * d2m * d2m_ * ym2 * jet.dx + d2m * d2m * jet.dy,
        level=jet.level + 1,
    )


def trace_eval(params: ModelParams, n: int, t) -> TraceJet:
    """Level-n jet at ``t``: O(n m) operations."""
    if n < 0:
        raise ConfigError("level must be >= 0")
    jet = initial_jet(params, t)
    for _ in range(n):
        jet = step_jet(params, jet)
    return jet


def substitution_word(params: ModelParams, n: int, seed: str = "a", cap: int = DEFAULT_WORD_CAP) -> str:
    """``tau^n(seed)`` as a string over ``{'a', 'b'}``."""
    if seed not in ("a", "b"):
        raise ConfigError(f"seed must be 'a' or 'b', got {seed!r}")
    if n < 0:
        raise ConfigError("n must be >= 0")
    m = params.m
    if (2 * m) ** n > cap:
        raise OracleCapExceeded(f"word length (2m)^n = {(2 * m) ** n} exceeds cap {cap}")
    rule = {"a": "a" * m + "b" * m, "b": "b" * m + "a" * m}
    word = seed
    for _ in range(n):
        word = "".join(rule[c] for c in word)
    return word


def _base_matrices(params: ModelParams, t):
    t = hp(t)
    lam = params.lam_hp
    return transfer_matrix(t, lam), transfer_matrix(t, -lam)


def matrix_oracle(params: ModelParams, n: int, t, det_slack: int = 8, precision=None):
    """``(M_n, N_n)`` by the full matrix recursion.

    Raises PrecisionExhaustedError once the determinant has drifted from 1
    by more than ``2**(det_slack - precision)`` (relative to the products
    that cancel in it).  ``precision`` is the declared precision; it
    defaults to the active context precision.
    """
    import gmpy2

    if n < 0:
        raise ConfigError("level must be >= 0")
    m = params.m
    M, N = _base_matrices(params, t)
    limit = mpfr(2) ** (det_slack - (precision or gmpy2.get_context().precision))
    for level in range(n):
        Mm, Nm = sl2_pow(M, m, check=False), sl2_pow(N, m, check=False)
        M, N = Nm @ Mm, Mm @ Nm
        for name, mat in (("M", M), ("N", N)):
            if mat.det_defect() > limit:
                raise PrecisionExhaustedError(
                    f"det {name}_{level + 1} drifted by {mat.det_defect()}; raise precision"
                )
    return M, N


def word_oracle(params: ModelParams, n: int, t, cap: int = DEFAULT_WORD_CAP):
    """Trace of the literal product over ``tau^n(a)``, first letter applied first."""
    word = substitution_word(params, n, "a", cap=cap)
    A, B = _base_matrices(params, t)
    prod = Mat2(mpfr(1), mpfr(0), mpfr(0), mpfr(1))
    for c in word:
        prod = (A if c == "a" else B) @ prod
    return prod.trace
