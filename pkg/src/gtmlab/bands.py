"""Band isolation for the level-n trace polynomials.

``sigma_n = {t : |x_n(t)| <= 2}`` is a union of ``(2m)^n`` closed bands,
each mapped monotonically onto ``[-2, 2]`` by ``x_n``.  Neighbouring bands
may share an endpoint where ``x_n`` touches 2 with zero slope.

Isolation is hierarchical.  Level 1 comes from exact real-root isolation
of the rational polynomials ``x_1 -+ 2``.  Above that the roots of
``x_{L+1} - 2`` are known in closed form through the trace map::

    x_{L+1} - 2 = d_m(x_L)^2 (y_L - 2)
    y_{L+1} - 2 = d_{2m}(x_L)^2 (y_L - 2)

so they are preimages ``x_k^{-1}(2 cos(j pi / 2m))`` inside lower-level
bands (double roots) plus the roots of ``y_1 - 2``.  Between consecutive
roots where ``x_{L+1} < 2`` there is a single minimum below -2, and the
two roots of ``x_{L+1} + 2`` on either side of it close off a pair of bands.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import gmpy2
from gmpy2 import mpfr

from .errors import BandCountError, ConfigError, PrecisionExhaustedError
from .precision import (
    default_precision,
    check_precision,
    format_hp,
    guard_bits,
    hp,
    tolerance,
    working_context,
)
from .roots import bisect_sign, solve_bracketed
from .tracemap import ModelParams, trace_eval

__all__ = [
    "DEFAULT_BAND_CAP",
    "Band",
    "BandSet",
    "InclusionReport",
    "band_hierarchy",
    "curve_components",
    "isolate_bands",
    "monotone_preimage",
    "probe_inclusion",
    "read_bands_csv",
    "sample_curve",
    "spectral_member",
    "validate_band",
]

DEFAULT_BAND_CAP = 10**6
INCREASING, DECREASING = "increasing", "decreasing"
CSV_FIELDS = ("level", "index", "lo", "hi", "direction")


@dataclass(frozen=True)
class Band:
    level: int
    index: int
    lo: object
    hi: object
    direction: str

    @property
    def width(self):
        return self.hi - self.lo

    def value_at(self, end: str) -> int:
        """Nominal value of x_n at ``'lo'`` or ``'hi'`` (+2 or -2)."""
        rising = self.direction == INCREASING
        if end == "lo":
            return -2 if rising else 2
        return 2 if rising else -2

    def contains(self, t, slack=0) -> bool:
        return self.lo - slack <= t <= self.hi + slack


@dataclass
class BandSet:
    params: ModelParams
    level: int
    bands: list
    precision: int
    working_precision: int

    def __len__(self):
        return len(self.bands)

    def __iter__(self):
        return iter(self.bands)

    def __getitem__(self, i):
        return self.bands[i]

    def locate(self, t):
        """Bands containing ``t`` (two when t is a shared endpoint)."""
        i = bisect.bisect_right([b.lo for b in self.bands], t)
        return [b for b in self.bands[max(0, i - 2):i] if b.contains(t)]

    def n_touching(self, slack=None) -> int:
        """Number of neighbouring pairs that share an endpoint (closed gaps)."""
        if slack is None:
            slack = tolerance(self.precision)
        return sum(1 for a, b in zip(self.bands, self.bands[1:]) if b.lo - a.hi <= slack)

    def to_csv(self, fh=None) -> str | None:
        """Write ``level,index,lo,hi,direction`` rows at full working precision."""
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for b in self.bands:
            w.writerow([b.level, b.index, format_hp(b.lo), format_hp(b.hi), b.direction])
        return fh.getvalue() if own else None


def read_bands_csv(fh, bits: int) -> list:
    rows = []
    with working_context(bits):
        for rec in csv.DictReader(fh):
            rows.append(Band(int(rec["level"]), int(rec["index"]), mpfr(rec["lo"]),
                             mpfr(rec["hi"]), rec["direction"]))
    return rows


# -- level 1: exact polynomials ------------------------------------------------

@lru_cache(maxsize=32)
def _level1_polys(m: int, lam: Fraction):
    import sympy

    t = sympy.Symbol("t")
    L = sympy.Rational(lam.numerator, lam.denominator)
    M = sympy.Matrix([[t - L, -1], [1, 0]])
    N = sympy.Matrix([[t + L, -1], [1, 0]])
    Mm, Nm = M**m, N**m
    x1 = sympy.Poly(sympy.expand((Nm * Mm).trace()), t, domain="QQ")
    y1 = sympy.Poly(sympy.expand((Mm * Mm * Nm * Nm).trace()), t, domain="QQ")
    return x1, y1


def _horner(coeffs, t):
    acc = mpfr(0)
    for c in coeffs:
        acc = acc * t + c
    return acc


def _poly_level_roots(poly, c):
    """Real roots of ``poly - c`` as sorted ``[(t, multiplicity)]`` (exact isolation)."""
    import sympy

    shifted = poly - sympy.Integer(c)
    _, factors = shifted.sqf_list()
    out = []
    for f, mult in factors:
        for (a, b), _ in f.intervals():
            if a == b:
                out.append((hp(Fraction(int(a.p), int(a.q))), mult))
                continue
            # shrink exactly until neither end is a root (an end may be a neighbour's root)
            while f.eval(a) == 0 or f.eval(b) == 0:
                mid = (a + b) / 2
                if f.eval(mid) == 0:
                    a = b = mid
                    break
                inside = f.count_roots(a, mid) - (f.eval(a) == 0)
                a, b = (a, mid) if inside else (mid, b)
            if a == b:
                out.append((hp(Fraction(int(a.p), int(a.q))), mult))
                continue
            coeffs = [hp(Fraction(int(q.p), int(q.q))) for q in f.all_coeffs()]
            g = lambda t, cs=coeffs: _horner(cs, t)  # noqa: E731
            a, b = hp(Fraction(int(a.p), int(a.q))), hp(Fraction(int(b.p), int(b.q)))
            out.append((bisect_sign(g, a, b), mult))
    out.sort(key=lambda r: r[0])
    return out


def _pair_endpoints(level, points):
    """Bands from sorted ``(t, value, multiplicity)`` points of ``|x| = 2``."""
    seq = []
    for t, v, mult in points:
        seq.extend([(t, v)] * mult)
    if len(seq) % 2:
        raise BandCountError(f"odd number of level-{level} endpoints ({len(seq)})")
    bands = []
    for (lo, vlo), (hi, vhi) in zip(seq[0::2], seq[1::2]):
        if vlo == vhi:
            raise BandCountError(f"level-{level} endpoints at {lo}, {hi} both have x = {vlo}")
        bands.append((lo, hi, INCREASING if vlo < vhi else DECREASING))
    return bands


# -- hierarchy ---------------------------------------------------------------------

def _jet_fn(params, level):
    def f(t):
        jet = trace_eval(params, level, t)
        return jet.x, jet.dx
    return f


def _chebyshev_nodes(m: int):
    """``2 cos(j pi / 2m)`` for j = 1..2m-1, the zeros of d_{2m}."""
    pi = gmpy2.const_pi()
    return [(j, 2 * gmpy2.cos(j * pi / (2 * m))) for j in range(1, 2 * m)]


def _preimage(params, level, lo, hi, c, direction):
    f = _jet_fn(params, level)
    flo, fhi = (-2, 2) if direction == INCREASING else (2, -2)
    return solve_bracketed(f, lo, hi, c, flo=mpfr(flo), fhi=mpfr(fhi))


def _merge_roots(roots, slack):
    roots = sorted(roots, key=lambda r: r[0])
    merged = []
    for t, mult in roots:
        if merged and t - merged[-1][0] <= slack:
            merged[-1] = (merged[-1][0], merged[-1][1] + mult)
        else:
            merged.append((t, mult))
    return merged


def _below_pair(params, level, r, s, tol):
    """Bands in ``(r, s)`` where x < 2: returns ``(u, v)`` with x(u) = x(v) = -2."""
    lo, hi = r, s
    prec = gmpy2.get_context().precision
    w = None
    for _ in range(prec + 64):
        w = (lo + hi) / 2
        jet = trace_eval(params, level, w)
        if jet.x <= -2:
            break
        if jet.dx > 0:
            hi = w
        else:
            lo = w
        if hi - lo <= mpfr(2) ** (4 - prec) * max(mpfr(1), abs(w)):
            if jet.x + 2 <= tol:
                return w, w  # minimum touches -2: bands share this endpoint
            raise BandCountError(f"level-{level}: no point with x <= -2 between {r} and {s}")
    f = _jet_fn(params, level)
    xw = trace_eval(params, level, w).x
    u = solve_bracketed(f, r, w, -2, flo=mpfr(2), fhi=xw)
    v = solve_bracketed(f, w, s, -2, flo=xw, fhi=mpfr(2))
    return u, v


def _level_bands(params, level, plus_roots, tol):
    """Level bands from the roots of ``x_level - 2`` (with multiplicity)."""
    points = []
    above = True  # even degree, positive leading coefficient
    for (r, mr), (s, ms) in zip(plus_roots, plus_roots[1:]):
        points.append((r, 2, mr))
        if mr % 2:
            above = not above
        if not above:
            u, v = _below_pair(params, level, r, s, tol)
            points.extend([(u, -2, 1), (v, -2, 1)])
    r, mr = plus_roots[-1]
    points.append((r, 2, mr))
    return _pair_endpoints(level, points)


def _check_bands(params, level, raw, tol):
    expected = (2 * params.m) ** level
    if len(raw) != expected:
        raise BandCountError(f"level {level}: found {len(raw)} bands, expected {expected}")
    bands = []
    for i, (lo, hi, direction) in enumerate(sorted(raw, key=lambda b: b[0])):
        band = Band(level, i, lo, hi, direction)
        if not lo < hi:
            raise PrecisionExhaustedError(f"level-{level} band {i} is degenerate")
        for end, t in (("lo", lo), ("hi", hi)):
            x = trace_eval(params, level, t).x
            if abs(x - band.value_at(end)) > tol:
                raise PrecisionExhaustedError(
                    f"level-{level} band {i} {end}: |x - {band.value_at(end)}| = "
                    f"{float(abs(x - band.value_at(end))):.3g} above tolerance"
                )
        bands.append(band)
    return bands


def _hierarchy(params, n, precision):
    """Band lists for levels 1..n at the active (working) precision."""
    m = params.m
    tol = tolerance(precision)
    x1, y1 = _level1_polys(m, params.lam)
    slack = mpfr(2) ** (8 - gmpy2.get_context().precision)

    plus = _poly_level_roots(x1, 2)
    minus = _poly_level_roots(x1, -2)
    points = [(t, 2, k) for t, k in plus] + [(t, -2, k) for t, k in minus]
    points.sort(key=lambda p: p[0])
    levels = [_check_bands(params, 1, _pair_endpoints(1, points), tol)]
    y_roots = _poly_level_roots(y1, 2)  # roots of y_L - 2, L = current level

    nodes = _chebyshev_nodes(m)
    for level in range(1, n):
        last = level == n - 1
        pre_all, pre_even = [], []
        for band in levels[-1]:
            for j, c in nodes:
                if last and j % 2:
                    continue  # y_{n} is not needed at the top level
                t = _preimage(params, level, band.lo, band.hi, c, band.direction)
                pre_all.append((t, 2))
                if j % 2 == 0:
                    pre_even.append((t, 2))
        plus = _merge_roots(y_roots + pre_even, slack)
        degree = sum(k for _, k in plus)
        if degree != (2 * m) ** (level + 1):
            raise BandCountError(
                f"level {level + 1}: root multiplicities sum to {degree}, "
                f"expected {(2 * m) ** (level + 1)}"
            )
        raw = _level_bands(params, level + 1, plus, tol)
        levels.append(_check_bands(params, level + 1, raw, tol))
        if not last:
            y_roots = _merge_roots(y_roots + pre_all, slack)
    return levels


def band_hierarchy(params: ModelParams, n: int, precision=None, cap=DEFAULT_BAND_CAP,
                   max_retries=3):
    """BandSets for levels 1..n; escalates precision on failure."""
    if n < 1:
        raise ConfigError("level must be >= 1")
    if (2 * params.m) ** n > cap:
        raise ConfigError(f"(2m)^n = {(2 * params.m) ** n} bands exceeds cap {cap}")
    precision = check_precision(precision or default_precision())
    extra = guard_bits(params.m, n)
    last_error = None
    for _ in range(max_retries + 1):
        wp = precision + extra
        try:
            with working_context(wp):
                levels = _hierarchy(params, n, precision)
        except (BandCountError, PrecisionExhaustedError) as exc:
            last_error = exc
            extra *= 2
            continue
        return [BandSet(params, k + 1, bands, precision, wp) for k, bands in enumerate(levels)]
    if isinstance(last_error, BandCountError):
        raise BandCountError(f"band isolation failed after {max_retries} escalations: {last_error}")
    raise PrecisionExhaustedError(
        f"band isolation failed after {max_retries} escalations: {last_error}"
    )


def isolate_bands(params: ModelParams, n: int, precision=None, cap=DEFAULT_BAND_CAP,
                  max_retries=3) -> BandSet:
    """All ``(2m)^n`` monotone bands of ``sigma_n``, sorted by left endpoint."""
    return band_hierarchy(params, n, precision, cap, max_retries)[-1]


def monotone_preimage(params: ModelParams, band: Band, c, tol=None):
    """The unique ``t`` in ``band`` with ``x_n(t) = c`` (runs at the active precision)."""
    c = hp(c)
    if abs(c) > 2:
        raise ConfigError("c must lie in [-2, 2]")
    if c == band.value_at("lo"):
        return band.lo
    if c == band.value_at("hi"):
        return band.hi
    f = _jet_fn(params, band.level)
    t = solve_bracketed(f, band.lo, band.hi, c)
    if tol is not None:
        res = abs(trace_eval(params, band.level, t).x - c)
        if res > tol:
            raise PrecisionExhaustedError(f"preimage residual {float(res):.3g} above tolerance")
    return t


def validate_band(params: ModelParams, band: Band, tol, samples=32) -> list:
    """Problems found with one band (empty list when it passes every check)."""
    problems = []
    if not band.lo < band.hi:
        problems.append("lo >= hi")
    xlo = trace_eval(params, band.level, band.lo).x
    xhi = trace_eval(params, band.level, band.hi).x
    if abs(xlo - band.value_at("lo")) > tol or abs(xhi - band.value_at("hi")) > tol:
        problems.append("endpoint values not +-2")
    if abs(xlo * xhi + 4) > 4 * tol:
        problems.append("endpoint values not opposite")
    want = 1 if band.direction == INCREASING else -1
    for k in range(1, samples + 1):
        t = band.lo + band.width * k / (samples + 1)
        jet = trace_eval(params, band.level, t)
        if (jet.dx > 0) != (want > 0) or jet.dx == 0:
            problems.append(f"derivative sign changes at sample {k}")
            break
        if abs(jet.x) > 2 + tol:
            problems.append(f"|x| > 2 at sample {k}")
            break
    return problems


# -- inclusion probe ---------------------------------------------------------------

@dataclass
class InclusionReport:
    m: int
    lam: Fraction
    level: int
    samples_per_band: int
    n_bands: int
    n_samples: int
    in_lower: int
    in_middle: int
    in_both: int
    n_counterexamples: int = 0
    counterexamples: list = field(default_factory=list)
    precision: int = 0
    working_precision: int = 0

    @property
    def holds(self) -> bool:
        return self.n_counterexamples == 0

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "lambda": str(self.lam),
            "level": self.level,
            "claim": f"sigma_{self.level} U sigma_{self.level + 1} contains sigma_{self.level + 2}",
            "samples_per_band": self.samples_per_band,
            "bands_checked": self.n_bands,
            "samples": self.n_samples,
            "in_sigma_n": self.in_lower,
            "in_sigma_n_plus_1": self.in_middle,
            "in_both": self.in_both,
            "counterexample_count": self.n_counterexamples,
            "counterexamples": self.counterexamples,
            "precision_bits": self.precision,
            "working_precision_bits": self.working_precision,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def spectral_member(jet, tol):
    """|x| <= 2 up to a tolerance scaled by the local slope."""
    return abs(jet.x) <= 2 + tol * max(mpfr(1), abs(jet.dx))


def probe_inclusion(params: ModelParams, n: int, samples_per_band=64, precision=None,
                    max_listed=100) -> InclusionReport:
    """Sample ``sigma_{n+2}`` and test membership in ``sigma_n`` U ``sigma_{n+1}``.

    Each band contributes its two endpoints plus ``samples_per_band - 2``
    evenly spaced interior points.  An empty counterexample list is
    evidence, not proof.
    """
    if samples_per_band < 2:
        raise ConfigError("samples_per_band must be >= 2")
    levels = band_hierarchy(params, n + 2, precision)
    top = levels[-1]
    tol = tolerance(top.precision)
    report = InclusionReport(params.m, params.lam, n, samples_per_band, len(top), 0, 0, 0, 0,
                             precision=top.precision, working_precision=top.working_precision)
    with working_context(top.working_precision):
        for band in top:
            for k in range(samples_per_band):
                t = band.lo + band.width * k / (samples_per_band - 1)
                a = spectral_member(trace_eval(params, n, t), tol)
                b = spectral_member(trace_eval(params, n + 1, t), tol)
                report.n_samples += 1
                report.in_lower += a
                report.in_middle += b
                report.in_both += a and b
                if not (a or b):
                    report.n_counterexamples += 1
                    if len(report.counterexamples) < max_listed:
                        report.counterexamples.append(
                            {"t": format_hp(t), "band": band.index,
                             "x_n": format_hp(trace_eval(params, n, t).x, 64),
                             "x_n_plus_1": format_hp(trace_eval(params, n + 1, t).x, 64)}
                        )
    return report


# -- curve sampling ------------------------------------------------------------------

def sample_curve(params: ModelParams, n: int, t_lo, t_hi, count: int, precision=None):
    """Rows ``(t, x_n, y_n, x_n')`` on a uniform grid of ``count`` points."""
    if count < 2:
        raise ConfigError("count must be >= 2")
    precision = check_precision(precision or default_precision())
    with working_context(precision + guard_bits(params.m, n)):
        lo, hi = hp(t_lo), hp(t_hi)
        if not lo < hi:
            raise ConfigError("t_lo must be < t_hi")
        rows = []
        for i in range(count):
            t = lo + (hi - lo) * i / (count - 1) if i < count - 1 else hi
            jet = trace_eval(params, n, t)
            rows.append((t, jet.x, jet.y, jet.dx))
    return rows


def curve_components(rows):
    """From sampled rows, count connected runs of ``|x| <= 2`` and monotone pieces in them.

    Returns ``(components, monotone_pieces)``: pieces split a run wherever
    the slope changes sign, i.e. at touching bands.
    """
    components = pieces = 0
    prev_in, prev_sign = False, None
    for _, x, _, dx in rows:
        inside = abs(x) <= 2
        sign = dx > 0
        if inside and not prev_in:
            components += 1
            pieces += 1
        elif inside and sign != prev_sign:
            pieces += 1
        prev_in, prev_sign = inside, sign
    return components, pieces
