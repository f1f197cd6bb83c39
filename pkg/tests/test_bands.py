import io
import random

import numpy as np
import pytest
from gmpy2 import mpfr

from gtmlab.bands import (
    band_hierarchy,
    curve_components,
    isolate_bands,
    monotone_preimage,
    probe_inclusion,
    read_bands_csv,
    sample_curve,
    validate_band,
)
from gtmlab.errors import ConfigError
from gtmlab.precision import tolerance, working_context
from gtmlab.tracemap import ModelParams, substitution_word, trace_eval, word_oracle


def dense_trace(m, lam, n, ts):
    """x_n on a float64 grid from the literal word product (independent of the recurrence)."""
    word = substitution_word(ModelParams(m, 1), n)
    a11, a12 = np.ones_like(ts), np.zeros_like(ts)
    a21, a22 = np.zeros_like(ts), np.ones_like(ts)
    for c in word:
        v = ts - lam if c == "a" else ts + lam
        # [[v, -1], [1, 0]] @ P
        a11, a12, a21, a22 = v * a11 - a21, v * a12 - a22, a11, a12
    return a11 + a22


@pytest.mark.parametrize("m,lam,n", [(1, "1", 1), (1, "1", 4), (2, "0.1", 2), (3, "0.5", 2), (4, "1.5", 2)])
def test_counts_and_invariants(m, lam, n):
    p = ModelParams(m, lam)
    bs = isolate_bands(p, n)
    assert len(bs) == (2 * m) ** n
    tol = tolerance(bs.precision)
    with working_context(bs.working_precision):
        for b in bs:
            assert validate_band(p, b, tol) == []
        for a, b in zip(bs, list(bs)[1:]):
            assert a.hi <= b.lo + tol


def test_hierarchy_levels():
    levels = band_hierarchy(ModelParams(2, "0.1"), 3)
    assert [len(x) for x in levels] == [4, 16, 64]
    assert [x.level for x in levels] == [1, 2, 3]


def test_dense_scan_oracle():
    m, lam, n = 3, 0.5, 2
    bs = isolate_bands(ModelParams(m, "0.5"), n)
    ts = np.linspace(-3.5, 3.5, 100_000)
    x = dense_trace(m, lam, n, ts)
    los = np.array([float(b.lo) for b in bs])
    his = np.array([float(b.hi) for b in bs])
    i = np.searchsorted(los, ts, side="right") - 1
    inside = (i >= 0) & (ts <= his[np.clip(i, 0, None)])
    margin = 1e-6
    assert not np.any((np.abs(x) < 2 - margin) & ~inside)
    assert not np.any((np.abs(x) > 2 + margin) & inside)
    # every band's image reaches both +2 and -2
    for b in bs:
        sel = (ts >= float(b.lo)) & (ts <= float(b.hi))
        if sel.sum() > 3:
            assert x[sel].max() > 1.5 and x[sel].min() < -1.5


def test_monotone_preimage_leftmost_band():
    p = ModelParams(2, "0.1")
    bs = isolate_bands(p, 1)
    b = bs[0]
    with working_context(bs.working_precision):
        t0 = monotone_preimage(p, b, 0, tol=tolerance(bs.precision))
        assert b.lo < t0 < b.hi
        # plain bisection on the sign of x_1
        lo, hi = b.lo, b.hi
        s_lo = trace_eval(p, 1, lo).x > 0
        for _ in range(bs.working_precision):
            mid = (lo + hi) / 2
            if (trace_eval(p, 1, mid).x > 0) == s_lo:
                lo = mid
            else:
                hi = mid
        assert abs(t0 - lo) <= mpfr(2) ** (20 - bs.precision)
        assert monotone_preimage(p, b, b.value_at("lo")) == b.lo
        assert monotone_preimage(p, b, b.value_at("hi")) == b.hi
        with pytest.raises(ConfigError):
            monotone_preimage(p, b, 3)


def test_csv_round_trip():
    bs = isolate_bands(ModelParams(2, "0.1"), 2)
    text = bs.to_csv()
    assert text.splitlines()[0] == "level,index,lo,hi,direction"
    back = read_bands_csv(io.StringIO(text), bs.working_precision)
    assert len(back) == 16
    for a, b in zip(bs, back):
        assert a.lo == b.lo and a.hi == b.hi and a.direction == b.direction


def test_locate_and_touching():
    bs = isolate_bands(ModelParams(2, "0.1"), 2)
    b = bs[5]
    with working_context(bs.working_precision):
        assert b in bs.locate((b.lo + b.hi) / 2)
    assert bs.n_touching() >= 0


def test_sample_curve():
    p = ModelParams(3, "0.2")
    rows = sample_curve(p, 2, "-1", "1", 2)
    assert len(rows) == 2 and rows[0][0] == -1 and rows[1][0] == 1
    rows = sample_curve(p, 2, "-2.5", "2.5", 200)
    rng = random.Random(3)
    with working_context(rows[0][0].precision):
        for i in rng.sample(range(200), 10):
            t, x = rows[i][0], rows[i][1]
            assert abs(x - word_oracle(p, 2, t)) <= tolerance(128, 32) * max(1, abs(x))
    with pytest.raises(ConfigError):
        sample_curve(p, 2, "1", "0", 5)
    with pytest.raises(ConfigError):
        sample_curve(p, 2, "0", "1", 1)


def test_figure_curve_pieces():
    rows = sample_curve(ModelParams(2, "0.1"), 2, "-2.5", "2.5", 5000)
    components, pieces = curve_components(rows)
    assert pieces == 16
    assert components <= pieces


def test_probe_thue_morse():
    rep = probe_inclusion(ModelParams(1, 1), 1, 16)
    assert rep.holds and rep.counterexamples == []
    assert rep.n_samples == 16 * 8
    d = rep.to_dict()
    assert d["counterexample_count"] == 0 and d["bands_checked"] == 8


def test_level_errors():
    with pytest.raises(ConfigError):
        isolate_bands(ModelParams(2, 1), 0)
    with pytest.raises(ConfigError):
        isolate_bands(ModelParams(2, 1), 3, cap=10)
