"""Separating nested structure (SNS) inside the band families.

A node is a level-n band ``[u, v]`` on which ``x_n`` is monotone onto
``[-2, 2]``.  Its children are level-(n+1) bands cut at tangency points
``t`` where ``x_{n+1}(t) = 2`` and ``x_{n+1}'(t) = 0``:

* m > 2: ``t_j = x_n^{-1}(2 cos(j pi / m))`` for ``j`` in
  ``ceil(m/4)..floor(3m/4)``.  Each tangency contributes the level-(n+1)
  band on each side of it, except that the outermost two contribute only
  their inward band.  That gives ``Lambda_m`` children.
* m = 2: the tangencies are ``x_n^{-1}(0)`` and the endpoint of ``[u, v]``
  where ``x_n = 2``; the two inward bands are the children.  At level 1 the
  endpoint is not a tangency of ``x_2``, so the root is split on both sides
  of ``x_1^{-1}(0)`` instead.

The band on one side of ``t`` ends at the first root of ``x_{n+1} = -2``,
found by an outward scan followed by a bracketed solve.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from .bands import DECREASING, INCREASING, Band, _hierarchy, monotone_preimage
from .bounds import gamma_m, lambda_m, selection_window
from .errors import ConfigError, InvariantViolation, PrecisionExhaustedError
from .precision import (
    check_precision,
    default_precision,
    format_hp,
    guard_bits,
    tolerance,
    working_context,
)
from .roots import solve_bracketed
from .tracemap import ModelParams, trace_eval

__all__ = [
    "SAMPLES_PER_NODE",
    "LevelStats",
    "SNSNode",
    "SNSTree",
    "Tangency",
    "build_sns",
    "dim_lower_estimate",
    "expand_node_m2",
    "expand_node_m_gt2",
    "sns_root",
    "sns_stats",
]

SAMPLES_PER_NODE = 32


@dataclass(eq=False)
class SNSNode:
    band: Band
    parent: "SNSNode | None" = None
    children: list = field(default_factory=list)

    @property
    def level(self) -> int:
        return self.band.level

    @property
    def lo(self):
        return self.band.lo

    @property
    def hi(self):
        return self.band.hi

    def lineage(self) -> list:
        node, out = self, []
        while node is not None:
            out.append((node.level, node.band.index))
            node = node.parent
        return out[::-1]

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "lo": format_hp(self.lo),
            "hi": format_hp(self.hi),
            "direction": self.band.direction,
            "children": [c.to_dict() for c in self.children],
        }


@dataclass
class Tangency:
    """One construction point ``t``, checked as a tangency of ``x_level``."""

    level: int
    t: object
    x: object
    dx: object
    second_difference: object


@dataclass
class LevelStats:
    level: int
    count: int
    min_width: object
    max_width: object
    max_abs_dx: object
    max_abs_dy: object
    max_abs_ymin2: object
    max_abs_x: object

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "count": self.count,
            "min_width": float(self.min_width),
            "max_width": float(self.max_width),
            "max_abs_dx": float(self.max_abs_dx),
            "max_abs_dy": float(self.max_abs_dy),
            "max_abs_ymin2": float(self.max_abs_ymin2),
        }


@dataclass
class SNSTree:
    params: ModelParams
    root_index: int
    levels: list
    stats: list
    tangencies: list
    precision: int
    working_precision: int
    extra_crossings: int = 0

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def root(self) -> SNSNode:
        return self.levels[0][0]

    def counts(self) -> list:
        return [len(level) for level in self.levels]

    def branching(self) -> set:
        """Distinct child counts over all internal nodes."""
        return {len(node.children) for level in self.levels[:-1] for node in level}

    def to_dict(self) -> dict:
        return {
            "m": self.params.m,
            "lambda": str(self.params.lam),
            "root_index": self.root_index,
            "depth": self.depth,
            "precision_bits": self.precision,
            "working_precision_bits": self.working_precision,
            "tree": self.root.to_dict(),
            "stats": [s.to_dict() for s in self.stats],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


# -- construction ---------------------------------------------------------------------

def _check_m(params: ModelParams):
    if params.m < 2:
        raise ConfigError("the SNS construction does not apply to m = 1")


def sns_root(params: ModelParams, band_index: int = 0, precision=None) -> SNSNode:
    """Root node: one level-1 band (default: the leftmost)."""
    _check_m(params)
    count = 2 * params.m
    if not 0 <= band_index < count:
        raise ConfigError(f"band index {band_index} out of range (level 1 has {count} bands)")
    precision = check_precision(precision or default_precision())
    with working_context(precision + guard_bits(params.m, 1)):
        bands = _hierarchy(params, 1, precision)[0]
    return SNSNode(bands[band_index])


def _step_hint(params, level, t, width):
    """Rough distance from tangency ``t`` to the -2 crossing of ``x_{level+1}``.

    Near ``t`` we have x_{n+1} - 2 ~ d_m'(c)^2 x_n'(t)^2 (y_n - 2) (s - t)^2.
    """
    from .chebyshev import cheb_jet

    jet = trace_eval(params, level, t)
    _, dm_, _, _ = cheb_jet(params.m, jet.x)
    curv = abs(dm_ * jet.dx) ** 2 * abs(jet.y - 2)
    cap = width / (8 * params.m)
    if curv == 0:
        return cap
    return min(cap, 2 / gmpy2.sqrt(curv))


def _adjacent_minus2(params, level, t, side, lo, hi, h0):
    """First root of ``x_level = -2`` from tangency ``t`` towards ``side`` (+1/-1).

    Outward scan: advance while x keeps falling, halve the step when a probe
    turns back up or leaves ``[lo, hi]``, stop once x <= -2 while still falling.
    """
    prec = gmpy2.get_context().precision
    eps = mpfr(2) ** (8 - prec) * max(mpfr(1), abs(t))
    a, xa = t, mpfr(2)
    h = h0
    cap = h0 * 64
    for _ in range(8 * prec):
        b = a + side * h
        if b < lo or b > hi:
            h /= 2
        else:
            jet = trace_eval(params, level, b)
            falling = jet.dx * side < 0
            if falling and jet.x <= -2:
                f = lambda s: (lambda j: (j.x, j.dx))(trace_eval(params, level, s))  # noqa: E731
                return solve_bracketed(f, a, b, -2, flo=xa, fhi=jet.x)
            if falling and jet.x < xa:
                a, xa = b, jet.x
                h = min(2 * h, cap)
            else:
                h /= 2
        if h <= eps:
            break
    raise PrecisionExhaustedError(f"no -2 crossing of x_{level} found next to t = {t}")


def _children_from_points(params, node, points, both_sides):
    """Cut children of ``node`` at tangency points (sorted); see module docstring."""
    level = node.level + 1
    lo, hi = node.lo, node.hi
    width = hi - lo
    children = []
    for k, t in enumerate(points):
        h0 = _step_hint(params, node.level, t, width)
        if both_sides or k > 0:
            u = _adjacent_minus2(params, level, t, -1, lo, hi, h0)
            children.append(Band(level, -1, u, t, INCREASING))
        if both_sides or k < len(points) - 1:
            v = _adjacent_minus2(params, level, t, +1, lo, hi, h0)
            children.append(Band(level, -1, t, v, DECREASING))
    return [SNSNode(b, parent=node) for b in sorted(children, key=lambda b: b.lo)]


def expand_node_m_gt2(params: ModelParams, node: SNSNode):
    """Children of a node for m > 2, with the tangency points used."""
    m = params.m
    if m <= 2:
        raise ConfigError("expand_node_m_gt2 needs m > 2")
    m0, m1 = selection_window(m)
    pi = gmpy2.const_pi()
    points = sorted(monotone_preimage(params, node.band, 2 * gmpy2.cos(j * pi / m))
                    for j in range(m0, m1 + 1))
    return _children_from_points(params, node, points, both_sides=False), points


def expand_node_m2(params: ModelParams, node: SNSNode):
    """Children of a node for m = 2, with the tangency points used."""
    if params.m != 2:
        raise ConfigError("expand_node_m2 needs m = 2")
    zero = monotone_preimage(params, node.band, 0)
    if node.level == 1:
        return _children_from_points(params, node, [zero], both_sides=True), [zero]
    top = node.hi if node.band.direction == INCREASING else node.lo
    points = sorted([zero, top])
    return _children_from_points(params, node, points, both_sides=False), points


def _tangency_record(params, level, t, neighbours):
    jet = trace_eval(params, level, t)
    h = min(neighbours) / 16
    second = trace_eval(params, level, t + h).x - 2 * jet.x + trace_eval(params, level, t - h).x
    return Tangency(level, t, jet.x, jet.dx, second)


def _node_samples(params, node, samples):
    """Chebyshev-spaced interior jets of the node's band."""
    mid = (node.lo + node.hi) / 2
    half = (node.hi - node.lo) / 2
    pi = gmpy2.const_pi()
    return [trace_eval(params, node.level, mid + half * gmpy2.cos((2 * k + 1) * pi / (2 * samples)))
            for k in range(samples)]


def _check_node(params, node, tol, jets):
    band = node.band
    for end, t in (("lo", band.lo), ("hi", band.hi)):
        x = trace_eval(params, band.level, t).x
        if abs(x - band.value_at(end)) > tol:
            raise InvariantViolation(f"node {node.lineage()}: x_{band.level}({end}) = {x}")
    want = band.direction == INCREASING
    for jet in jets:
        if abs(jet.x) > 2 + tol:
            raise InvariantViolation(f"node {node.lineage()}: |x| > 2 inside the band")
        if (jet.dx > 0) != want:
            raise InvariantViolation(f"node {node.lineage()}: x_{band.level} not monotone")
    parent = node.parent
    if parent is not None and (band.lo < parent.lo - tol or band.hi > parent.hi + tol):
        raise InvariantViolation(f"node {node.lineage()} is not inside its parent")


def _count_extra_crossings(params, level, points, samples=64):
    """Sign changes of x_level + 2 between consecutive tangencies beyond the expected two."""
    extra = 0
    for a, b in zip(points, points[1:]):
        signs = [trace_eval(params, level, a + (b - a) * k / samples).x + 2 > 0
                 for k in range(1, samples)]
        changes = sum(1 for p, q in zip(signs, signs[1:]) if p != q)
        extra += max(0, changes - 2)
    return extra


def _build(params, root_index, depth, precision, samples):
    m = params.m
    tol = tolerance(precision)
    root = SNSNode(_hierarchy(params, 1, precision)[0][root_index])
    expand = expand_node_m2 if m == 2 else expand_node_m_gt2
    branching = lambda_m(m)
    levels, stats, tangencies = [[root]], [], []
    extra = 0
    for n in range(1, depth + 1):
        current = levels[-1]
        if len(current) != branching ** (n - 1):
            raise InvariantViolation(f"level {n}: {len(current)} nodes, expected {branching ** (n - 1)}")
        for i, node in enumerate(current):
            node.band = Band(n, i, node.lo, node.hi, node.band.direction)
        stats.append(_level_stats(params, current, tol, samples))
        for left, right in zip(current, current[1:]):
            if right.lo < left.hi - tol:
                raise InvariantViolation(f"level {n}: nodes {left.lineage()} and {right.lineage()} overlap")
        if n == depth:
            break
        nxt = []
        for node in current:
            children, points = expand(params, node)
            if len(children) != branching:
                raise InvariantViolation(
                    f"node {node.lineage()}: {len(children)} children, expected {branching}")
            node.children = children
            widths = [c.hi - c.lo for c in children]
            for t in points:
                tangencies.append(_tangency_record(params, n + 1, t, widths))
            extra += _count_extra_crossings(params, n + 1, points)
            nxt.extend(children)
        levels.append(nxt)
    return levels, stats, tangencies, extra


def _level_stats(params, nodes, tol, samples):
    widths = [node.hi - node.lo for node in nodes]
    max_dx = max_dy = max_y = max_x = mpfr(0)
    for node in nodes:
        jets = _node_samples(params, node, samples)
        _check_node(params, node, tol, jets)
        for jet in jets:
            max_dx = max(max_dx, abs(jet.dx))
            max_dy = max(max_dy, abs(jet.dy))
            max_y = max(max_y, abs(jet.y - 2))
            max_x = max(max_x, abs(jet.x))
    return LevelStats(nodes[0].level, len(nodes), min(widths), max(widths),
                      max_dx, max_dy, max_y, max_x)


def build_sns(params: ModelParams, root_index: int = 0, depth: int = 3, precision=None,
              samples=SAMPLES_PER_NODE, max_retries=3) -> SNSTree:
    """Build the SNS down to ``depth`` levels, checking every invariant on the way."""
    _check_m(params)
    if depth < 1:
        raise ConfigError("depth must be >= 1")
    if not 0 <= root_index < 2 * params.m:
        raise ConfigError(f"band index {root_index} out of range (level 1 has {2 * params.m} bands)")
    precision = check_precision(precision or default_precision())
    extra_bits = guard_bits(params.m, depth)
    last = None
    for _ in range(max_retries + 1):
        wp = precision + extra_bits
        try:
            with working_context(wp):
                levels, stats, tangencies, extra = _build(params, root_index, depth, precision, samples)
        except PrecisionExhaustedError as exc:
            last = exc
            extra_bits *= 2
            continue
        return SNSTree(params, root_index, levels, stats, tangencies, precision, wp, extra)
    raise PrecisionExhaustedError(f"SNS construction failed after {max_retries} escalations: {last}")


# -- statistics -------------------------------------------------------------------------

def _fit_slope(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx


def sns_stats(tree: SNSTree) -> dict:
    """Per-level widths and derivative maxima, width-decay slope and the empirical M.

    ``M_hat`` at level N is the running maximum over levels n <= N of
    ``max |x_n'| * gamma_m**-n``.  The slope is the least-squares slope of
    ``-log(min width)`` against the level over the last half of the levels.
    """
    if tree.depth < 2:
        raise ConfigError("sns_stats needs depth >= 2")
    gam = float(gamma_m(tree.params.m))
    rows, running = [], 0.0
    for s in tree.stats:
        scaled = float(s.max_abs_dx) / gam ** s.level
        running = max(running, scaled)
        row = s.to_dict()
        row["dx_over_gamma_n"] = scaled
        row["M_hat"] = running
        row["width_floor"] = 4.0 / (running * gam ** s.level) / 4.0
        rows.append(row)
    fit_levels = list(range(tree.depth // 2 + 1, tree.depth + 1))
    if len(fit_levels) < 2:
        fit_levels = list(range(1, tree.depth + 1))
    xs = [float(n) for n in fit_levels]
    ys = [-math.log(float(tree.stats[n - 1].min_width)) for n in fit_levels]
    slope = _fit_slope(xs, ys)
    return {
        "levels": rows,
        "fit_levels": fit_levels,
        "width_decay_slope": slope,
        "log_gamma": math.log(gam),
        "M_hat": running,
        "branching": sorted(tree.branching()),
        "extra_crossings": tree.extra_crossings,
    }


def dim_lower_estimate(tree: SNSTree) -> float:
    """``log Lambda_m`` over the fitted per-level width contraction rate."""
    if tree.depth < 3:
        raise ConfigError("dim_lower_estimate needs depth >= 3")
    slope = sns_stats(tree)["width_decay_slope"]
    return math.log(lambda_m(tree.params.m)) / slope
