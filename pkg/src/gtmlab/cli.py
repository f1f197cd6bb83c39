"""Command-line interface.

Usage:
    gtmlab eval  --m 2 --lambda 0.1 --level 2 --range -2.5:2.5 --count 5000
    gtmlab bands --m 2 --lambda 0.1 --level 3 -o bands.csv
    gtmlab sns   --m 2 --lambda 1 --depth 6 -o tree.json
    gtmlab bounds --m 2..20
    gtmlab probe --m 1 --lambda 1 --level 1

Exit codes: 0 success, 2 invariant violation, 3 precision exhausted,
4 bad configuration.
"""

from __future__ import annotations

import csv
import io
import json
import random
import sys

import click

from .bands import band_hierarchy, probe_inclusion, sample_curve
from .bounds import gamma_growth_ratio, theorem_bound, verify_gamma_recursion
from .errors import ConfigError, GTMError, InvariantViolation
from .precision import check_precision, default_precision, format_hp, tolerance, working_context
from .sns import build_sns, dim_lower_estimate, sns_stats
from .tracemap import ModelParams, word_oracle

__all__ = ["cli", "main"]


def _model(m, lam) -> ModelParams:
    return ModelParams(m, lam)


def _precision(bits) -> int:
    return check_precision(bits) if bits is not None else default_precision()


def _emit(text: str, output):
    if output in (None, "-"):
        click.echo(text, nl=not text.endswith("\n"))
    else:
        with open(output, "w", newline="") as fh:
            fh.write(text)


def _note(msg: str):
    click.echo(msg, err=True)


def _parse_range(text: str):
    try:
        lo, hi = text.split(":")
        return lo.strip(), hi.strip()
    except ValueError:
        raise ConfigError(f"range must look like LO:HI, got {text!r}")


def _parse_m_range(text: str):
    try:
        if ".." in text:
            a, b = text.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(text)]
    except ValueError:
        raise ConfigError(f"--m must be an integer or A..B, got {text!r}")


common = [
    click.option("--lambda", "lam", default="1", show_default=True,
                 help="Coupling, as a decimal string (parsed exactly)."),
    click.option("--precision-bits", type=int, default=None,
                 help="Declared precision; defaults to $GTM_PRECISION_BITS or 128."),
    click.option("-o", "--output", default=None, help="Output file (default stdout)."),
    click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None),
    click.option("--seed", type=int, default=0, show_default=True),
]


def with_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


@click.group()
def cli():
    """Trace maps, spectral bands and SNS dimension bounds for generalized Thue-Morse operators."""


@cli.command("eval")
@click.option("--m", type=int, required=True)
@click.option("--level", type=int, required=True)
@click.option("--range", "trange", default="-2.5:2.5", show_default=True)
@click.option("--count", type=int, default=1000, show_default=True)
@click.option("--check-oracle", is_flag=True, help="Compare 10 random rows against the word product.")
@with_common
def cmd_eval(m, level, trange, count, check_oracle, lam, precision_bits, output, fmt, seed):
    """Sample (t, x_n, y_n, x_n') on a uniform grid."""
    params = _model(m, lam)
    precision = _precision(precision_bits)
    lo, hi = _parse_range(trange)
    rows = sample_curve(params, level, lo, hi, count, precision)
    wp = rows[0][0].precision
    if (fmt or "csv") == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y", "dx"])
        for row in rows:
            w.writerow([format_hp(v) for v in row])
        _emit(buf.getvalue(), output)
    else:
        _emit(json.dumps({"m": m, "lambda": lam, "level": level, "precision_bits": precision,
                          "working_precision_bits": wp,
                          "rows": [[format_hp(v) for v in row] for row in rows]}, indent=1), output)
    _note(f"rows: {len(rows)}  precision_bits={precision} working_precision_bits={wp}")
    if check_oracle:
        rng = random.Random(seed)
        picks = sorted(rng.sample(range(len(rows)), min(10, len(rows))))
        with working_context(wp):
            dev = max(abs(rows[i][1] - word_oracle(params, level, rows[i][0]))
                      / max(1, abs(rows[i][1])) for i in picks)
            limit = tolerance(precision, 32)
        _note(f"oracle max relative deviation: {float(dev):.3e} (limit {float(limit):.3e})")
        if dev > limit:
            raise InvariantViolation("trace recurrence disagrees with the word product")


@cli.command("bands")
@click.option("--m", type=int, required=True)
@click.option("--level", type=int, required=True)
@with_common
def cmd_bands(m, level, lam, precision_bits, output, fmt, seed):
    """Isolate every band of sigma_n."""
    params = _model(m, lam)
    bs = band_hierarchy(params, level, _precision(precision_bits))[-1]
    if (fmt or "csv") == "csv":
        _emit(bs.to_csv(), output)
    else:
        _emit(json.dumps({"m": m, "lambda": lam, "level": level,
                          "precision_bits": bs.precision,
                          "working_precision_bits": bs.working_precision,
                          "bands": [{"level": b.level, "index": b.index, "lo": format_hp(b.lo),
                                     "hi": format_hp(b.hi), "direction": b.direction}
                                    for b in bs]}, indent=1), output)
    _note(f"rows: {len(bs)}  touching pairs: {bs.n_touching()}  "
          f"precision_bits={bs.precision} working_precision_bits={bs.working_precision}")


@cli.command("sns")
@click.option("--m", type=int, required=True)
@click.option("--depth", type=int, required=True)
@click.option("--band-index", type=int, default=0, show_default=True)
@with_common
def cmd_sns(m, depth, band_index, lam, precision_bits, output, fmt, seed):
    """Build the SNS tree and compare its dimension estimate with the bound."""
    params = _model(m, lam)
    if params.m < 2:
        raise ConfigError("the SNS construction does not apply to m = 1 (the method needs m >= 2)")
    tree = build_sns(params, band_index, depth, _precision(precision_bits))
    report = theorem_bound(m)
    if depth >= 2:
        stats = sns_stats(tree)
        stats["dimension_estimate"] = dim_lower_estimate(tree) if depth >= 3 else None
        report.empirical = stats
    doc = tree.to_dict()
    doc["seed"] = seed
    doc["report"] = report.to_dict()
    _emit(json.dumps(doc, indent=1) + "\n", output)
    _note(f"level counts: {tree.counts()}  branching: {sorted(tree.branching())}  "
          f"precision_bits={tree.precision} working_precision_bits={tree.working_precision}")
    if report.empirical and report.empirical.get("dimension_estimate") is not None:
        _note(f"empirical estimate {report.empirical['dimension_estimate']:.4f}  "
              f"bound log(Lambda)/log(gamma) = {float(report.bound):.4f}")


@cli.command("bounds")
@click.option("--m", "mspec", required=True, help="m or a range A..B")
@click.option("--precision-bits", type=int, default=None)
@click.option("-o", "--output", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
def cmd_bounds(mspec, precision_bits, output, fmt):
    """Table of Lambda_m, gamma_m and the dimension bounds."""
    _precision(precision_bits)
    rows = []
    for m in _parse_m_range(mspec):
        rep = theorem_bound(m)
        d = rep.to_dict()
        d["gamma_recursion_ratio"] = format_hp(gamma_growth_ratio(m), 64)
        d["gamma_recursion_ok"] = verify_gamma_recursion(m)
        rows.append(d)
    if (fmt or "csv") == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        _emit(buf.getvalue(), output)
    else:
        _emit(json.dumps(rows, indent=1) + "\n", output)
    _note("precision_bits=128 (bounds are always evaluated at 128 bits)")


@cli.command("probe")
@click.option("--m", type=int, required=True)
@click.option("--level", type=int, required=True)
@click.option("--samples-per-band", type=int, default=64, show_default=True)
@with_common
def cmd_probe(m, level, samples_per_band, lam, precision_bits, output, fmt, seed):
    """Test whether sigma_n U sigma_{n+1} contains sigma_{n+2} on sampled points."""
    params = _model(m, lam)
    report = probe_inclusion(params, level, samples_per_band, _precision(precision_bits))
    _emit(report.to_json() + "\n", output)
    _note(f"counterexamples: {report.n_counterexamples} of {report.n_samples} samples  "
          f"precision_bits={report.precision} working_precision_bits={report.working_precision}")


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="gtmlab", standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.exceptions.UsageError as exc:
        exc.show()
        sys.exit(ConfigError.exit_code)
    except GTMError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    sys.exit(0)


if __name__ == "__main__":
    main()
