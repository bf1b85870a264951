"""Command-line experiment runner.

Every subcommand builds a table; ``--out`` writes it as CSV (or JSON when the
path ends in ``.json``), otherwise a summary goes to stdout. Exit status 2
means the configuration could not be parsed, 1 that a checked inequality or
invariant failed (the failing check is named on stderr).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import jn, product, rearrange, transforms, verify
from .config import TOL
from .grid import GridError, generate, make_domain, parse_generator, unit_domain
from .oscillation import NormReport, OscillationError, bmo_norm, median, osc_double, osc_inf_const, osc_p
from .shapes import ShapeError, box, parse_basis, whole


class ConfigError(ValueError):
    """Unparseable or inconsistent experiment configuration (exit status 2)."""


class CheckFailed(RuntimeError):
    """A checked inequality or invariant failed (exit status 1)."""


# -- parsing helpers ---------------------------------------------------------------


def _number(text: str) -> float:
    text = text.strip()
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return float(Fraction(text)) if "/" in text else float(text)


def parse_list(text) -> list[float]:
    """``"1,2,3"`` or ``"1:4"`` (integer range, inclusive) or a list."""
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    text = str(text)
    if ":" in text and "," not in text:
        a, b = text.split(":")
        return [float(x) for x in range(int(a), int(b) + 1)]
    return [_number(x) for x in text.split(",") if x.strip()]


def parse_cells(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    parts = str(text).lower().replace("x", ",").split(",")
    return tuple(int(x) for x in parts if x.strip())


def parse_extent(text) -> list[tuple[float, float]]:
    """``"0:1,0:2"`` (one ``lo:hi`` per axis)."""
    if isinstance(text, (list, tuple)):
        return [tuple(map(float, e)) for e in text]
    out = []
    for part in str(text).split(","):
        lo, _, hi = part.partition(":")
        out.append((_number(lo), _number(hi)))
    return out


def parse_sweep(text) -> tuple[str, list[float]]:
    """``"beta=1/4,1/8"`` -> ("beta", [0.25, 0.125])."""
    if not text:
        return "", []
    name, eq, values = str(text).partition("=")
    if not eq:
        return name.strip(), []
    return name.strip(), parse_list(values)


def parse_box(text: str) -> list[tuple[int, int]]:
    """``"0:4,2:3"`` half-open cell ranges."""
    out = []
    for part in text.split(","):
        a, _, b = part.partition(":")
        out.append((int(a), int(b)))
    return out


# -- argument parser -----------------------------------------------------------------


def _common(sp: argparse.ArgumentParser, gen: str | None = "two_level", basis: str | None = "intervals"):
    sp.add_argument("--config", help="JSON file whose keys mirror the long flags")
    sp.add_argument("--gen", default=None, help=f"generator spec (default {gen})")
    sp.add_argument("--cells", default=None, help="cells per axis, e.g. 64 or 12x12")
    sp.add_argument("--extent", default=None, help="lo:hi per axis, e.g. 0:1,0:1 (default unit box)")
    sp.add_argument("--basis", default=None, help=f"basis spec (default {basis})")
    sp.add_argument("--p", default=None, help="exponent list, e.g. 1,2,4")
    sp.add_argument("--seed", default=None, type=int, help="seed for random generators and sampled bases")
    sp.add_argument("--out", default=None, help="write the table here (.csv or .json)")
    sp.add_argument("--tol", default=None, help="tolerance overrides, e.g. slack=1e-8")
    sp.add_argument("--sweep", default=None, help="sweep parameter, e.g. beta=1/4,1/8")
    sp.set_defaults(_gen=gen, _basis=basis)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oscillab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("osc", help="oscillation quantities on one shape")
    _common(sp)
    sp.add_argument("--box", default=None, help="half-open cell ranges, e.g. 0:4,2:3 (default whole domain)")
    sp = sub.add_parser("norm", help="supremum scan of p-oscillations over a basis")
    _common(sp)
    sp.add_argument("--method", default="auto", choices=("auto", "moments", "levels", "direct"))
    sp = sub.add_parser("rearrange", help="distribution table, rearrangements and norm comparisons")
    _common(sp)
    sp.add_argument("--table", default="signed", choices=("signed", "decreasing", "distribution"),
                    help="which table to emit")
    sp = sub.add_parser("transform", help="shapewise ratio of a pointwise transform")
    _common(sp)
    sp.add_argument("--transform", default="abs", help="abs, trunc_above:k=1, holder_power:alpha=0.5,L=1 ...")
    sp = sub.add_parser("jn", help="tail curve, envelope sweep and reference constants")
    _common(sp, gen="log_reciprocal")
    sp.add_argument("--levels", default=None, help="tail levels, e.g. 0,0.5,1 (default breakpoints)")
    sp.add_argument("--reference", action="store_true", help="print the reference constant table")
    sp = sub.add_parser("cinfty", help="sup-norm embedding constant for intervals")
    _common(sp, gen=None, basis=None)
    sp = sub.add_parser("product", help="slice norms and decomposition bounds")
    _common(sp, gen="random_step(levels=0)", basis="rectangles")
    sp.add_argument("--groups", default=None, help="axes per factor, e.g. 1,1 (default one axis each)")
    sp.add_argument("--weak", action="store_true", help="weak split (cubes); only the upper bound is checked")
    sp = sub.add_parser("sharpness", help="sharpness sweeps: beta, cinfty or kozlov")
    _common(sp, gen=None)
    sp = sub.add_parser("verify-all", help="run the acceptance checks")
    sp.add_argument("--only", default=None, help="comma-separated check ids (default all)")
    sp.add_argument("--out", default=None)
    return ap


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    path = getattr(args, "config", None)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        for key, value in data.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr) or attr.startswith("_") or attr in ("command", "config"):
                raise ConfigError(f"unknown config key {key!r}")
            if getattr(args, attr) in (None, False):
                setattr(args, attr, value)
    return args


# -- experiment context -----------------------------------------------------------------


class Context:
    """Validated configuration shared by the subcommands."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.tol = TOL.override(args.tol) if getattr(args, "tol", None) else TOL
        self.ps = parse_list(args.p) if getattr(args, "p", None) is not None else [1.0]
        self.sweep = parse_sweep(getattr(args, "sweep", None))

    def domain(self, default_cells=(64,)):
        cells = parse_cells(self.args.cells) if self.args.cells else tuple(default_cells)
        if self.args.extent:
            return make_domain(parse_extent(self.args.extent), cells)
        return unit_domain(*cells)

    def function(self, default_cells=(64,)):
        text = self.args.gen or self.args._gen
        spec = parse_generator(text)
        if spec.name == "random_step" and "seed" not in spec.params:
            if self.args.seed is None:
                raise ConfigError("random_step needs a seed (--seed or seed=...)")
            spec.params["seed"] = self.args.seed
        return generate(spec, self.domain(default_cells))

    def basis(self, default=None):
        text = self.args.basis or default or self.args._basis
        spec = parse_basis(_basis_text(text, self.args.seed))
        if spec.policy == "sampled" and spec.seed is None:
            raise ConfigError("sampled policy needs a seed")
        return spec


def _basis_text(text: str, seed) -> str:
    # sampled bases take their seed from --seed when not given inline
    if "sampled" in text and "seed" not in text and seed is not None:
        return f"{text},seed={seed}"
    return text


# -- subcommands -------------------------------------------------------------------------


def cmd_osc(ctx: Context):
    f = ctx.function()
    S = box(f.domain, parse_box(ctx.args.box)) if ctx.args.box else whole(f.domain)
    header = ("p", "shape", "mean", "median", "osc", "osc_double", "inf_const", "argmin")
    rows = []
    for p in ctx.ps:
        inf, c = osc_inf_const(f, S, p)
        o, dd = float(osc_p(f, S, p)), osc_double(f, S, p)
        rows.append((p, S.describe(), float(f.values[S.index].mean()), median(f, S), o, dd, inf, c))
        if not (dd / 2 <= o * (1 + ctx.tol.rel) + ctx.tol.rel and o <= dd * (1 + ctx.tol.rel) + ctx.tol.rel):
            raise CheckFailed(f"double-integral sandwich failed at p={p}: osc={o}, double={dd}")
    return header, rows, None


def cmd_norm(ctx: Context):
    f = ctx.function()
    spec = ctx.basis()
    reports = [bmo_norm(f, spec, p, method=ctx.args.method) for p in ctx.ps]
    rows = [r.csv_row() for r in reports]
    summary = "\n".join(repr(float(r.norm)) for r in reports)
    return NormReport.CSV_HEADER, rows, summary


def cmd_rearrange(ctx: Context):
    f = ctx.function()
    fo, fs = rearrange.signed_rearrangement(f), rearrange.decreasing_rearrangement(f)
    for p in (1.0, 2.0, math.inf):
        a, b = fs.lp_norm(p), f.lp_norm(p)
        if abs(a - b) > ctx.tol.rel * max(1.0, b):
            raise CheckFailed(f"Lp isometry failed at p={p}: {a} vs {b}")
    if not rearrange.equimeasurable(f, fo, signed=True):
        raise CheckFailed("f and its signed rearrangement are not equimeasurable")
    summary = []
    if ctx.args.basis:
        spec = ctx.basis()
        for p in ctx.ps:
            base = bmo_norm(f, spec, p).norm
            for label, g, b in (("signed", fo, "intervals"), ("decreasing", fs, "intervals"),
                                ("abs", f.with_values(np.abs(f.values)), str(spec))):
                n = bmo_norm(g, b, p).norm
                summary.append(f"p={p!r} {label}: {n!r} vs {base!r}")
                if p == 1 and n > base * (1 + ctx.tol.slack):
                    raise CheckFailed(f"rearrangement inequality ({label}) failed: {n} > {base}")
    kind = ctx.args.table
    if kind == "distribution":
        table = rearrange.distribution(f, signed=True)
        rows = [(float(s), float(m)) for s, m in zip(table.thresholds, table.measures)]
        return ("threshold", "measure_above"), rows, "\n".join(summary) or None
    g = fo if kind == "signed" else fs
    text = rearrange.rearrangement_csv(g)
    rows = [tuple(r) for r in csv.reader(io.StringIO(text))]
    return tuple(rows[0]), rows[1:], "\n".join(summary) or None


def cmd_transform(ctx: Context):
    spec = transforms.parse_transform(ctx.args.transform)
    name, values = ctx.sweep
    basis = str(ctx.basis())
    if name == "beta":
        cells = parse_cells(ctx.args.cells)[0] if ctx.args.cells else 512
        betas = values or [2.0 ** -j for j in range(2, 9)]
        rows = []
        for p in ctx.ps:
            for beta, rep in transforms.beta_sweep(spec, p, cells, betas, basis):
                rows.append((p, beta, rep.ratio, rep.argmax.describe(), rep.skipped))
        return ("p", "beta", "ratio", "argmax", "skipped"), rows, None
    f = ctx.function()
    if name == "k":
        M = f.sup_norm()
        ks = values or list(np.linspace(M / 10, M, 10))
        rows = []
        for p in ctx.ps:
            base = bmo_norm(f, basis, p).norm
            for k in ks:
                n = bmo_norm(transforms.apply(transforms.trunc_full(k), f), basis, p).norm
                rows.append((p, float(k), n, base))
                if p in (1, 2) and n > base * (1 + ctx.tol.slack):
                    raise CheckFailed(f"truncation norm bound failed at k={k}: {n} > {base}")
        return ("p", "k", "norm_truncated", "norm"), rows, None
    rows = []
    for p in ctx.ps:
        rep = transforms.shapewise_ratio(spec, f, basis, p)
        rows.append((str(spec), p, rep.ratio, rep.argmax.describe(), rep.considered, rep.skipped))
        if spec.kind.startswith("trunc") and p in (1, 2) and rep.ratio > 1 + ctx.tol.rel:
            raise CheckFailed(f"truncation shapewise bound failed: ratio {rep.ratio}")
    return ("transform", "p", "ratio", "argmax", "considered", "skipped"), rows, None


def cmd_jn(ctx: Context):
    if ctx.args.reference:
        data = [r.__dict__ for r in jn.reference_constants()]
        rows = [(r["name"], r["p"], r["basis"], r["value"], r["expression"], r["role"]) for r in data]
        return ("name", "p", "basis", "value", "expression", "role"), rows, None
    f = ctx.function(default_cells=(4096,))
    levels = parse_list(ctx.args.levels) if ctx.args.levels else None
    curve = jn.tail_curve(f, None, levels)
    name, values = ctx.sweep
    if name == "c2":
        rows = []
        for env in jn.pareto_sweep(curve, values or [0.25, 0.5, 2 / math.e, 1.0]):
            if not env.valid:
                raise CheckFailed(f"envelope invalid at c2={env.c2}")
            for p in ctx.ps:
                o = float(osc_p(f, whole(f.domain), p))
                b = jn.moment_bound(env.c1, env.c2, p)
                if o > b * (1 + ctx.tol.slack):
                    raise CheckFailed(f"moment bound failed: {o} > {b} (c2={env.c2}, p={p})")
                rows.append((env.c2, env.c1, p, o, b))
        return ("c2", "c1", "p", "osc", "moment_bound"), rows, None
    rows = [(float(a), float(t)) for a, t in zip(curve.levels, curve.values)]
    return ("level", "tail"), rows, None


def cmd_cinfty(ctx: Context):
    ps = ctx.ps if ctx.args.p is not None else [1.0, 2.0, 3.0, 10.0]
    vals = [jn.c_infty(p) for p in ps]
    rows = list(zip(ps, vals))
    return ("p", "c_infty"), rows, "\n".join(repr(v) for v in vals)


def cmd_product(ctx: Context):
    f = ctx.function(default_cells=(12, 12))
    nd = f.domain.ndim
    sizes = tuple(int(x) for x in parse_list(ctx.args.groups)) if ctx.args.groups else None
    kind = "cubes" if ctx.args.weak else (ctx.args.basis or "rectangles")
    split = product.split_axes(nd, sizes, kind=kind, strong=not ctx.args.weak)
    rows = []
    for p in ctx.ps:
        rep = product.decomposition_report(f, split, p, slack=ctx.tol.slack)
        rows.append(rep.csv_row())
        if not rep.bound_a:
            raise CheckFailed(f"upper decomposition bound failed at p={p}: margin {rep.margin_a}")
        if rep.bound_b is False:
            raise CheckFailed(f"lower decomposition bound failed at p={p}: margin {rep.margin_b}")
    return product.DecompositionReport.CSV_HEADER, rows, None


def cmd_sharpness(ctx: Context):
    name, values = ctx.sweep
    name = name or "cinfty"
    if name == "beta":
        betas = values or [2.0 ** -j for j in range(2, 9)]
        cells = parse_cells(ctx.args.cells)[0] if ctx.args.cells else 512
        d = unit_domain(cells)
        rows = []
        for beta in betas:
            f = generate(f"three_level(beta={beta!r})", d)
            o, dd = float(osc_p(f, whole(d), 1)), osc_double(f, whole(d), 1)
            rows.append((beta, o, dd, o / dd, 1 / (2 - 2 * beta)))
        return ("beta", "osc", "osc_double", "ratio", "predicted"), rows, None
    if name == "cinfty":
        cells = parse_cells(ctx.args.cells)[0] if ctx.args.cells else 1024
        fracs = values or [0.125, 0.25, 0.375, 0.5]
        d = unit_domain(cells)
        rows = []
        for p in ctx.ps:
            best, where = 0.0, None
            for h in fracs:
                f = generate(f"indicator(alpha={h!r})", d)
                f = f.with_values(2 * f.values - 1)
                rep = bmo_norm(f, "intervals", p)
                if rep.norm > best:
                    best, where = rep.norm, (h, rep.argmax.describe())
            rows.append((p, best, jn.c_infty(p), where[0], where[1]))
            if best > jn.c_infty(p) * (1 + ctx.tol.slack):
                raise CheckFailed(f"empirical value {best} exceeds c_infty({p})")
        return ("p", "empirical", "c_infty", "fraction", "argmax"), rows, None
    if name == "kozlov":
        Ns = [int(x) for x in values] if values else list(range(1, 7))
        cells = parse_cells(ctx.args.cells)[0] if ctx.args.cells else 64
        rows = []
        for p in ctx.ps:
            ratios = verify.kozlov_ratios(p, cells, Ns)
            rows.extend((p, N, r) for N, r in zip(Ns, ratios))
        return ("p", "N", "ratio"), rows, None
    raise ConfigError(f"unknown sharpness sweep {name!r} (beta, cinfty, kozlov)")


def cmd_verify_all(args) -> int:
    keys = [k.strip() for k in args.only.split(",")] if args.only else None
    if keys and any(k not in verify.CHECKS for k in keys):
        raise ConfigError(f"unknown check id in {args.only!r}")
    results = verify.run_all(keys)
    for r in results:
        print(r.line())
        for msg in r.failures[:5]:
            print(f"    {msg}")
    if args.out:
        rows = [(r.name, int(r.passed and r.in_time), r.margin, round(r.seconds, 3), r.limit) for r in results]
        _write(args.out, ("check", "passed", "margin", "seconds", "limit"), rows)
    failed = [r.name for r in results if not (r.passed and r.in_time)]
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return 1
    print(f"all {len(results)} checks passed")
    return 0


HANDLERS = {
    "osc": cmd_osc, "norm": cmd_norm, "rearrange": cmd_rearrange, "transform": cmd_transform,
    "jn": cmd_jn, "cinfty": cmd_cinfty, "product": cmd_product, "sharpness": cmd_sharpness,
}


# -- output -------------------------------------------------------------------------------


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _json_cell(x):
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def _write(path: str, header, rows):
    p = Path(path)
    if p.suffix == ".json":
        data = [dict(zip(header, (_json_cell(x) for x in row))) for row in rows]
        p.write_text(json.dumps(data, indent=2) + "\n")
    else:
        p.write_text(_csv_text(header, rows))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "verify-all":
            return cmd_verify_all(args)
        args = _merge_config(args)
        ctx = Context(args)
        header, rows, summary = HANDLERS[args.command](ctx)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, GridError, ShapeError, OscillationError, transforms.TransformError,
            product.ProductError, rearrange.RearrangeError, jn.JNError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        _write(args.out, header, rows)
    if summary is not None:
        print(summary)
    elif not args.out:
        sys.stdout.write(_csv_text(header, rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())
