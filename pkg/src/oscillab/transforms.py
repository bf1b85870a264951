"""Pointwise operators (absolute value, lattice max/min, truncations, power
maps) and harnesses comparing shapewise oscillations before and after."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import GridFunction, generate, unit_domain
from .shapes import BasisSpec, Shape, ShapeError, family, parse_basis

SKIP_BELOW = 1e-14


class TransformError(ValueError):
    """Bad transform parameters, domain mismatch or an all-skipped ratio scan."""


KINDS = ("abs", "max_with", "min_with", "trunc_above", "trunc_below", "trunc_full", "holder_power")


@dataclass(frozen=True)
class TransformSpec:
    """A pointwise operator.

    ``trunc_above(k)`` is ``min(f, k)``, ``trunc_below(j)`` is ``max(f, j)``,
    ``trunc_full(k)`` clamps to ``[-k, k]``, ``holder_power(alpha, L)`` is
    ``L sign(x) |x|^alpha``. ``max_with``/``min_with`` take a second function.
    """

    kind: str
    k: float | None = None
    alpha: float | None = None
    L: float | None = None
    g: GridFunction | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TransformError(f"unknown transform {self.kind!r}")
        if self.kind in ("max_with", "min_with") and self.g is None:
            raise TransformError(f"{self.kind} needs a second function")
        if self.kind.startswith("trunc") and (self.k is None or not math.isfinite(self.k)):
            raise TransformError(f"{self.kind} needs a finite level")
        if self.kind == "trunc_full" and self.k < 0:
            raise TransformError("trunc_full needs k >= 0")
        if self.kind == "holder_power":
            if self.alpha is None or not 0 < self.alpha <= 1:
                raise TransformError("holder_power needs alpha in (0, 1]")
            if self.L is None or not self.L > 0:
                raise TransformError("holder_power needs L > 0")

    def __str__(self):
        if self.kind == "abs":
            return "abs"
        if self.kind in ("max_with", "min_with"):
            return f"{self.kind}(g)"
        if self.kind == "holder_power":
            return f"holder_power(alpha={self.alpha!r},L={self.L!r})"
        return f"{self.kind}(k={self.k!r})"

    @property
    def holder_coefficient(self) -> float:
        """Global Hoelder coefficient of the power map on the real line.

        ``|sign(x)|x|^a - sign(y)|y|^a| <= 2^(1-a) |x - y|^a``, equality at ``y = -x``.
        """
        if self.kind != "holder_power":
            raise TransformError("only holder_power has a Hoelder coefficient")
        return self.L * 2.0 ** (1.0 - self.alpha)


def abs_() -> TransformSpec:
    return TransformSpec("abs")


def max_with(g: GridFunction) -> TransformSpec:
    return TransformSpec("max_with", g=g)


def min_with(g: GridFunction) -> TransformSpec:
    return TransformSpec("min_with", g=g)


def trunc_above(k: float) -> TransformSpec:
    return TransformSpec("trunc_above", k=float(k))


def trunc_below(j: float) -> TransformSpec:
    return TransformSpec("trunc_below", k=float(j))


def trunc_full(k: float) -> TransformSpec:
    return TransformSpec("trunc_full", k=float(k))


def holder_power(alpha: float, L: float = 1.0) -> TransformSpec:
    return TransformSpec("holder_power", alpha=float(alpha), L=float(L))


def parse_transform(text: str) -> TransformSpec:
    """Parse ``abs``, ``trunc_above:k=1``, ``trunc_full(k=2)``, ``holder_power:alpha=0.5,L=1``."""
    text = text.strip()
    name, params = text, ""
    for open_, close in ((":", ""), ("(", ")")):
        if open_ in text:
            name, _, params = text.partition(open_)
            if close:
                params = params.rstrip(close)
            break
    kw = {}
    for part in filter(None, (s.strip() for s in params.split(","))):
        key, eq, value = part.partition("=")
        if not eq:
            raise TransformError(f"bad transform parameter {part!r}")
        kw[key.strip()] = float(value)
    name = name.strip()
    if name == "abs" and not kw:
        return abs_()
    if name in ("trunc_above", "trunc_full") and set(kw) == {"k"}:
        return TransformSpec(name, k=kw["k"])
    if name == "trunc_below" and set(kw) <= {"j", "k"} and len(kw) == 1:
        return trunc_below(next(iter(kw.values())))
    if name == "holder_power" and "alpha" in kw and set(kw) <= {"alpha", "L"}:
        return holder_power(kw["alpha"], kw.get("L", 1.0))
    raise TransformError(f"cannot parse transform {text!r}")


def apply(spec: TransformSpec, f: GridFunction) -> GridFunction:
    """Apply ``spec`` cellwise."""
    v = f.values
    kind = spec.kind
    if kind in ("max_with", "min_with"):
        if spec.g.domain != f.domain:
            raise TransformError("second function lives on a different domain")
        out = np.maximum(v, spec.g.values) if kind == "max_with" else np.minimum(v, spec.g.values)
    elif kind == "abs":
        out = np.abs(v)
    elif kind == "trunc_above":
        out = np.minimum(v, spec.k)
    elif kind == "trunc_below":
        out = np.maximum(v, spec.k)
    elif kind == "trunc_full":
        out = np.maximum(np.minimum(v, spec.k), -spec.k)
    else:
        out = spec.L * np.sign(v) * np.abs(v) ** spec.alpha
    return f.with_values(out)


# -- ratio harness ----------------------------------------------------------------


@dataclass
class RatioReport:
    """Largest shapewise ratio ``osc_p(T f, S) / osc_p(f, S)`` over a basis."""

    transform: str
    p: float
    ratio: float
    argmax: Shape
    considered: int
    skipped: int


def shapewise_ratio(spec: TransformSpec, f: GridFunction, basis: BasisSpec | str, p: float) -> RatioReport:
    """Scan every shape of ``basis`` and report the largest oscillation ratio.

    Shapes on which ``f`` oscillates by at most ``1e-14`` are skipped and counted.
    """
    if isinstance(basis, str):
        basis = parse_basis(basis)
    try:
        fam = family(basis, f.domain)
    except ShapeError as exc:
        raise TransformError(str(exc)) from exc
    Tf = apply(spec, f)
    selected = fam.selected_indices()
    src = dict(kernels.iter_group_values(f.values, fam, p, "direct"))
    dst = dict(kernels.iter_group_values(Tf.values, fam, p, "direct"))
    best, best_index, considered, skipped = -math.inf, -1, 0, 0
    for g in range(len(fam.groups)):
        a, b = src[g], dst[g]
        base = fam.group_index_base(g)
        if selected is not None:
            local = selected[(selected >= base) & (selected < base + a.size)] - base
            a, b = a[local], b[local]
        else:
            local = None
        ok = a > SKIP_BELOW
        skipped += int(a.size - np.count_nonzero(ok))
        considered += int(np.count_nonzero(ok))
        if not ok.any():
            continue
        r = np.where(ok, b / np.where(ok, a, 1.0), -math.inf)
        i = int(np.argmax(r))
        if r[i] > best:
            best = float(r[i])
            best_index = base + (i if local is None else int(local[i]))
    if considered == 0:
        raise TransformError("every shape was skipped (source oscillation vanishes)")
    return RatioReport(str(spec), float(p), best, fam[best_index], considered, skipped)


def beta_sweep(spec: TransformSpec = None, p: float = 1.0, cells: int = 512,
               betas=tuple(2.0 ** -j for j in range(2, 9)), basis: str = "intervals") -> list[tuple[float, RatioReport]]:
    """Ratio reports of ``spec`` (default ``abs``) on three-level functions for each ``beta``."""
    spec = spec or abs_()
    dom = unit_domain(cells)
    out = []
    for beta in betas:
        f = generate(f"three_level(beta={beta!r})", dom)
        out.append((beta, shapewise_ratio(spec, f, basis, p)))
    return out


def sweep_csv(rows, label: str = "beta") -> str:
    """CSV of ``(parameter, ratio, argmax shape)`` rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((label, "ratio", "argmax"))
    for x, rep in rows:
        w.writerow((repr(float(x)), repr(float(rep.ratio)), rep.argmax.describe()))
    return buf.getvalue()
