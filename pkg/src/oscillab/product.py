"""Slicewise norms on product domains and the two-sided decomposition bounds."""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, replace

import numpy as np

from .config import TOL
from .grid import GridFunction
from .oscillation import NormReport, OscillationError, bmo_norm
from .shapes import BasisSpec, box, parse_basis

BOX_KINDS = ("intervals", "rectangles", "cubes", "dyadic")


class ProductError(ValueError):
    """Invalid split, group index or an unsupported bound request."""


@dataclass(frozen=True)
class FactorSplit:
    """Partition of the axes into contiguous groups, each with its own basis.

    ``strong`` means the domain basis is exactly the products of factor shapes
    (rectangles over rectangles); ``weak`` means only that every shape is such
    a product (cubes over rectangles). ``basis`` is the basis of the whole
    domain; by default rectangles when strong, cubes when weak.
    """

    groups: tuple[tuple[int, ...], ...]
    kinds: tuple[str, ...]
    strong: bool = True
    basis: str | None = None

    def __post_init__(self):
        if len(self.groups) < 2:
            raise ProductError("a split needs at least two factors")
        if len(self.kinds) != len(self.groups):
            raise ProductError("one basis kind per factor")
        axes = [a for g in self.groups for a in g]
        if axes != list(range(len(axes))):
            raise ProductError(f"groups {self.groups} must be contiguous and cover the axes in order")
        for k in self.kinds:
            if parse_basis(k).kind not in BOX_KINDS:
                raise ProductError(f"factor basis {k!r} must be a box basis")
        if self.strong and any(parse_basis(k).kind not in ("intervals", "rectangles") for k in self.kinds):
            raise ProductError("the strong property needs rectangle factors")
        if self.basis is None:
            object.__setattr__(self, "basis", "rectangles" if self.strong else "cubes")

    @property
    def k(self) -> int:
        return len(self.groups)

    @property
    def ndim(self) -> int:
        return sum(len(g) for g in self.groups)

    def to_dict(self) -> dict:
        return {"groups": [list(g) for g in self.groups], "kinds": list(self.kinds),
                "strong": self.strong, "basis": self.basis}


def split_axes(ndim: int, sizes=None, kind: str = "rectangles", strong: bool = True) -> FactorSplit:
    """Split ``ndim`` axes into contiguous groups of the given ``sizes`` (default one axis each)."""
    sizes = sizes or (1,) * ndim
    if sum(sizes) != ndim:
        raise ProductError(f"group sizes {sizes} do not add up to {ndim}")
    bounds = np.cumsum((0,) + tuple(sizes))
    groups = tuple(tuple(range(bounds[i], bounds[i + 1])) for i in range(len(sizes)))
    return FactorSplit(groups, (kind,) * len(groups), strong)


def _factor_basis(kind: str, naxes: int) -> BasisSpec:
    spec = parse_basis(kind)
    if naxes == 1 and spec.kind in ("rectangles", "cubes"):
        return replace(spec, kind="intervals")
    return spec


def slice_norm(f: GridFunction, split: FactorSplit, i: int, p: float) -> NormReport:
    """Largest norm of the restrictions of ``f`` to the lattice slices along factor ``i``.

    The returned arg-max shape is the factor shape lifted into the whole
    domain (one cell thick along the other axes); ``note`` names the slice.
    """
    if split.ndim != f.domain.ndim:
        raise ProductError("split does not match the domain dimension")
    if not 0 <= i < split.k:
        raise ProductError(f"group index {i} out of range 0..{split.k - 1}")
    axes = split.groups[i]
    others = [a for a in range(f.domain.ndim) if a not in axes]
    sub = f.domain.subdomain(axes)
    basis = _factor_basis(split.kinds[i], len(axes))
    moved = np.moveaxis(f.values, others, list(range(len(others))))
    best = None
    visited = 0
    for y in itertools.product(*(range(f.domain.cells[a]) for a in others)):
        rep = bmo_norm(GridFunction(sub, moved[y]), basis, p)
        visited += rep.visited
        if best is None or rep.norm > best[0].norm:
            best = (rep, y)
    rep, y = best
    ranges = [None] * f.domain.ndim
    for a, r in zip(axes, rep.argmax.ranges):
        ranges[a] = r
    for a, c in zip(others, y):
        ranges[a] = (c, c + 1)
    lifted = box(f.domain, ranges)
    note = "slice " + ",".join(f"x{a}={c}" for a, c in zip(others, y))
    return NormReport(float(p), basis, rep.norm, lifted, visited, basis.policy, rep.method, note)


@dataclass
class DecompositionReport:
    """Whole-domain norm against the factor slice norms."""

    k: int
    p: float
    split: FactorSplit
    norm: float
    slice_norms: list[float]
    bound_a: bool
    margin_a: float
    bound_b: bool | None
    margin_b: float | None
    constant_b: float | None

    def to_dict(self) -> dict:
        return {
            "k": self.k, "p": self.p, "split": self.split.to_dict(), "norm": self.norm,
            "slice_norms": self.slice_norms, "bound_a": self.bound_a, "margin_a": self.margin_a,
            "bound_b": self.bound_b, "margin_b": self.margin_b, "constant_b": self.constant_b,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    CSV_HEADER = ("k", "p", "norm", "slice_norms", "bound_a", "margin_a", "bound_b", "margin_b")

    def csv_row(self) -> list:
        return [self.k, repr(self.p), repr(self.norm), ";".join(repr(s) for s in self.slice_norms),
                int(self.bound_a), repr(self.margin_a),
                "" if self.bound_b is None else int(self.bound_b),
                "" if self.margin_b is None else repr(self.margin_b)]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(self.CSV_HEADER)
        w.writerow(self.csv_row())
        return buf.getvalue()


def _holds(lhs: float, rhs: float, slack: float) -> bool:
    return lhs <= rhs + slack * max(abs(lhs), abs(rhs))


def decomposition_report(f: GridFunction, split: FactorSplit, p: float, check_b: bool | None = None,
                         slack: float = TOL.slack) -> DecompositionReport:
    """Check ``norm <= sum of slice norms`` and, on strong splits,
    ``max slice norm <= 2^(k-1) norm`` (constant 1 when p = 2).

    Margins are ``rhs - lhs``; ``check_b`` defaults to the split's strong flag.
    """
    if check_b is None:
        check_b = split.strong
    if check_b and not split.strong:
        raise ProductError("the lower bound needs a split with the strong decomposition property")
    try:
        norm = bmo_norm(f, split.basis, p).norm
    except OscillationError as exc:
        raise ProductError(str(exc)) from exc
    slices = [slice_norm(f, split, i, p).norm for i in range(split.k)]
    total = float(sum(slices))
    ok_a = _holds(norm, total, slack)
    ok_b = margin_b = const = None
    if check_b:
        const = 1.0 if p == 2 else float(2 ** (split.k - 1))
        ok_b = _holds(max(slices), const * norm, slack)
        margin_b = const * norm - max(slices)
    return DecompositionReport(split.k, float(p), split, norm, slices, ok_a, total - norm, ok_b, margin_b, const)
