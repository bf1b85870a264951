"""Shapes, shape bases and comparability constants.

A basis is materialized lazily as a *family*: an indexable, deterministic
sequence of shapes ordered lexicographically by (size, anchor). Families are
organized in groups of equal size so that scan kernels can vectorize over
all anchors of one size at once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .grid import Domain


class ShapeError(ValueError):
    """Invalid shape, basis description or basis/domain combination."""


KIND_ALIASES = {
    "intervals": "intervals", "I": "intervals", "interval": "intervals",
    "cubes": "cubes", "Q": "cubes", "cube": "cubes", "squares": "cubes",
    "rectangles": "rectangles", "R": "rectangles", "rect": "rectangles",
    "balls": "balls", "B": "balls", "ball": "balls",
    "centered_balls": "centered_balls", "C": "centered_balls",
    "dyadic": "dyadic", "Qd": "dyadic",
}
BASIS_KINDS = ("intervals", "cubes", "rectangles", "balls", "centered_balls", "dyadic")


@dataclass(frozen=True)
class Shape:
    """One member of a basis.

    Boxes carry half-open cell ranges per axis. Ball masks carry a physical
    center, a physical radius and the explicit list of included cells (cells
    whose centers lie within the radius).
    """

    kind: str
    measure: float
    ranges: tuple[tuple[int, int], ...] | None = None
    center: tuple[float, ...] | None = None
    radius: float | None = None
    cells: tuple[tuple[int, ...], ...] | None = None

    @property
    def ncells(self) -> int:
        if self.kind == "box":
            return int(np.prod([b - a for a, b in self.ranges]))
        return len(self.cells)

    @property
    def index(self):
        """Numpy index selecting the shape's cells from a value array."""
        if self.kind == "box":
            return tuple(slice(a, b) for a, b in self.ranges)
        return tuple(np.array(c) for c in zip(*self.cells))

    def mask(self, domain: Domain) -> np.ndarray:
        m = np.zeros(domain.cells, dtype=bool)
        m[self.index] = True
        return m

    def cell_set(self) -> frozenset:
        if self.kind == "box":
            return frozenset(itertools.product(*(range(a, b) for a, b in self.ranges)))
        return frozenset(self.cells)

    def describe(self) -> str:
        """Compact coordinates, e.g. ``box[0:4,2:3]`` or ``ball(c=(0.5,0.5),r=0.25)``."""
        if self.kind == "box":
            return "box[" + ",".join(f"{a}:{b}" for a, b in self.ranges) + "]"
        c = ",".join(f"{x:.12g}" for x in self.center)
        return f"ball(c=({c}),r={self.radius:.12g},n={len(self.cells)})"

    def to_dict(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "ranges": [list(r) for r in self.ranges], "measure": self.measure}
        return {
            "kind": "ball_mask", "center": list(self.center), "radius": self.radius,
            "cells": [list(c) for c in self.cells], "measure": self.measure,
        }


def box(domain: Domain, ranges: Sequence[Sequence[int]]) -> Shape:
    """Box shape from half-open cell ranges; validates containment."""
    if len(ranges) != domain.ndim:
        raise ShapeError("one range per axis required")
    rr = []
    for (a, b), m in zip(ranges, domain.cells):
        a, b = int(a), int(b)
        if not 0 <= a < b <= m:
            raise ShapeError(f"range [{a},{b}) not a nonempty subrange of [0,{m})")
        rr.append((a, b))
    n = int(np.prod([b - a for a, b in rr]))
    return Shape("box", n * domain.cell_measure, ranges=tuple(rr))


def whole(domain: Domain) -> Shape:
    """The whole domain as a box shape."""
    return box(domain, [(0, m) for m in domain.cells])


def ball_mask(domain: Domain, center: Sequence[float], radius: float) -> Shape:
    """Cells whose centers lie within ``radius`` of ``center`` (closed ball)."""
    grids = np.meshgrid(*(domain.centers(a) for a in range(domain.ndim)), indexing="ij")
    d2 = sum((g - c) ** 2 for g, c in zip(grids, center))
    inside = np.argwhere(d2 <= radius * radius * (1 + 1e-12) + 1e-300)
    if len(inside) == 0:
        raise ShapeError("empty ball mask")
    cells = tuple(tuple(int(i) for i in row) for row in inside)
    return Shape("ball_mask", len(cells) * domain.cell_measure,
                 center=tuple(float(c) for c in center), radius=float(radius), cells=cells)


# -- basis descriptions -----------------------------------------------------------


@dataclass(frozen=True)
class BasisSpec:
    """Declarative shape family.

    ``min_side``/``max_side`` bound every side (boxes) or the diameter in cells
    (ball masks). ``policy`` is ``"exhaustive"`` or ``"sampled"``; sampling
    draws ``count`` distinct members uniformly with ``seed``.
    """

    kind: str = "rectangles"
    min_side: int = 1
    max_side: int | None = None
    policy: str = "exhaustive"
    count: int | None = None
    seed: int | None = None

    def __post_init__(self):
        kind = KIND_ALIASES.get(self.kind)
        if kind is None:
            raise ShapeError(f"unknown basis kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.policy not in ("exhaustive", "sampled"):
            raise ShapeError(f"unknown policy {self.policy!r}")
        if self.policy == "sampled" and (self.count is None or self.count < 1 or self.seed is None):
            raise ShapeError("sampled policy needs count >= 1 and a seed")
        if self.min_side < 1 or (self.max_side is not None and self.max_side < self.min_side):
            raise ShapeError("invalid side limits")

    def __str__(self):
        parts = [self.kind]
        opts = []
        if self.policy == "sampled":
            opts.append(f"sampled={self.count},seed={self.seed}")
        else:
            opts.append("exhaustive")
        if self.min_side != 1:
            opts.append(f"minside={self.min_side}")
        if self.max_side is not None:
            opts.append(f"maxside={self.max_side}")
        return parts[0] + ":" + ",".join(opts)

    @property
    def sampled(self) -> bool:
        return self.policy == "sampled"


def parse_basis(text: str) -> BasisSpec:
    """Parse ``"rectangles:exhaustive"``, ``"balls:sampled=10000,seed=42"``, ``"cubes:minside=2"``."""
    kind, _, rest = text.strip().partition(":")
    kw: dict = {"kind": kind.strip()}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        key = key.strip().lower().replace("_", "")
        try:
            if key == "exhaustive":
                kw["policy"] = "exhaustive"
            elif key == "sampled":
                kw["policy"] = "sampled"
                kw["count"] = int(value)
            elif key == "seed":
                kw["seed"] = int(value)
            elif key == "minside":
                kw["min_side"] = int(value)
            elif key == "maxside":
                kw["max_side"] = int(value)
            else:
                raise ShapeError(f"unknown basis option {item!r}")
        except ValueError as exc:
            raise ShapeError(f"bad basis option {item!r}") from exc
    return BasisSpec(**kw)


# -- families ----------------------------------------------------------------------


@dataclass
class BoxGroup:
    """All boxes of one size; anchors form a grid (strided for dyadic cubes)."""

    sizes: tuple[int, ...]
    stride: tuple[int, ...]
    anchors: tuple[int, ...]

    @property
    def count(self) -> int:
        return int(np.prod(self.anchors))

    def ranges_at(self, local: int) -> tuple[tuple[int, int], ...]:
        pos = np.unravel_index(local, self.anchors)
        return tuple((int(p) * s, int(p) * s + k) for p, s, k in zip(pos, self.stride, self.sizes))


@dataclass
class BallGroup:
    """All ball masks of one radius; ``offsets`` are cell offsets from the anchor."""

    radius: float
    offsets: np.ndarray
    lo: tuple[int, ...]
    anchors: tuple[int, ...]
    fixed_center: tuple[float, ...] | None = None

    @property
    def count(self) -> int:
        return int(np.prod(self.anchors))

    def anchor_at(self, local: int) -> tuple[int, ...]:
        pos = np.unravel_index(local, self.anchors)
        return tuple(int(p) + l for p, l in zip(pos, self.lo))


@dataclass
class Family:
    """Deterministic, indexable sequence of the shapes of a basis on a domain."""

    spec: BasisSpec
    domain: Domain
    groups: list
    covering: bool = True
    _offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        counts = np.array([g.count for g in self.groups], dtype=np.int64)
        self._offsets = np.concatenate([[0], np.cumsum(counts)])

    @property
    def is_box(self) -> bool:
        return bool(self.groups) and isinstance(self.groups[0], BoxGroup)

    def __len__(self) -> int:
        return int(self._offsets[-1])

    def locate(self, index: int) -> tuple[int, int]:
        if not 0 <= index < len(self):
            raise IndexError(index)
        g = int(np.searchsorted(self._offsets, index, side="right") - 1)
        return g, int(index - self._offsets[g])

    def shape_in_group(self, g: int, local: int) -> Shape:
        grp = self.groups[g]
        if isinstance(grp, BoxGroup):
            return box(self.domain, grp.ranges_at(local))
        anchor = np.array(grp.anchor_at(local))
        idx = grp.offsets + anchor
        cells = tuple(tuple(int(i) for i in row) for row in idx)
        if grp.fixed_center is not None:
            center = grp.fixed_center
        else:
            center = tuple(float(self.domain.centers(a)[anchor[a]]) for a in range(self.domain.ndim))
        return Shape("ball_mask", len(cells) * self.domain.cell_measure,
                     center=center, radius=grp.radius, cells=cells)

    def __getitem__(self, index: int) -> Shape:
        return self.shape_in_group(*self.locate(int(index)))

    def __iter__(self) -> Iterator[Shape]:
        return self.iter_range(0, len(self))

    def iter_range(self, start: int, stop: int) -> Iterator[Shape]:
        """Shapes with global indices in ``[start, stop)``; disjoint ranges split the stream."""
        for i in range(max(0, start), min(stop, len(self))):
            yield self[i]

    def group_index_base(self, g: int) -> int:
        return int(self._offsets[g])

    def selected_indices(self) -> np.ndarray | None:
        """Sorted global indices drawn by a sampled policy, ``None`` when exhaustive."""
        if not self.spec.sampled:
            return None
        total = len(self)
        if self.spec.count > total:
            raise ShapeError(f"sampled count {self.spec.count} exceeds family size {total}")
        rng = np.random.default_rng(self.spec.seed)
        return np.sort(rng.choice(total, size=self.spec.count, replace=False))


def _ranges_ok(k: int, spec: BasisSpec) -> bool:
    return k >= spec.min_side and (spec.max_side is None or k <= spec.max_side)


def _anchor_counts(domain: Domain, sizes, stride) -> tuple[int, ...]:
    return tuple((m - k) // s + 1 for m, k, s in zip(domain.cells, sizes, stride))


def _rectangle_groups(domain: Domain, spec: BasisSpec) -> list[BoxGroup]:
    per_axis = [[k for k in range(1, m + 1) if _ranges_ok(k, spec)] for m in domain.cells]
    ones = (1,) * domain.ndim
    return [BoxGroup(s, ones, _anchor_counts(domain, s, ones)) for s in itertools.product(*per_axis)]


def _cube_groups(domain: Domain, spec: BasisSpec) -> list[BoxGroup]:
    w = domain.widths
    ones = (1,) * domain.ndim
    groups = []
    for k0 in range(1, domain.cells[0] + 1):
        side = k0 * w[0]
        sizes = [k0]
        for a in range(1, domain.ndim):
            k = side / w[a]
            ki = int(round(k))
            if abs(k - ki) > 1e-9 * max(1.0, k) or ki < 1 or ki > domain.cells[a]:
                break
            sizes.append(ki)
        else:
            if all(_ranges_ok(k, spec) for k in sizes):
                groups.append(BoxGroup(tuple(sizes), ones, _anchor_counts(domain, sizes, ones)))
    groups.sort(key=lambda g: g.sizes)
    return groups


def _dyadic_groups(domain: Domain, spec: BasisSpec) -> list[BoxGroup]:
    groups = []
    j = 0
    while all(m % (2 ** j) == 0 for m in domain.cells):
        sizes = tuple(m // 2 ** j for m in domain.cells)
        if all(_ranges_ok(k, spec) for k in sizes):
            groups.append(BoxGroup(sizes, sizes, (2 ** j,) * domain.ndim))
        j += 1
    groups.sort(key=lambda g: g.sizes)
    return groups


def _unique_sorted(values: np.ndarray) -> np.ndarray:
    v = np.sort(values.ravel())
    keep = np.concatenate([[True], np.diff(v) > 1e-12 * np.maximum(1.0, np.abs(v[1:]))])
    return v[keep]


def _ball_groups(domain: Domain, spec: BasisSpec) -> list[BallGroup]:
    w = np.array(domain.widths)
    half = [(m - 1) // 2 for m in domain.cells]
    offs = np.array(list(itertools.product(*(range(-h, h + 1) for h in half))), dtype=np.int64)
    dist = np.sqrt(((offs * w) ** 2).sum(axis=1))
    groups = []
    for r in _unique_sorted(dist):
        reach = np.floor(r / w * (1 + 1e-12) + 1e-12).astype(int)
        if np.any(reach > np.array(half)):
            continue
        sel = offs[dist <= r * (1 + 1e-12) + 1e-300]
        diameter = int(2 * reach.max() + 1)
        if not _ranges_ok(diameter, spec):
            continue
        lo = tuple(int(x) for x in reach)
        anchors = tuple(int(m - 2 * x) for m, x in zip(domain.cells, reach))
        groups.append(BallGroup(float(r), sel, lo, anchors))
    return groups


def _centered_ball_groups(domain: Domain, spec: BasisSpec) -> list[BallGroup]:
    n = domain.ndim
    center = np.array([(lo + hi) / 2 for lo, hi in domain.extents])
    grids = np.meshgrid(*(domain.centers(a) for a in range(n)), indexing="ij")
    d = np.sqrt(sum((g - c) ** 2 for g, c in zip(grids, center)))
    first = np.array([domain.centers(a)[0] for a in range(n)])
    last = np.array([domain.centers(a)[-1] for a in range(n)])
    room = float(np.min(np.minimum(center - first, last - center)))
    groups = []
    for r in _unique_sorted(d):
        if r > room * (1 + 1e-12) + 1e-12:
            break
        cells = np.argwhere(d <= r * (1 + 1e-12) + 1e-300)
        extent = cells.max(axis=0) - cells.min(axis=0) + 1
        if not _ranges_ok(int(extent.max()), spec):
            continue
        groups.append(BallGroup(float(r), cells, (0,) * n, (1,) * n, tuple(float(c) for c in center)))
    return groups


def family(spec: BasisSpec, domain: Domain) -> Family:
    """Materialize the (lazy) family of ``spec`` on ``domain``."""
    kind = spec.kind
    n = domain.ndim
    if kind == "intervals" and n != 1:
        raise ShapeError("intervals require a 1D domain")
    if kind == "balls" and n == 1:
        kind = "intervals"
    if kind in ("intervals", "rectangles"):
        groups = _rectangle_groups(domain, spec)
    elif kind == "cubes":
        groups = _cube_groups(domain, spec)
    elif kind == "dyadic":
        groups = _dyadic_groups(domain, spec)
    elif kind == "balls":
        groups = _ball_groups(domain, spec)
    else:
        groups = _centered_ball_groups(domain, spec)
    fam = Family(spec, domain, groups, covering=(kind != "dyadic"))
    if len(fam) == 0:
        raise ShapeError(f"basis {spec} has no members on cells {domain.cells}")
    return fam


def enumerate_shapes(spec: BasisSpec, domain: Domain) -> Iterator[Shape]:
    """Stream the shapes of ``spec`` in deterministic (size, anchor) order.

    Sampled policies yield the drawn members in increasing index order.
    """
    fam = family(spec, domain)
    sel = fam.selected_indices()
    if sel is None:
        yield from fam
    else:
        for i in sel:
            yield fam[int(i)]


def covered_cells(fam: Family) -> np.ndarray:
    """Boolean mask of cells lying in at least one member of ``fam``."""
    cov = np.zeros(fam.domain.cells, dtype=bool)
    for g, grp in enumerate(fam.groups):
        for local in range(grp.count):
            cov[fam.shape_in_group(g, local).index] = True
        if cov.all():
            break
    return cov


def ball_comparison_cubes(shape: Shape, domain: Domain) -> tuple[int, int]:
    """Cell counts of the inscribed and bounding cell boxes of a ball mask.

    The bounding box spans the mask's extent. The inscribed box is the largest
    box of cells symmetric about the center whose corner cell centers all lie
    within the radius.
    """
    if shape.kind != "ball_mask":
        raise ShapeError("ball mask required")
    cells = np.array(shape.cells)
    bounding = int(np.prod(cells.max(axis=0) - cells.min(axis=0) + 1))
    c = np.array(shape.center)
    gaps = [np.abs(domain.centers(a) - c[a]) for a in range(domain.ndim)]
    r2 = shape.radius ** 2 * (1 + 1e-12) + 1e-300
    best = 0
    for t in _unique_sorted(np.concatenate(gaps)):
        sel = [g <= t * (1 + 1e-12) + 1e-300 for g in gaps]
        if not all(s.any() for s in sel):
            continue
        far = sum(float(g[s].max()) ** 2 for g, s in zip(gaps, sel))
        if far > r2:
            break
        best = int(np.prod([s.sum() for s in sel]))
    return best, bounding


# -- comparability ---------------------------------------------------------------


@dataclass(frozen=True)
class ComparabilityReport:
    lower: float
    upper: float
    pair: tuple[str, str]
    n: int


def unit_ball_volume(n: int) -> float:
    """Volume of the Euclidean unit ball in ``n`` dimensions."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def comparability_constants(a: str, b: str, n: int) -> ComparabilityReport:
    """Lower/upper comparability constants for ``a`` comparable to ``b`` in dimension ``n``.

    Supported pairs: balls->cubes, cubes->balls, cubes->rectangles.
    Rectangles are not comparable to cubes.
    """
    a, b = KIND_ALIASES.get(a, a), KIND_ALIASES.get(b, b)
    if n < 1:
        raise ShapeError("dimension must be >= 1")
    w = unit_ball_volume(n)
    if (a, b) == ("balls", "cubes"):
        lo, hi = w / 2 ** n, w * (math.sqrt(n) / 2) ** n
    elif (a, b) == ("cubes", "balls"):
        lo, hi = (2 / math.sqrt(n)) ** n / w, 2 ** n / w
    elif (a, b) == ("cubes", "rectangles"):
        lo, hi = 1.0, 1.0
    elif (a, b) == ("rectangles", "cubes"):
        raise ShapeError("rectangles are not comparable to cubes")
    else:
        raise ShapeError(f"no comparability constants for pair ({a}, {b})")
    return ComparabilityReport(lo, hi, (a, b), n)
