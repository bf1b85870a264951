"""Distribution functions, decreasing rearrangements, layer-cake moments and
a dyadic lower bound for the John-Nirenberg-p functional."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .config import TOL
from .grid import GridFunction, make_domain
from .oscillation import shape_values
from .shapes import Shape, ShapeError, family, parse_basis


class RearrangeError(ValueError):
    """Invalid table, mismatched measures or bad search policy."""


@dataclass(frozen=True)
class DistributionTable:
    """Step data of ``s -> |{f > s}|``.

    ``thresholds`` are the distinct cell values in strictly decreasing order,
    ``measures[i]`` is the measure of ``{f > thresholds[i]}``. Below the
    smallest threshold the distribution equals ``total``.
    """

    thresholds: np.ndarray
    measures: np.ndarray
    total: float
    signed: bool

    def __call__(self, s: float) -> float:
        """Measure of ``{f > s}`` for any real ``s``."""
        k = int(np.searchsorted(-self.thresholds, -s, side="left"))  # thresholds above s
        return self.total if k == len(self.thresholds) else float(self.measures[k])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("threshold", "measure_above"))
        for s, m in zip(self.thresholds, self.measures):
            w.writerow((repr(float(s)), repr(float(m))))
        return buf.getvalue()


def _sorted_desc(values: np.ndarray) -> np.ndarray:
    # stable descending sort: ties keep row-major source order
    order = np.argsort(-values, kind="stable")
    return values[order]


def distribution(f: GridFunction, signed: bool = True) -> DistributionTable:
    """Exact distribution table of ``f`` (``signed``) or of ``|f|``."""
    v = f.flat if signed else np.abs(f.flat)
    levels, counts = np.unique(v, return_counts=True)
    w = f.domain.cell_measure
    # number of cells strictly above each level, from the top
    above = np.concatenate([np.cumsum(counts[::-1])[:-1][::-1], [0]])
    return DistributionTable(levels[::-1].copy(), (above * w)[::-1].copy(), f.domain.measure, signed)


def _rearranged(values: np.ndarray, f: GridFunction) -> GridFunction:
    dom = make_domain([(0.0, f.domain.measure)], [values.size])
    return GridFunction(dom, values)


def decreasing_rearrangement(f: GridFunction) -> GridFunction:
    """``f*``: the values of ``|f|`` sorted nonincreasingly on ``(0, |domain|)``."""
    return _rearranged(_sorted_desc(np.abs(f.flat)), f)


def signed_rearrangement(f: GridFunction) -> GridFunction:
    """``f°``: the values of ``f`` sorted nonincreasingly on ``(0, |domain|)``."""
    return _rearranged(_sorted_desc(f.flat.copy()), f)


def rearrangement_csv(g: GridFunction) -> str:
    """Cell layout of a rearranged function: left endpoint, width, value."""
    if g.domain.ndim != 1:
        raise RearrangeError("rearranged functions are one-dimensional")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("left", "width", "value"))
    edges = g.domain.edges(0)
    for i, v in enumerate(g.values):
        w.writerow((repr(float(edges[i])), repr(float(edges[i + 1] - edges[i])), repr(float(v))))
    return buf.getvalue()


def equimeasurable(f: GridFunction, g: GridFunction, signed: bool = True, tol: float = TOL.rel) -> bool:
    """Whether ``f`` and ``g`` (or ``|f|`` and ``|g|``) share a distribution function."""
    if abs(f.domain.measure - g.domain.measure) > tol * max(1.0, f.domain.measure):
        raise RearrangeError(f"total measures differ: {f.domain.measure} vs {g.domain.measure}")
    tf, tg = distribution(f, signed), distribution(g, signed)
    points = np.union1d(tf.thresholds, tg.thresholds)
    return all(abs(tf(s) - tg(s)) <= tol for s in points)


def cavalieri_moment(table: DistributionTable, p: float) -> float:
    """``int |f|^p`` from the layer-cake sum over the steps of an unsigned table."""
    if p <= 0:
        raise RearrangeError("p must be positive")
    if table.signed and table.thresholds.size and table.thresholds[-1] < 0:
        raise RearrangeError("layer-cake integration needs the distribution of |f|")
    t = table.thresholds[::-1]
    m = table.measures[::-1]
    lo = np.concatenate([[0.0], t[:-1]])
    below = np.concatenate([[table.total], m[:-1]])
    # on [lo_i, t_i) the distribution equals the measure above lo_i
    keep = t > 0
    return float(np.sum(below[keep] * (t[keep] ** p - lo[keep] ** p)))


def oscillation_identity_check(f: GridFunction, S: Shape) -> tuple[float, float, float]:
    """Mean absolute deviation on ``S`` and its two half-sum expressions."""
    v = shape_values(f, S)
    m = float(v.mean())
    n = v.size
    d = v - m
    lhs = float(np.abs(d).mean())
    above = 2.0 * float(d[d > 0].sum()) / n
    below = 2.0 * float(-d[d < 0].sum()) / n
    return lhs, above, below


# -- JN_p lower bound -------------------------------------------------------------


@dataclass(frozen=True)
class SearchPolicy:
    """``dyadic`` (keep-or-split DP down to ``depth``) or ``greedy`` (at most ``count`` cubes)."""

    kind: str
    depth: int | None = None
    count: int | None = None


def dyadic_partitions(max_depth: int) -> SearchPolicy:
    if max_depth < 0:
        raise RearrangeError("max_depth must be >= 0")
    return SearchPolicy("dyadic", depth=int(max_depth))


def greedy(max_cubes: int) -> SearchPolicy:
    if max_cubes < 1:
        raise RearrangeError("max_cubes must be >= 1")
    return SearchPolicy("greedy", count=int(max_cubes))


def _block_view(values: np.ndarray, parts: int) -> np.ndarray:
    # (parts,)*n grid of blocks, each flattened: shape parts^n x block cells
    n = values.ndim
    sizes = [m // parts for m in values.shape]
    shaped = values.reshape([x for m in sizes for x in (parts, m)])
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    return shaped.transpose(order).reshape((parts,) * n + (-1,))


def _dyadic_dp(f: GridFunction, p: float, depth: int) -> float:
    v = f.values
    n = v.ndim
    levels = 0
    while levels < depth and all(m % 2 ** (levels + 1) == 0 for m in v.shape):
        levels += 1
    best = None
    for j in range(levels, -1, -1):
        blocks = _block_view(v, 2 ** j)
        dev = np.abs(blocks - blocks.mean(axis=-1, keepdims=True)).mean(axis=-1)
        keep = (f.domain.measure / 2 ** (j * n)) * dev ** p
        if best is not None:
            split = best.reshape([x for _ in range(n) for x in (2 ** j, 2)]).sum(axis=tuple(range(1, 2 * n, 2)))
            keep = np.maximum(keep, split)
        best = keep
    return float(best.reshape(-1)[0])


def _greedy(f: GridFunction, p: float, count: int) -> float:
    fam = family(parse_basis("cubes"), f.domain)
    weights = []
    for g, grp in enumerate(fam.groups):
        for li in range(grp.count):
            S = fam.shape_in_group(g, li)
            v = shape_values(f, S)
            weights.append((S.measure * float(np.abs(v - v.mean()).mean()) ** p, -(fam.group_index_base(g) + li), S))
    weights.sort(key=lambda t: (t[0], t[1]), reverse=True)
    taken = np.zeros(f.domain.cells, dtype=bool)
    total, used = 0.0, 0
    for w, _, S in weights:
        if used == count or w <= 0:
            break
        if not taken[S.index].any():
            taken[S.index] = True
            total += w
            used += 1
    return total


def jnp_lower_bound(f: GridFunction, p: float, policy: SearchPolicy | None = None) -> float:
    """Best value of ``sum |Q_i| (avg_{Q_i} |f - f_{Q_i}|)^p`` over the searched disjoint cube families.

    A lower bound for the p-th power of the John-Nirenberg-p norm.
    """
    if not p > 1 or math.isinf(p):
        raise RearrangeError("p must be a finite real > 1")
    policy = policy or dyadic_partitions(8)
    if policy.kind == "dyadic":
        return _dyadic_dp(f, p, policy.depth)
    if policy.kind == "greedy":
        try:
            return _greedy(f, p, policy.count)
        except ShapeError as exc:
            raise RearrangeError(str(exc)) from exc
    raise RearrangeError(f"unknown policy {policy.kind!r}")

