"""Box domains carried by uniform grids, piecewise-constant grid functions,
and generators for the standard extremal example functions."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Sequence

import numpy as np


class GridError(ValueError):
    """Invalid domain, grid function or generator parameters."""


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``prod (lo_i, hi_i)`` split into a uniform grid of cells."""

    extents: tuple[tuple[float, float], ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        if len(self.extents) != len(self.cells):
            raise GridError("extents and cells must have the same length")
        if not 1 <= len(self.cells) <= 3:
            raise GridError(f"dimension {len(self.cells)} unsupported (1..3)")
        for lo, hi in self.extents:
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi - lo <= 0:
                raise GridError(f"extent ({lo}, {hi}) must have positive finite length")
        for c in self.cells:
            if int(c) != c or c < 1:
                raise GridError(f"cell count {c} must be a positive integer")

    @property
    def ndim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @cached_property
    def widths(self) -> tuple[float, ...]:
        return tuple((hi - lo) / c for (lo, hi), c in zip(self.extents, self.cells))

    @cached_property
    def cell_measure(self) -> float:
        return float(np.prod(self.widths))

    @cached_property
    def measure(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.extents]))

    def edges(self, axis: int) -> np.ndarray:
        lo, hi = self.extents[axis]
        return np.linspace(lo, hi, self.cells[axis] + 1)

    def centers(self, axis: int) -> np.ndarray:
        e = self.edges(axis)
        return 0.5 * (e[:-1] + e[1:])

    def axis_domain(self, axis: int) -> "Domain":
        return Domain((self.extents[axis],), (self.cells[axis],))

    def subdomain(self, axes: Sequence[int]) -> "Domain":
        return Domain(tuple(self.extents[a] for a in axes), tuple(self.cells[a] for a in axes))

    def to_dict(self) -> dict:
        return {"extents": [list(e) for e in self.extents], "cells": list(self.cells)}


def make_domain(extents: Sequence[Sequence[float]], cells: Sequence[int]) -> Domain:
    """Build a :class:`Domain`; e.g. ``make_domain([(0, 1)], [8])`` has cell measure 1/8."""
    ext = tuple((float(lo), float(hi)) for lo, hi in extents)
    return Domain(ext, tuple(int(c) if int(c) == c else c for c in cells))


def unit_domain(*cells: int) -> Domain:
    """Unit box ``(0,1)^n`` with the given cells per axis."""
    return make_domain([(0.0, 1.0)] * len(cells), cells)


class GridFunction:
    """Piecewise-constant function: one finite real value per domain cell.

    Values are held as a read-only array of shape ``domain.cells``; the flat,
    row-major view is what the CSV/JSON formats carry.
    """

    __slots__ = ("domain", "values")

    def __init__(self, domain: Domain, values):
        arr = np.array(values, dtype=float)
        if arr.size != domain.size:
            raise GridError(f"expected {domain.size} values, got {arr.size}")
        arr = arr.reshape(domain.cells)
        if not np.all(np.isfinite(arr)):
            raise GridError("grid function values must be finite")
        arr.setflags(write=False)
        self.domain = domain
        self.values = arr

    def __repr__(self):
        return f"GridFunction(cells={self.domain.cells}, range=[{self.values.min():g}, {self.values.max():g}])"

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.domain, values)

    def integral(self) -> float:
        return float(self.values.sum() * self.domain.cell_measure)

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def lp_norm(self, p: float) -> float:
        if math.isinf(p):
            return self.sup_norm()
        return float((np.sum(np.abs(self.values) ** p) * self.domain.cell_measure) ** (1.0 / p))

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"domain": self.domain.to_dict(), "values": [float(v) for v in self.flat]})

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        obj = json.loads(text)
        d = obj["domain"]
        return cls(make_domain(d["extents"], d["cells"]), obj["values"])

    def to_csv(self) -> str:
        """Header ``n, cells..., lo_0, hi_0, ...`` then one value per line."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header: list[Any] = [self.domain.ndim, *self.domain.cells]
        for lo, hi in self.domain.extents:
            header += [repr(lo), repr(hi)]
        w.writerow(header)
        for v in self.flat:
            w.writerow([repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridFunction":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if not rows:
            raise GridError("empty CSV")
        head = rows[0]
        try:
            n = int(head[0])
            cells = [int(c) for c in head[1 : 1 + n]]
            bounds = [float(x) for x in head[1 + n : 1 + 3 * n]]
        except (ValueError, IndexError) as exc:
            raise GridError(f"malformed CSV header: {head}") from exc
        if len(cells) != n or len(bounds) != 2 * n:
            raise GridError(f"malformed CSV header: {head}")
        extents = [(bounds[2 * i], bounds[2 * i + 1]) for i in range(n)]
        values = [float(r[0]) for r in rows[1:]]
        return cls(make_domain(extents, cells), values)


# -- generators ----------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    """Named generator with parameters, e.g. ``GeneratorSpec("indicator", {"alpha": 0.25})``."""

    name: str
    params: dict = field(default_factory=dict)

    def __str__(self):
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}({inner})"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": {k: (v.to_dict() if isinstance(v, GeneratorSpec) else v) for k, v in self.params.items()},
        }


def _parse_value(text: str):
    text = text.strip()
    if "(" in text or text.isidentifier():
        return parse_generator(text)
    try:
        return int(text)
    except ValueError:
        pass
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p for p in parts if p.strip()]


def parse_generator(text: str) -> GeneratorSpec:
    """Parse ``name``, ``name:k=v,...`` or ``name(k=v,...)`` (nesting allowed).

    Fractions such as ``alpha=1/4`` are accepted. ``separable_sum`` takes
    nested specs: ``separable_sum(g=two_level,h=random_step(seed=3))``.
    """
    text = text.strip()
    if not text:
        raise GridError("empty generator spec")
    if "(" in text and (":" not in text or text.index("(") < text.index(":")):
        name, _, rest = text.partition("(")
        if not rest.endswith(")"):
            raise GridError(f"unbalanced parentheses in {text!r}")
        body = rest[:-1]
    else:
        name, _, body = text.partition(":")
    params = {}
    for item in _split_top(body, ","):
        key, eq, value = item.partition("=")
        if not eq:
            raise GridError(f"expected key=value in {item!r}")
        params[key.strip()] = _parse_value(value)
    return GeneratorSpec(name.strip(), params)


def _fraction_cells(frac: float, cells: int, what: str) -> int:
    k = frac * cells
    ki = int(round(k))
    if abs(k - ki) > 1e-9:
        raise GridError(f"{what}={frac} is not a whole number of cells on {cells} cells")
    return ki


def _axis0_profile(domain: Domain, profile: np.ndarray) -> np.ndarray:
    shape = [1] * domain.ndim
    shape[0] = domain.cells[0]
    return np.broadcast_to(profile.reshape(shape), domain.cells)


def _two_level(domain: Domain) -> np.ndarray:
    m = domain.cells[0]
    h = _fraction_cells(0.5, m, "half")
    prof = np.where(np.arange(m) < h, 1.0, -1.0)
    return _axis0_profile(domain, prof)


def _indicator(domain: Domain, alpha: float) -> np.ndarray:
    if not 0.0 <= alpha <= 1.0:
        raise GridError(f"alpha={alpha} outside [0, 1]")
    m = domain.cells[0]
    k = _fraction_cells(alpha, m, "alpha")
    return _axis0_profile(domain, (np.arange(m) < k).astype(float))


def _three_level(domain: Domain, beta: float) -> np.ndarray:
    if not 0.0 < beta < 0.5:
        raise GridError(f"beta={beta} must lie in (0, 1/2)")
    m = domain.cells[0]
    k = _fraction_cells(beta, m, "beta")
    idx = np.arange(m)
    prof = np.zeros(m)
    prof[idx < k] = 1.0
    prof[idx >= m - k] = -1.0
    return _axis0_profile(domain, prof)


def log_reciprocal_cell_means(edges: np.ndarray) -> np.ndarray:
    """Exact cell averages of ``log(1/x)`` from the antiderivative ``x - x log x``."""
    if edges[0] < 0:
        raise GridError("log_reciprocal needs an axis inside (0, inf)")
    with np.errstate(divide="ignore", invalid="ignore"):
        anti = np.where(edges > 0, edges - edges * np.log(np.where(edges > 0, edges, 1.0)), 0.0)
    return np.diff(anti) / np.diff(edges)


def _log_reciprocal(domain: Domain) -> np.ndarray:
    return _axis0_profile(domain, log_reciprocal_cell_means(domain.edges(0)))


def _overlap_fraction(edges: np.ndarray, lo: float, hi: float) -> np.ndarray:
    a, b = edges[:-1], edges[1:]
    return np.clip(np.minimum(b, hi) - np.maximum(a, lo), 0.0, None) / (b - a)


def _kozlov_sum(domain: Domain, N: int) -> np.ndarray:
    if domain.ndim != 2:
        raise GridError("kozlov_sum needs a 2D domain")
    if int(N) != N or N < 0:
        raise GridError(f"N={N} must be a nonnegative integer")
    ex, ey = domain.edges(0), domain.edges(1)
    out = np.zeros(domain.cells)
    for k in range(1, int(N) + 1):
        fx = _overlap_fraction(ex, 0.0, 2.0 ** (1 - k))
        fy = _overlap_fraction(ey, 0.0, 1.0 / k)
        out += np.outer(fx, fy)
    return out


def _random_step(domain: Domain, seed: int, levels: int = 8) -> np.ndarray:
    rng = np.random.default_rng(int(seed))
    if levels and levels > 0:
        return rng.integers(0, int(levels), size=domain.cells).astype(float)
    return rng.standard_normal(domain.cells)


def _factor_values(term, domain: Domain) -> np.ndarray:
    if isinstance(term, GeneratorSpec):
        return generate(term, domain).flat
    if isinstance(term, GridFunction):
        if term.domain.cells != domain.cells:
            raise GridError("separable factor has the wrong number of cells")
        return term.flat
    arr = np.asarray(term, dtype=float).reshape(-1)
    if arr.size != domain.size:
        raise GridError("separable factor has the wrong number of cells")
    return arr


def _separable_sum(domain: Domain, g, h) -> np.ndarray:
    if domain.ndim != 2:
        raise GridError("separable_sum needs a 2D domain")
    gx = _factor_values(g, domain.axis_domain(0))
    hy = _factor_values(h, domain.axis_domain(1))
    return gx[:, None] + hy[None, :]


_GENERATORS = {
    "two_level": (_two_level, set()),
    "indicator": (_indicator, {"alpha"}),
    "three_level": (_three_level, {"beta"}),
    "log_reciprocal": (_log_reciprocal, set()),
    "kozlov_sum": (_kozlov_sum, {"N"}),
    "separable_sum": (_separable_sum, {"g", "h"}),
    "random_step": (_random_step, {"seed", "levels"}),
    "constant": (lambda d, c=0.0: np.full(d.cells, float(c)), {"c"}),
}

GENERATOR_NAMES = tuple(_GENERATORS)


def generate(spec: GeneratorSpec | str, domain: Domain) -> GridFunction:
    """Evaluate a generator on ``domain``.

    Fractions (``alpha``, ``beta``) are measured along axis 0 and must be a
    whole number of cells. ``log_reciprocal`` and ``kozlov_sum`` store exact
    cell averages of the continuum function.
    """
    if isinstance(spec, str):
        spec = parse_generator(spec)
    try:
        fn, allowed = _GENERATORS[spec.name]
    except KeyError:
        raise GridError(f"unknown generator {spec.name!r}; choose from {GENERATOR_NAMES}") from None
    extra = set(spec.params) - allowed
    if extra:
        raise GridError(f"generator {spec.name} does not take {sorted(extra)}")
    try:
        values = fn(domain, **spec.params)
    except TypeError as exc:
        raise GridError(f"bad parameters for {spec.name}: {exc}") from exc
    return GridFunction(domain, values)
