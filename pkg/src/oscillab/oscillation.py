"""Means, p-mean oscillations, medians and BMO norms as supremum scans."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import TOL
from .grid import GridFunction
from .shapes import BasisSpec, Shape, ShapeError, family, parse_basis


class OscillationError(ValueError):
    """Invalid exponent, shape/domain mismatch or failed search."""


class OscillationValue(float):
    """A float carrying the exponent and shape it was computed on."""

    def __new__(cls, value: float, p: float, shape: Shape):
        obj = super().__new__(cls, value)
        obj.p = p
        obj.shape = shape
        return obj

    @property
    def value(self) -> float:
        return float(self)


def _check_p(p: float) -> float:
    p = float(p)
    if not p >= 1 or math.isinf(p):
        raise OscillationError(f"p={p} must be a finite real >= 1")
    return p


def shape_values(f: GridFunction, S: Shape) -> np.ndarray:
    """The cell values of ``f`` on ``S`` as a flat array."""
    try:
        if S.kind == "box":
            if len(S.ranges) != f.domain.ndim or any(b > m for (_, b), m in zip(S.ranges, f.domain.cells)):
                raise IndexError
            return f.values[S.index].reshape(-1)
        return f.values[S.index]
    except IndexError:
        raise OscillationError(f"shape {S.describe()} does not fit domain cells {f.domain.cells}") from None


def mean(f: GridFunction, S: Shape) -> float:
    """Average of ``f`` over ``S`` (cells share one measure, so this is the arithmetic mean)."""
    return float(shape_values(f, S).mean())


def _deviation_power_mean(v: np.ndarray, c: float, p: float) -> float:
    dev = np.abs(v - c)
    if p == 1:
        return float(dev.mean())
    if p == 2:
        return float((dev * dev).mean())
    return float((dev ** p).mean())


def osc_p(f: GridFunction, S: Shape, p: float) -> OscillationValue:
    """p-mean oscillation ``(avg_S |f - f_S|^p)^(1/p)`` as an exact finite sum."""
    p = _check_p(p)
    v = shape_values(f, S)
    m = v.mean()
    value = _deviation_power_mean(v, m, p) ** (1.0 / p)
    return OscillationValue(value, p, S)


def osc_double(f: GridFunction, S: Shape, p: float) -> float:
    """Double-integral oscillation ``(avg_S avg_S |f(x) - f(y)|^p)^(1/p)``.

    Quadratic in the number of cells unless ``f`` takes few distinct values
    on ``S``, in which case the pair sum is taken over level counts.
    """
    p = _check_p(p)
    v = shape_values(f, S)
    n = v.size
    levels, counts = np.unique(v, return_counts=True)
    if len(levels) <= 64:
        D = np.abs(levels[:, None] - levels[None, :]) ** p
        total = float(counts @ D @ counts)
    else:
        total = 0.0
        step = max(1, (1 << 22) // n)
        for start in range(0, n, step):
            block = np.abs(v[start : start + step, None] - v[None, :])
            total += float((block ** p).sum())
    return (total / (n * n)) ** (1.0 / p)


def median(f: GridFunction, S: Shape) -> float:
    """Smallest median of ``f`` on ``S``.

    That is the least ``m`` with ``|{f > m}| <= |S|/2`` and ``|{f < m}| <= |S|/2``;
    on equal-measure cells it is the ``ceil(N/2)``-th smallest value.
    """
    v = np.sort(shape_values(f, S))
    return float(v[(v.size + 1) // 2 - 1])


def _median_interval(v: np.ndarray) -> tuple[float, float]:
    s = np.sort(v)
    k = s.size
    return float(s[(k + 1) // 2 - 1]), float(s[k // 2])


def _bisect_minimizer(v: np.ndarray, p: float, tol: float) -> float:
    # c -> avg |v - c|^p is convex; its derivative sum sign(c - v)|c - v|^(p-1) is nondecreasing
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return lo
    width = hi - lo
    for _ in range(400):
        if hi - lo <= tol * max(1.0, width):
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        d = mid - v
        g = float(np.sum(np.sign(d) * np.abs(d) ** (p - 1)))
        if g > 0:
            hi = mid
        elif g < 0:
            lo = mid
        else:
            return mid
        if mid == lo and mid == hi:
            break
    if hi - lo > tol * max(1.0, width) and np.nextafter(lo, hi) < hi:
        raise OscillationError("minimizer search did not converge")
    return 0.5 * (lo + hi)


def osc_inf_const(f: GridFunction, S: Shape, p: float, method: str = "auto") -> tuple[float, float]:
    """``inf_c (avg_S |f - c|^p)^(1/p)`` and a minimizing constant.

    p = 1 minimizes at any median; the midpoint of the median interval is
    returned. p = 2 minimizes at the mean. Other p (or ``method="search"``)
    bisect on the monotone derivative of the convex objective.
    """
    p = _check_p(p)
    v = shape_values(f, S)
    if method not in ("auto", "search"):
        raise OscillationError(f"unknown method {method!r}")
    if method == "auto" and p == 1:
        lo, hi = _median_interval(v)
        c = 0.5 * (lo + hi)
    elif method == "auto" and p == 2:
        c = float(v.mean())
    else:
        c = _bisect_minimizer(v, p, TOL.search)
    value = _deviation_power_mean(v, c, p) ** (1.0 / p)
    return value, c


# -- norms -----------------------------------------------------------------------


@dataclass
class NormReport:
    """Result of a supremum scan of ``osc_p`` over a basis.

    Sampled policies give lower bounds only. Dyadic scans are flagged as not
    ranging over a covering basis.
    """

    p: float
    basis: BasisSpec
    norm: float
    argmax: Shape
    visited: int
    policy: str
    method: str = "auto"
    note: str = ""

    @property
    def lower_bound_only(self) -> bool:
        return self.policy != "exhaustive"

    def to_dict(self) -> dict:
        return {
            "p": self.p, "basis": str(self.basis), "norm": self.norm, "argmax": self.argmax.to_dict(),
            "visited": self.visited, "policy": self.policy, "method": self.method, "note": self.note,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    CSV_HEADER = ("p", "basis", "norm", "argmax", "visited", "policy", "note")

    def csv_row(self) -> list:
        return [repr(float(self.p)), str(self.basis), repr(float(self.norm)), self.argmax.describe(),
                self.visited, self.policy, self.note]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(self.CSV_HEADER)
        w.writerow(self.csv_row())
        return buf.getvalue()


def bmo_norm(f: GridFunction, basis: BasisSpec | str, p: float, method: str = "auto",
             workers: int | None = None) -> NormReport:
    """Largest p-oscillation of ``f`` over the shapes of ``basis``.

    ``method`` selects the kernel: ``auto`` (moments for p = 2 boxes, level
    counts when ``f`` has few values, else direct), ``moments``, ``levels``,
    ``direct``. Ties go to the larger shape, then the earlier one.
    """
    p = _check_p(p)
    if isinstance(basis, str):
        basis = parse_basis(basis)
    try:
        fam = family(basis, f.domain)
        indices = fam.selected_indices()
    except ShapeError as exc:
        raise OscillationError(str(exc)) from exc
    try:
        result = kernels.scan(f.values, fam, p, method=method, indices=indices, workers=workers)
    except ValueError as exc:
        raise OscillationError(str(exc)) from exc
    note = "" if fam.covering else "not a covering basis"
    return NormReport(p, basis, result.value, fam[result.index], result.visited, basis.policy,
                      result.method, note)


def osc2_fast(f: GridFunction, ranges, tables: kernels.MomentTables | None = None) -> float:
    """p = 2 oscillation of ``f`` on a box from prefix tables (constant time per box).

    Build ``tables = kernels.MomentTables(f.values)`` once and pass it in for
    repeated queries.
    """
    if tables is None:
        tables = kernels.MomentTables(f.values)
    if len(ranges) != f.domain.ndim:
        raise OscillationError("one range per axis required")
    for (a, b), m in zip(ranges, f.domain.cells):
        if not 0 <= a < b <= m:
            raise OscillationError(f"range [{a},{b}) outside [0,{m})")
    return math.sqrt(tables.box(ranges))
