"""Exponential tail bounds for oscillation level sets, envelope fitting, the
Gamma-function moment bound, and reference values of sharp constants."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .grid import GridFunction
from .oscillation import shape_values
from .shapes import Shape, whole


class JNError(ValueError):
    """Nonpositive constants or malformed level grids."""


def _step_tail(breakpoints: np.ndarray, counts: np.ndarray, alpha) -> np.ndarray:
    k = np.searchsorted(breakpoints, np.asarray(alpha, dtype=np.float64), side="right")
    return np.concatenate([counts, [0.0]])[k]


@dataclass(frozen=True)
class TailCurve:
    """Tail measures ``|{x in X : |f - f_X| > level}|`` on a level grid.

    ``breakpoints`` holds the distinct positive deviations (ascending) and
    ``counts[i]`` the measure of ``{|f - f_X| >= breakpoints[i]}``: the exact
    step function behind the tabulated values.
    """

    shape: Shape
    measure: float
    levels: np.ndarray
    values: np.ndarray
    breakpoints: np.ndarray
    counts: np.ndarray

    def tail(self, alpha) -> np.ndarray:
        """Exact tail measure at arbitrary levels."""
        return _step_tail(self.breakpoints, self.counts, alpha)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("level", "tail"))
        for a, t in zip(self.levels, self.values):
            w.writerow((repr(float(a)), repr(float(t))))
        return buf.getvalue()


def tail_curve(f: GridFunction, X: Shape | None = None, levels=None) -> TailCurve:
    """Tail curve of the deviation from the mean on ``X`` (default: whole domain).

    ``levels`` must be ascending; by default the breakpoints themselves (and 0).
    """
    X = X or whole(f.domain)
    v = shape_values(f, X)
    dev = np.abs(v - v.mean())
    w = f.domain.cell_measure
    pos = np.sort(dev[dev > 0])
    bps, first = np.unique(pos, return_index=True)
    counts = (pos.size - first) * w
    if levels is None:
        levels = np.concatenate([[0.0], bps])
    levels = np.asarray(levels, dtype=np.float64)
    if levels.ndim != 1 or np.any(np.diff(levels) < 0) or np.any(levels < 0):
        raise JNError("levels must be a nonnegative ascending sequence")
    return TailCurve(X, v.size * w, levels, _step_tail(bps, counts, levels), bps, counts)


@dataclass(frozen=True)
class EnvelopeConstants:
    """``tail(alpha) <= c1 |X| exp(-c2 alpha)`` for every ``alpha >= 0`` when ``valid``."""

    c1: float
    c2: float
    valid: bool
    note: str = ""


def fit_envelope(curve: TailCurve, c2: float) -> EnvelopeConstants:
    """Smallest ``c1`` for the given rate ``c2``.

    The tail is constant on ``[b_(i-1), b_i)`` with value ``counts[i]``, so the
    supremum of ``tail * exp(c2 alpha)`` on that step is approached at its
    right end ``b_i``.
    """
    if not c2 > 0:
        raise JNError("c2 must be positive")
    if curve.breakpoints.size == 0:
        return EnvelopeConstants(1.0, float(c2), True, "degenerate: zero tail, any c1 > 0 works")
    c1 = float(np.max(curve.counts * np.exp(c2 * curve.breakpoints)) / curve.measure)
    valid = envelope_holds(curve, c1, c2)
    return EnvelopeConstants(c1, float(c2), valid)


def envelope_holds(curve: TailCurve, c1: float, c2: float, rel: float = 1e-12) -> bool:
    """Exact check of the envelope on the whole half-line.

    Between breakpoints the tail is constant and the bound decreases, so the
    binding comparisons are the left limits ``counts[i]`` against the bound at
    ``b_i``, plus the value at 0.
    """
    scale = c1 * curve.measure
    left = curve.counts <= scale * np.exp(-c2 * curve.breakpoints) * (1 + rel)
    return bool(np.all(left) and curve.tail(0.0) <= scale * (1 + rel))


def pareto_sweep(curve: TailCurve, rates) -> list[EnvelopeConstants]:
    """Minimal ``c1`` for each rate in ``rates``."""
    return [fit_envelope(curve, c2) for c2 in rates]


def pareto_csv(sweep: list[EnvelopeConstants]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("c2", "c1", "valid"))
    for e in sweep:
        w.writerow((repr(e.c2), repr(e.c1), int(e.valid)))
    return buf.getvalue()


def moment_bound(c1: float, c2: float, p: float) -> float:
    """``(c1 p Gamma(p))^(1/p) / c2``: the p-oscillation allowed by an exponential envelope."""
    if not (c1 > 0 and c2 > 0):
        raise JNError("envelope constants must be positive")
    if not p >= 1:
        raise JNError("p must be >= 1")
    if p <= 100:
        base = c1 * p * math.gamma(p)
        return (math.sqrt(base) if p == 2 else base ** (1.0 / p)) / c2
    # p Gamma(p) = Gamma(p + 1), in logs to avoid overflow
    return math.exp((math.log(c1) + math.lgamma(p + 1.0)) / p) / c2


# -- sup-norm constant for intervals --------------------------------------------


def _bracket(h: float, p: float) -> float:
    return h * (1.0 - h) ** p + h ** p * (1.0 - h)


def c_infty(p: float) -> float:
    """``2 sup_(0<h<1) (h(1-h)^p + h^p(1-h))^(1/p)``.

    The bracket is symmetric about 1/2, so ``h`` ranges over ``(0, 1/2]``: a
    grid locates the best cell, then bounded Brent refinement runs from each
    of a few neighbouring brackets.
    """
    if not p >= 1:
        raise JNError("p must be >= 1")
    hs = np.linspace(0.0, 0.5, 4097)[1:]
    vals = hs * (1 - hs) ** p + hs ** p * (1 - hs)
    best = float(vals.max())
    step = hs[1] - hs[0]
    starts = {int(np.argmax(vals))} | {int(i) for i in np.linspace(0, hs.size - 1, 9)}
    for i in starts:
        lo, hi = max(hs[i] - step, 1e-15), min(hs[i] + step, 0.5)
        res = minimize_scalar(lambda h: -_bracket(h, p), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-13})
        best = max(best, -float(res.fun), _bracket(hi, p))
    return 2.0 * best ** (1.0 / p)


def c_infty_argmax(p: float) -> float:
    """A maximizing ``h`` in ``(0, 1/2]`` for :func:`c_infty`."""
    target = (c_infty(p) / 2.0) ** p
    hs = np.linspace(0.0, 0.5, 4097)[1:]
    return float(hs[np.argmin(np.abs(hs * (1 - hs) ** p + hs ** p * (1 - hs) - target))])


# -- reference data ------------------------------------------------------------------


@dataclass(frozen=True)
class ReferenceConstant:
    name: str
    p: float
    basis: str
    value: float
    expression: str
    role: str


def reference_constants() -> list[ReferenceConstant]:
    """Known sharp constants of the exponential decay inequality.

    ``c`` is the smallest multiplier, ``C`` the largest rate.
    """
    e = math.e
    return [
        ReferenceConstant("c", 1, "intervals", 0.5 * math.exp(4 / e), "exp(4/e)/2", "multiplier"),
        ReferenceConstant("C", 1, "intervals", 2 / e, "2/e", "rate"),
        ReferenceConstant("c", 2, "intervals", 4 / e ** 2, "4/e^2", "multiplier"),
        ReferenceConstant("C", 2, "intervals", 1.0, "1", "rate"),
        ReferenceConstant("C", 1, "rectangles", 2 / e, "2/e", "rate"),
    ]


def lookup(p: float, basis: str, name: str) -> float:
    for r in reference_constants():
        if r.p == p and r.basis == basis and r.name == name:
            return r.value
    raise KeyError((p, basis, name))


def reference_json() -> str:
    return json.dumps([r.__dict__ for r in reference_constants()], indent=2)
