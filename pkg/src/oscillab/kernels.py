"""Vectorized per-group oscillation kernels and the supremum scan driver.

Every kernel returns, for one family group (all shapes of one size), the
p-mean oscillation of every anchor in C order of the anchor grid. Strategies:

``moments``  p = 2 only; prefix sums of f and f^2, constant work per box.
``levels``   any p, few distinct values; prefix counts of each level set.
``direct``   any p; gathers the cells of every shape (chunked).
"""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .config import TOL, worker_count
from .shapes import BallGroup, BoxGroup, Family

MAX_LEVELS = 48
CHUNK_ELEMENTS = 1 << 22


def prefix_table(arr: np.ndarray) -> np.ndarray:
    """Zero-padded n-dimensional inclusive prefix sums (summed-area table)."""
    out = np.zeros(tuple(s + 1 for s in arr.shape), dtype=np.float64)
    acc = np.asarray(arr, dtype=np.float64)
    for axis in range(arr.ndim):
        acc = np.cumsum(acc, axis=axis)
    out[(slice(1, None),) * arr.ndim] = acc
    return out


def box_sums(table: np.ndarray, sizes, stride=None) -> np.ndarray:
    """Sums over every box of the given size, by inclusion-exclusion on ``table``."""
    n = table.ndim
    total = None
    for corner in itertools.product((0, 1), repeat=n):
        sl = tuple(
            slice(k, None) if c else slice(0, table.shape[a] - k)
            for a, (c, k) in enumerate(zip(corner, sizes))
        )
        term = table[sl]
        if (n - sum(corner)) % 2:
            total = -term if total is None else total - term
        else:
            total = term.copy() if total is None else total + term
    if stride is not None and any(s != 1 for s in stride):
        total = total[tuple(slice(None, None, s) for s in stride)]
    return total


def _root(mean_pow: np.ndarray, p: float) -> np.ndarray:
    mean_pow = np.maximum(mean_pow, 0.0)
    if p == 1:
        return mean_pow
    if p == 2:
        return np.sqrt(mean_pow)
    return mean_pow ** (1.0 / p)


def _osc_rows(X: np.ndarray, p: float) -> np.ndarray:
    m = X.mean(axis=1)
    dev = np.abs(X - m[:, None])
    if p == 1:
        return dev.mean(axis=1)
    if p == 2:
        return np.sqrt((dev * dev).mean(axis=1))
    return ((dev ** p).mean(axis=1)) ** (1.0 / p)


class MomentTables:
    """Prefix tables of f and f^2, shifted to limit cancellation.

    Integer-valued data are shifted by an integer so all box sums stay exact.
    """

    def __init__(self, values: np.ndarray):
        v = np.asarray(values, dtype=np.float64)
        mean = float(v.mean())
        if np.all(v == np.round(v)) and np.abs(v).max() < 2 ** 20:
            self.shift = float(round(mean))
        else:
            self.shift = mean
        c = v - self.shift
        self.s1 = prefix_table(c)
        self.s2 = prefix_table(c * c)
        # forward rounding bound for a box sum read off the tables (2^n corner terms)
        eps = np.finfo(np.float64).eps * (2 ** v.ndim) * (1 + v.ndim)
        self.err1 = eps * float(np.abs(c).sum())
        self.err2 = eps * float((c * c).sum())
        self.flagged = 0

    def variance(self, S1, S2, n):
        num = n * S2 - S1 * S1
        var = num / (float(n) * n)
        rounding = (self.err2 + 2 * np.abs(S1) * self.err1 / n) / n
        bad = var < -(TOL.negative_variance * np.abs(S2) / n + rounding)
        if np.any(bad):
            self.flagged += int(np.count_nonzero(bad))
            warnings.warn("negative variance beyond tolerance in moment tables", RuntimeWarning)
        return np.maximum(var, 0.0)

    def box(self, ranges) -> float:
        """Variance of the values over one box (half-open cell ranges)."""
        sl = tuple(slice(a, b + 1) for a, b in ranges)
        sizes = tuple(b - a for a, b in ranges)
        S1 = box_sums(self.s1[sl], sizes)
        S2 = box_sums(self.s2[sl], sizes)
        n = int(np.prod(sizes))
        return float(self.variance(S1, S2, n).reshape(-1)[0])


class LevelTables:
    """Prefix count tables, one per distinct value."""

    def __init__(self, values: np.ndarray):
        self.levels, inverse = np.unique(values, return_inverse=True)
        inverse = inverse.reshape(values.shape)
        self.tables = [prefix_table((inverse == i).astype(np.float64)) for i in range(len(self.levels))]

    def counts(self, sizes, stride) -> np.ndarray:
        return np.stack([box_sums(t, sizes, stride) for t in self.tables])


@dataclass
class ScanContext:
    """Per-function precomputation shared by all groups of a scan (read-only)."""

    values: np.ndarray
    p: float
    method: str
    moments: MomentTables | None = None
    levels: LevelTables | None = None

    @classmethod
    def build(cls, values: np.ndarray, p: float, method: str = "auto", box_family: bool = True):
        if p < 1:
            raise ValueError(f"p={p} must be >= 1")
        if method == "auto":
            if box_family and p == 2:
                method = "moments"
            elif box_family and len(np.unique(values)) <= MAX_LEVELS:
                method = "levels"
            else:
                method = "direct"
        if method not in ("moments", "levels", "direct"):
            raise ValueError(f"unknown method {method!r}")
        if method == "moments" and p != 2:
            raise ValueError("moment kernel needs p = 2")
        ctx = cls(np.asarray(values, dtype=np.float64), float(p), method)
        if method == "moments":
            ctx.moments = MomentTables(ctx.values)
        elif method == "levels":
            ctx.levels = LevelTables(ctx.values)
        return ctx


def _box_direct(ctx: ScanContext, grp: BoxGroup) -> np.ndarray:
    win = sliding_window_view(ctx.values, grp.sizes)
    win = win[tuple(slice(None, None, s) for s in grp.stride)]
    n = int(np.prod(grp.sizes))
    lead = win.shape[0]
    per_row = int(np.prod(win.shape[1 : ctx.values.ndim])) * n
    step = max(1, CHUNK_ELEMENTS // max(per_row, 1))
    out = []
    for start in range(0, lead, step):
        X = win[start : start + step].reshape(-1, n)
        out.append(_osc_rows(X, ctx.p))
    return np.concatenate(out)


def _box_moments(ctx: ScanContext, grp: BoxGroup) -> np.ndarray:
    mt = ctx.moments
    n = int(np.prod(grp.sizes))
    if n == 1:
        return np.zeros(int(np.prod(grp.anchors)))
    S1 = box_sums(mt.s1, grp.sizes, grp.stride)
    S2 = box_sums(mt.s2, grp.sizes, grp.stride)
    return np.sqrt(mt.variance(S1, S2, n)).reshape(-1)


def _box_levels(ctx: ScanContext, grp: BoxGroup) -> np.ndarray:
    lt = ctx.levels
    n = float(np.prod(grp.sizes))
    c = lt.counts(grp.sizes, grp.stride).reshape(len(lt.levels), -1)
    v = lt.levels[:, None]
    mean = (c * v).sum(axis=0) / n
    dev = np.abs(v - mean[None, :])
    if ctx.p == 1:
        acc = (c * dev).sum(axis=0)
    elif ctx.p == 2:
        acc = (c * dev * dev).sum(axis=0)
    else:
        acc = (c * dev ** ctx.p).sum(axis=0)
    return _root(acc / n, ctx.p)


def ball_anchor_grid(grp: BallGroup) -> np.ndarray:
    axes = [np.arange(l, l + a) for l, a in zip(grp.lo, grp.anchors)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def _ball_direct(ctx: ScanContext, grp: BallGroup, local=None) -> np.ndarray:
    anchors = ball_anchor_grid(grp)
    if local is not None:
        anchors = anchors[local]
    K = len(grp.offsets)
    step = max(1, CHUNK_ELEMENTS // K)
    out = []
    for start in range(0, len(anchors), step):
        idx = anchors[start : start + step, None, :] + grp.offsets[None, :, :]
        X = ctx.values[tuple(np.moveaxis(idx, -1, 0))]
        out.append(_osc_rows(X, ctx.p))
    return np.concatenate(out) if out else np.empty(0)


def group_values(ctx: ScanContext, grp, local: np.ndarray | None = None) -> np.ndarray:
    """Oscillations of all anchors of ``grp`` (or of the ``local`` anchor subset)."""
    if isinstance(grp, BallGroup):
        return _ball_direct(ctx, grp, local)
    if ctx.method == "moments":
        vals = _box_moments(ctx, grp)
    elif ctx.method == "levels":
        vals = _box_levels(ctx, grp)
    else:
        vals = _box_direct(ctx, grp)
    return vals if local is None else vals[local]


# -- scan driver -------------------------------------------------------------------


@dataclass
class ScanResult:
    value: float
    index: int
    visited: int
    method: str = ""


def _better(a: tuple, b: tuple | None) -> bool:
    # (value, cell count, -index): larger value wins, then larger shape, then earlier index
    return b is None or a > b


def _scan_group(ctx, fam: Family, g: int, local):
    grp = fam.groups[g]
    vals = group_values(ctx, grp, local)
    if vals.size == 0:
        return None, 0
    i = int(np.argmax(vals))
    li = i if local is None else int(local[i])
    ncells = len(grp.offsets) if isinstance(grp, BallGroup) else int(np.prod(grp.sizes))
    key = (float(vals[i]), ncells, -(fam.group_index_base(g) + li))
    return key, int(vals.size)


def scan(values: np.ndarray, fam: Family, p: float, method: str = "auto",
         indices: np.ndarray | None = None, workers: int | None = None) -> ScanResult:
    """Maximum p-oscillation over ``fam`` (or over the global ``indices`` subset)."""
    ctx = ScanContext.build(values, p, method, box_family=fam.is_box)
    jobs = []
    if indices is None:
        jobs = [(g, None) for g in range(len(fam.groups))]
    else:
        indices = np.asarray(indices, dtype=np.int64)
        bases = np.array([fam.group_index_base(g) for g in range(len(fam.groups))] + [len(fam)])
        for g in range(len(fam.groups)):
            sel = indices[(indices >= bases[g]) & (indices < bases[g + 1])] - bases[g]
            if sel.size:
                jobs.append((g, sel))
    workers = worker_count() if workers is None else max(1, workers)
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _scan_group(ctx, fam, *job), jobs))
    else:
        results = [_scan_group(ctx, fam, *job) for job in jobs]
    best = None
    visited = 0
    for key, count in results:
        visited += count
        if key is not None and _better(key, best):
            best = key
    if best is None:
        raise ValueError("empty enumeration")
    return ScanResult(best[0], -best[2], visited, ctx.method)


def iter_group_values(values: np.ndarray, fam: Family, p: float, method: str = "auto"):
    """Yield ``(group_index, values)`` for every group of ``fam``."""
    ctx = ScanContext.build(values, p, method, box_family=fam.is_box)
    for g, grp in enumerate(fam.groups):
        yield g, group_values(ctx, grp)
