import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscillab.grid import GridFunction, generate, unit_domain
from oscillab.oscillation import bmo_norm, osc_p
from oscillab.shapes import enumerate_shapes, parse_basis, whole
from oscillab.transforms import (
    TransformError,
    abs_,
    apply,
    beta_sweep,
    holder_power,
    max_with,
    min_with,
    parse_transform,
    shapewise_ratio,
    sweep_csv,
    trunc_above,
    trunc_below,
    trunc_full,
)

seeds = st.integers(0, 10_000)
grids = st.sampled_from([(12,), (4, 4), (5, 3)])


def _rand(seed, cells, levels=0):
    return generate(f"random_step(seed={seed},levels={levels})", unit_domain(*cells))


def _basis(f):
    return "intervals" if f.domain.ndim == 1 else "rectangles"


def _naive_ratio(spec, f, p):
    Tf = apply(spec, f)
    best = -math.inf
    for s in enumerate_shapes(parse_basis(_basis(f)), f.domain):
        a = osc_p(f, s, p)
        if a > 1e-14:
            best = max(best, osc_p(Tf, s, p) / a)
    return best


def test_apply_examples():
    d = unit_domain(8)
    f = generate("three_level(beta=1/4)", d)
    assert np.array_equal(apply(trunc_full(1), f).values, f.values)
    g = apply(abs_(), f)
    assert g.values.tolist() == [1, 1, 0, 0, 0, 0, 1, 1]
    assert g.values.mean() == 0.5
    h = _rand(1, (8,))
    assert np.allclose(apply(max_with(h), f).values, ((f.values + h.values) + np.abs(f.values - h.values)) / 2)
    assert np.array_equal(apply(min_with(h), f).values, np.minimum(f.values, h.values))


def test_transform_errors():
    with pytest.raises(TransformError):
        apply(max_with(generate("two_level", unit_domain(4))), generate("two_level", unit_domain(8)))
    for bad in ("nope", "trunc_above", "holder_power:alpha=2", "holder_power:L=1", "abs:k=1", "trunc_full:k"):
        with pytest.raises(TransformError):
            parse_transform(bad)
    with pytest.raises(TransformError):
        shapewise_ratio(abs_(), generate("constant(c=1)", unit_domain(4)), "intervals", 1)


def test_parse_transform_forms():
    assert str(parse_transform("abs")) == "abs"
    assert parse_transform("trunc_above:k=1") == trunc_above(1)
    assert parse_transform("trunc_full(k=2)") == trunc_full(2)
    assert parse_transform("trunc_below:j=-1") == trunc_below(-1)
    assert parse_transform("holder_power:alpha=0.5,L=2") == holder_power(0.5, 2)


def test_holder_coefficient_is_sharp():
    spec = holder_power(0.5, 3)
    assert math.isclose(spec.holder_coefficient, 3 * math.sqrt(2))
    x = np.linspace(-4, 4, 801)
    X, Y = np.meshgrid(x, x)
    F = lambda t: np.sign(t) * np.abs(t) ** 0.5
    diff = np.abs(X - Y)
    ok = diff > 0
    ratio = np.abs(F(X) - F(Y))[ok] / diff[ok] ** 0.5
    assert ratio.max() <= 2 ** 0.5 * (1 + 1e-12)
    assert ratio.max() >= 2 ** 0.5 * (1 - 1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds, grids, st.sampled_from([1.0, 2.0, 3.0]),
       st.sampled_from(["abs", "trunc_above:k=0.3", "trunc_full:k=0.5", "holder_power:alpha=0.5"]))
def test_ratio_matches_naive_scan(seed, cells, p, text):
    f = _rand(seed, cells)
    spec = parse_transform(text)
    rep = shapewise_ratio(spec, f, _basis(f), p)
    assert math.isclose(rep.ratio, _naive_ratio(spec, f, p), rel_tol=1e-9)


@settings(max_examples=25, deadline=None)
@given(seeds, grids, st.sampled_from([1.0, 2.0]), st.floats(-1.5, 1.5))
def test_truncation_ratio_at_most_one(seed, cells, p, k):
    f = _rand(seed, cells)
    for spec in (trunc_above(k), trunc_below(k), trunc_full(abs(k))):
        try:
            rep = shapewise_ratio(spec, f, _basis(f), p)
        except TransformError:
            continue
        assert rep.ratio <= 1 + 1e-9


@settings(max_examples=25, deadline=None)
@given(seeds, grids, st.floats(0, 2))
def test_truncation_contraction_core(seed, cells, k):
    f = _rand(seed, cells)
    for spec in (trunc_above(k), trunc_below(-k), trunc_full(k)):
        t = apply(spec, f).flat
        v = f.flat
        assert np.all(np.abs(t[:, None] - t[None, :]) <= np.abs(v[:, None] - v[None, :]) + 1e-15)


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(0, 3))
def test_full_truncation_composes_one_sided(seed, k):
    f = _rand(seed, (10,))
    both = apply(trunc_full(k), f).values
    composed = apply(trunc_below(-k), apply(trunc_above(k), f)).values
    assert np.array_equal(both, composed)


@settings(max_examples=20, deadline=None)
@given(seeds, grids, st.sampled_from([1.0, 2.0]))
def test_abs_ratio_bound_and_nonnegative_equality(seed, cells, p):
    f = _rand(seed, cells)
    assert shapewise_ratio(abs_(), f, _basis(f), p).ratio <= 2 + 1e-9
    pos = f.with_values(np.abs(f.values) + 0.1)
    assert math.isclose(shapewise_ratio(abs_(), pos, _basis(f), 2).ratio, 1.0, rel_tol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds, seeds, grids, st.sampled_from([1.0, 2.0]))
def test_lattice_bounds(s1, s2, cells, p):
    f1, f2 = _rand(s1, cells), _rand(s2, cells)
    m = apply(max_with(f2), f1)
    basis = _basis(f1)
    for s in enumerate_shapes(parse_basis(basis), f1.domain):
        lhs = osc_p(m, s, p) ** p
        rhs = osc_p(f1, s, p) ** p + osc_p(f2, s, p) ** p
        assert lhs <= rhs * (1 + 1e-12) + 1e-15
    n1, n2, nm = (bmo_norm(g, basis, p).norm for g in (f1, f2, m))
    assert nm <= 1.5 * (n1 + n2) * (1 + 1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds, grids, st.sampled_from([0.25, 0.5, 0.75, 1.0]), st.sampled_from([0.5, 2.0]),
       st.sampled_from([1.0, 2.0, 3.0]))
def test_holder_shapewise_bound(seed, cells, alpha, L, p):
    f = _rand(seed, cells)
    spec = holder_power(alpha, L)
    Ff = apply(spec, f)
    const = spec.holder_coefficient
    for s in enumerate_shapes(parse_basis(_basis(f)), f.domain):
        bound = (2 if p != 2 else 1) * const * osc_p(f, s, p) ** alpha
        assert osc_p(Ff, s, p) <= bound * (1 + 1e-9) + 1e-12


def test_truncation_norm_convergence():
    f = _rand(11, (6, 6))
    top = float(np.abs(f.values).max())
    for p in (1.0, 2.0):
        full = bmo_norm(f, "rectangles", p).norm
        ks = np.linspace(0.1, top, 8)
        norms = [bmo_norm(apply(trunc_full(k), f), "rectangles", p).norm for k in ks]
        assert all(n <= full * (1 + 1e-12) for n in norms)
        assert abs(norms[-1] - full) < 1e-9


def test_beta_sweep_approaches_two():
    rows = beta_sweep(cells=256, betas=(1 / 4, 1 / 16, 1 / 64))
    ratios = [rep.ratio for _, rep in rows]
    for (beta, rep) in rows:
        assert 2 * (1 - 2 * beta) - 1e-12 <= rep.ratio <= 2 + 1e-12
    assert ratios == sorted(ratios)
    assert ratios[-1] > 1.9
    assert sweep_csv(rows).splitlines()[0] == "beta,ratio,argmax"


def test_abs_on_three_level_whole_domain_ratio():
    for b in (1 / 4, 1 / 8):
        f = generate(f"three_level(beta={b})", unit_domain(16))
        S = whole(f.domain)
        assert math.isclose(osc_p(apply(abs_(), f), S, 1) / osc_p(f, S, 1), 2 * (1 - 2 * b), rel_tol=1e-12)


def test_ratio_report_skips_flat_shapes():
    f = GridFunction(unit_domain(4), [1.0, 1.0, 2.0, 2.0])
    rep = shapewise_ratio(abs_(), f, "intervals", 1)
    assert rep.skipped == 4 + 2 and rep.considered == 4
