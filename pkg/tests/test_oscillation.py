import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oscillab.grid import GridFunction, generate, unit_domain
from oscillab.jn import c_infty
from oscillab.kernels import MomentTables
from oscillab.oscillation import (
    NormReport,
    OscillationError,
    bmo_norm,
    mean,
    median,
    osc2_fast,
    osc_double,
    osc_inf_const,
    osc_p,
)
from oscillab.shapes import box, enumerate_shapes, parse_basis, whole

values_1d = st.lists(st.integers(-20, 20), min_size=1, max_size=24)
exponents = st.sampled_from([1.0, 1.5, 2.0, 3.0, 7.5])


def _f(vals):
    return GridFunction(unit_domain(len(vals)), np.asarray(vals, dtype=float))


def _exact_osc(vals, p):
    # exact rational mean, then float power mean (p integer keeps this exact up to the root)
    q = [Fraction(v) for v in vals]
    m = sum(q) / len(q)
    return float(sum(abs(x - m) ** p for x in q) / len(q)) ** (1 / p)


def _naive_norm(vals, p):
    n = len(vals)
    return max(_exact_osc(vals[a:b], p) for a in range(n) for b in range(a + 1, n + 1))


# -- examples ---------------------------------------------------------------------


def test_means():
    d = unit_domain(8)
    assert mean(generate("two_level", d), whole(d)) == 0
    assert mean(generate("indicator(alpha=1/2)", d), whole(d)) == 0.5
    assert mean(generate("three_level(beta=1/4)", d), whole(d)) == 0


@pytest.mark.parametrize("p", [1, 1.5, 2, 3, 10])
def test_two_level_oscillation_is_one(p):
    d = unit_domain(16)
    assert math.isclose(osc_p(generate("two_level", d), whole(d), p), 1.0, rel_tol=1e-12)


@pytest.mark.parametrize("beta", ["1/4", "1/8", "3/16"])
def test_indicator_and_three_level_values(beta):
    d = unit_domain(16)
    b = float(Fraction(beta))
    assert osc_p(generate("indicator(alpha=1/2)", d), whole(d), 1) == 0.5
    f = generate(f"three_level(beta={beta})", d)
    assert math.isclose(osc_p(f, whole(d), 1), 2 * b, rel_tol=1e-12)
    assert math.isclose(osc_double(f, whole(d), 1), 4 * b * (1 - 2 * b) + 4 * b * b, rel_tol=1e-12)
    assert osc_double(generate("indicator(alpha=1/2)", d), whole(d), 1) == 0.5


def test_oscillation_value_carries_metadata():
    d = unit_domain(4)
    v = osc_p(generate("two_level", d), whole(d), 3)
    assert v.p == 3 and v.shape == whole(d) and v.value == 1.0


def test_median_examples():
    d = unit_domain(4)
    f = GridFunction(d, [1, 2, 3, 10])
    assert median(f, whole(d)) == 2
    assert np.mean(np.abs(f.values - 2)) == 2.5
    assert osc_inf_const(f, whole(d), 1)[0] == 2.5
    assert median(GridFunction(d, [7, 7, 7, 7]), whole(d)) == 7
    g = generate("indicator(alpha=1/4)", unit_domain(8))
    assert median(g, whole(g.domain)) == 0


def test_inf_const_examples():
    d = unit_domain(8)
    assert osc_inf_const(generate("two_level", d), whole(d), 1) == (1.0, 0.0)
    val, c = osc_inf_const(generate("indicator(alpha=1/4)", d), whole(d), 1)
    assert (val, c) == (0.25, 0.0)
    f = generate("random_step(seed=5)", unit_domain(30))
    val, c = osc_inf_const(f, whole(f.domain), 2)
    assert math.isclose(val, osc_p(f, whole(f.domain), 2), rel_tol=1e-12)
    assert c == mean(f, whole(f.domain))


def test_p_validation_and_mismatch():
    d = unit_domain(4)
    f = generate("two_level", d)
    for p in (0.5, math.inf, math.nan):
        with pytest.raises(OscillationError):
            osc_p(f, whole(d), p)
    with pytest.raises(OscillationError):
        osc_p(f, box(unit_domain(8), [(0, 8)]), 1)


def test_norm_examples():
    d = unit_domain(64)
    rep = bmo_norm(generate("two_level", d), "intervals:exhaustive", 1)
    assert rep.norm == 1.0 and rep.argmax == whole(d)
    assert not rep.lower_bound_only
    assert bmo_norm(generate("constant(c=3)", unit_domain(5, 5)), "rectangles", 2).norm == 0
    assert bmo_norm(generate("constant(c=3)", unit_domain(5, 5)), "balls", 1.5).norm == 0


def test_sampled_report_is_lower_bound():
    f = generate("random_step(seed=2)", unit_domain(8, 8))
    full = bmo_norm(f, "rectangles", 1)
    part = bmo_norm(f, "rectangles:sampled=50,seed=1", 1)
    assert part.lower_bound_only and part.visited == 50
    assert part.norm <= full.norm


def test_dyadic_report_note():
    rep = bmo_norm(generate("random_step(seed=2)", unit_domain(8, 8)), "dyadic", 1)
    assert rep.note == "not a covering basis"


def test_report_serialization():
    rep = bmo_norm(generate("two_level", unit_domain(8)), "intervals", 2)
    assert rep.to_csv().splitlines()[0] == ",".join(NormReport.CSV_HEADER)
    assert '"norm": 1.0' in rep.to_json()


@pytest.mark.parametrize("N", [3, 4])
def test_rectangles_exceed_cubes_on_kozlov_sum(N):
    f = generate(f"kozlov_sum(N={N})", unit_domain(2 ** N, 2 ** N))
    assert bmo_norm(f, "rectangles", 1).norm > bmo_norm(f, "cubes", 1).norm


# -- independent oracles -----------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(values_1d, st.sampled_from([1, 2, 3]))
def test_osc_p_matches_exact_rational(vals, p):
    f = _f(vals)
    assert math.isclose(osc_p(f, whole(f.domain), p), _exact_osc(vals, p), rel_tol=1e-12, abs_tol=1e-12)


@settings(max_examples=40, deadline=None)
@given(values_1d, st.sampled_from([1.0, 2.0, 3.0]), st.sampled_from(["auto", "direct", "levels"]))
def test_norm_matches_brute_force(vals, p, method):
    f = _f(vals)
    got = bmo_norm(f, "intervals", p, method=method).norm
    assert math.isclose(got, _naive_norm(vals, p), rel_tol=1e-12, abs_tol=1e-12)


def test_norm_moments_matches_brute_force_2d():
    f = generate("random_step(seed=9)", unit_domain(6, 5))
    v = f.values
    naive = max(math.sqrt(np.var(v[a:b, c:d]))
                for a in range(6) for b in range(a + 1, 7) for c in range(5) for d in range(c + 1, 6))
    assert math.isclose(bmo_norm(f, "rectangles", 2, method="moments").norm, naive, rel_tol=1e-12)


def test_ball_norm_matches_enumeration():
    f = generate("random_step(seed=4,levels=0)", unit_domain(9, 9))
    for p in (1.0, 2.0):
        naive = max(float(osc_p(f, s, p)) for s in enumerate_shapes(parse_basis("balls"), f.domain))
        assert math.isclose(bmo_norm(f, "balls", p).norm, naive, rel_tol=1e-12)


def test_osc2_fast_every_box_matches_naive():
    f = generate("random_step(seed=1)", unit_domain(16, 16))
    t = MomentTables(f.values)
    v = f.values
    for a in range(16):
        for b in range(a + 1, 17):
            for c in range(0, 16, 3):
                for d in range(c + 1, 17, 2):
                    blk = v[a:b, c:d]
                    naive = math.sqrt(np.mean((blk - blk.mean()) ** 2))
                    got = osc2_fast(f, [(a, b), (c, d)], t)
                    assert abs(got - naive) <= 1e-10 * max(1.0, naive)
    assert t.flagged == 0


def test_osc2_fast_examples_and_errors():
    f = generate("two_level", unit_domain(8))
    assert osc2_fast(f, [(0, 8)]) == 1.0
    assert osc2_fast(generate("constant(c=2.5)", unit_domain(4, 4)), [(1, 3), (0, 4)]) == 0
    with pytest.raises(OscillationError):
        osc2_fast(f, [(0, 9)])


# -- properties -------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(values_1d, exponents, exponents)
def test_monotone_in_p(vals, p1, p2):
    p1, p2 = sorted((p1, p2))
    f = _f(vals)
    S = whole(f.domain)
    assert osc_p(f, S, p1) <= osc_p(f, S, p2) + 1e-12


@settings(max_examples=60, deadline=None)
@given(values_1d, exponents)
def test_double_integral_sandwich(vals, p):
    f = _f(vals)
    S = whole(f.domain)
    o, dd = osc_p(f, S, p), osc_double(f, S, p)
    assert 0.5 * dd <= o * (1 + 1e-12) + 1e-12
    assert o <= dd * (1 + 1e-12) + 1e-12


@settings(max_examples=60, deadline=None)
@given(values_1d)
def test_p2_double_integral_identity(vals):
    f = _f(vals)
    S = whole(f.domain)
    assert abs(osc_double(f, S, 2) - math.sqrt(2) * osc_p(f, S, 2)) <= 1e-10 * max(1.0, max(map(abs, vals)))


@settings(max_examples=60, deadline=None)
@given(values_1d, exponents)
def test_inf_const_sandwich(vals, p):
    f = _f(vals)
    S = whole(f.domain)
    val, _ = osc_inf_const(f, S, p)
    o = osc_p(f, S, p)
    assert val <= o * (1 + 1e-12) + 1e-12
    assert o <= 2 * val * (1 + 1e-12) + 1e-12


@settings(max_examples=100, deadline=None)
@given(values_1d, st.floats(-25, 25))
def test_median_optimality(vals, c):
    f = _f(vals)
    v = np.asarray(vals, dtype=float)
    m = median(f, whole(f.domain))
    assert np.mean(np.abs(v - m)) <= np.mean(np.abs(v - c)) + 1e-12


@settings(max_examples=40, deadline=None)
@given(values_1d, st.sampled_from([1.5, 3.0, 4.0]), st.floats(-25, 25))
def test_search_minimizer_beats_any_constant(vals, p, c):
    f = _f(vals)
    v = np.asarray(vals, dtype=float)
    val, _ = osc_inf_const(f, whole(f.domain), p)
    assert val <= np.mean(np.abs(v - c) ** p) ** (1 / p) * (1 + 1e-12) + 1e-12


@settings(max_examples=40, deadline=None)
@given(values_1d, exponents, st.integers(-1000, 1000))
def test_translation_invariance(vals, p, shift):
    f = _f(vals)
    g = _f([v + shift for v in vals])
    S = whole(f.domain)
    assert abs(osc_p(f, S, p) - osc_p(g, S, p)) <= 1e-12 * max(1.0, abs(shift))


@settings(max_examples=30, deadline=None)
@given(values_1d, exponents)
def test_sup_norm_embedding(vals, p):
    f = _f(vals)
    norm = bmo_norm(f, "intervals", p).norm
    sup = f.sup_norm()
    assert norm <= (sup if p <= 2 else 2 * sup) * (1 + 1e-12)
    assert norm <= c_infty(p) * sup * (1 + 1e-9)


@settings(max_examples=40, deadline=None)
@given(values_1d, exponents, st.data())
def test_nested_shape_transfer(vals, p, data):
    n = len(vals)
    assume(n >= 2)
    f = _f(vals)
    a = data.draw(st.integers(0, n - 1))
    b = data.draw(st.integers(a + 1, n))
    outer = box(f.domain, [(a, b)])
    a2 = data.draw(st.integers(a, b - 1))
    b2 = data.draw(st.integers(a2 + 1, b))
    inner = box(f.domain, [(a2, b2)])
    c = inner.measure / outer.measure
    assert osc_p(f, inner, p) <= 2 * c ** (-1 / p) * osc_p(f, outer, p) * (1 + 1e-12) + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), exponents)
def test_norm_dominates_every_shape(seed, p):
    f = generate(f"random_step(seed={seed})", unit_domain(5, 4))
    norm = bmo_norm(f, "rectangles", p).norm
    for s in enumerate_shapes(parse_basis("rectangles"), f.domain):
        assert osc_p(f, s, p) <= norm * (1 + 1e-12) + 1e-15


def test_workers_do_not_change_result():
    f = generate("random_step(seed=3,levels=0)", unit_domain(12, 12))
    a = bmo_norm(f, "rectangles", 1.5, workers=1)
    b = bmo_norm(f, "rectangles", 1.5, workers=3)
    assert a.norm == b.norm and a.argmax == b.argmax
