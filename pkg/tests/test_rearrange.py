import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscillab.grid import GridFunction, generate, make_domain, unit_domain
from oscillab.oscillation import bmo_norm
from oscillab.rearrange import (
    RearrangeError,
    cavalieri_moment,
    decreasing_rearrangement,
    distribution,
    dyadic_partitions,
    equimeasurable,
    greedy,
    jnp_lower_bound,
    oscillation_identity_check,
    rearrangement_csv,
    signed_rearrangement,
)
from oscillab.shapes import whole

grids = st.sampled_from([(6,), (8,), (3, 4), (4, 4), (2, 2, 2)])


def _rand(seed, cells, levels=0):
    return generate(f"random_step(seed={seed},levels={levels})", unit_domain(*cells))


def test_distribution_table_against_counting():
    f = GridFunction(unit_domain(6), [3, -1, 3, 0, 2, -1])
    t = distribution(f)
    assert t.thresholds.tolist() == [3, 2, 0, -1]
    for s in (-5, -1, -0.5, 0, 1.5, 2, 3, 4):
        assert math.isclose(t(s), np.sum(f.values > s) / 6)
    u = distribution(f, signed=False)
    assert math.isclose(u(0.5), 5 / 6)
    assert t.to_csv().splitlines()[0] == "threshold,measure_above"


def test_examples_of_rearrangements():
    f = generate("indicator(alpha=1/4)", unit_domain(4, 4))
    assert decreasing_rearrangement(f).values.tolist() == [1] * 4 + [0] * 12
    g = generate("three_level(beta=1/4)", unit_domain(8))
    assert signed_rearrangement(g).values.tolist() == [1, 1, 0, 0, 0, 0, -1, -1]
    r = signed_rearrangement(_rand(0, (3, 4)))
    assert r.domain.extents == ((0.0, 1.0),) and r.domain.cells == (12,)


def test_equimeasurable_examples():
    d = unit_domain(8)
    assert not equimeasurable(generate("indicator(alpha=1/4)", d), generate("indicator(alpha=1/2)", d))
    with pytest.raises(RearrangeError):
        equimeasurable(generate("two_level", d), generate("two_level", make_domain([(0, 2)], [8])))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), grids)
def test_rearrangement_properties(seed, cells):
    f = _rand(seed, cells, levels=5)
    fo, fs = signed_rearrangement(f), decreasing_rearrangement(f)
    assert np.all(np.diff(fo.values) <= 0) and np.all(np.diff(fs.values) <= 0)
    absf = GridFunction(f.domain, np.abs(f.values))
    assert np.array_equal(fs.values, signed_rearrangement(absf).values)
    assert equimeasurable(f, fo, signed=True)
    assert equimeasurable(f, fo, signed=False)
    assert equimeasurable(f, fs, signed=False)
    for p in (1, 2, 5, math.inf):
        assert math.isclose(fs.lp_norm(p), f.lp_norm(p), rel_tol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), grids, st.sampled_from([0.5, 1.0, 2.0, 3.0]))
def test_cavalieri_matches_direct_sum(seed, cells, p):
    f = _rand(seed, cells)
    direct = float(np.sum(np.abs(f.values) ** p) * f.domain.cell_measure)
    assert math.isclose(cavalieri_moment(distribution(f, signed=False), p), direct, rel_tol=1e-12)


def test_cavalieri_examples_and_errors():
    d = unit_domain(8)
    assert cavalieri_moment(distribution(generate("indicator(alpha=1/4)", d)), 1) == 0.25
    for p in (0.5, 1, 3):
        assert math.isclose(cavalieri_moment(distribution(generate("two_level", d), signed=False), p), 1.0)
    with pytest.raises(RearrangeError):
        cavalieri_moment(distribution(generate("two_level", d)), 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), grids)
def test_oscillation_identity(seed, cells):
    f = _rand(seed, cells)
    lhs, above, below = oscillation_identity_check(f, whole(f.domain))
    assert math.isclose(lhs, above, rel_tol=1e-12, abs_tol=1e-15)
    assert math.isclose(lhs, below, rel_tol=1e-12, abs_tol=1e-15)


def test_oscillation_identity_examples():
    d = unit_domain(8)
    assert oscillation_identity_check(generate("indicator(alpha=1/2)", d), whole(d)) == (0.5, 0.5, 0.5)
    assert oscillation_identity_check(generate("constant(c=4)", d), whole(d)) == (0.0, 0.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(-6, 6), min_size=2, max_size=14))
def test_rearrangement_does_not_increase_interval_norm(vals):
    f = GridFunction(unit_domain(len(vals)), np.asarray(vals, dtype=float))
    base = bmo_norm(f, "intervals", 1).norm
    absf = GridFunction(f.domain, np.abs(f.values))
    for g in (signed_rearrangement(f), decreasing_rearrangement(f), absf):
        assert bmo_norm(g, "intervals", 1).norm <= base * (1 + 1e-9) + 1e-15


# -- JN_p lower bound -------------------------------------------------------------


def _naive_dyadic(v, p, depth):
    # recursive keep-or-split over dyadic subcubes; measure is the cell count over the grid size
    total = v.size

    def rec(block, d):
        keep = block.size / total * float(np.abs(block - block.mean()).mean()) ** p
        if d == 0 or any(m % 2 for m in block.shape):
            return keep
        halves = [block]
        for ax in range(block.ndim):
            halves = [h for b in halves for h in np.split(b, 2, axis=ax)]
        return max(keep, sum(rec(h, d - 1) for h in halves))

    return rec(v, depth)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(8,), (16,), (4, 4), (8, 8)]), st.sampled_from([1.5, 2.0, 3.0]),
       st.integers(0, 4))
def test_dyadic_dp_matches_recursive_oracle(seed, cells, p, depth):
    f = _rand(seed, cells)
    got = jnp_lower_bound(f, p, dyadic_partitions(depth))
    assert math.isclose(got, _naive_dyadic(f.values, p, depth), rel_tol=1e-12, abs_tol=1e-15)


def test_jnp_examples():
    d = unit_domain(8)
    assert jnp_lower_bound(generate("constant(c=1)", d), 2) == 0
    assert jnp_lower_bound(generate("two_level", d), 2, dyadic_partitions(1)) == 1.0
    f = _rand(3, (16, 16))
    vals = [jnp_lower_bound(f, 2, dyadic_partitions(k)) for k in range(5)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert jnp_lower_bound(f, 2, greedy(1)) <= jnp_lower_bound(f, 2, greedy(6))


def test_jnp_errors():
    f = generate("two_level", unit_domain(8))
    with pytest.raises(RearrangeError):
        jnp_lower_bound(f, 1)
    with pytest.raises(RearrangeError):
        dyadic_partitions(-1)
    with pytest.raises(RearrangeError):
        greedy(0)


def test_rearrangement_csv_layout():
    rows = rearrangement_csv(signed_rearrangement(generate("two_level", unit_domain(2)))).splitlines()
    assert rows == ["left,width,value", "0.0,0.5,1.0", "0.5,0.5,-1.0"]
