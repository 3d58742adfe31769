import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nullctrl.sets import (
    FatCantorSpec,
    InfeasibleError,
    Interval,
    MeasurableSet1D,
    RectSet,
    best_subinterval,
    fat_cantor,
    greedy_nodes,
    measure,
    partition_cells,
    ray_measure,
    ray_measures,
)
from oracles import brute_best_cell, sampled_trace_measure


@st.composite
def interval_sets(draw, lo=0.0, hi=1.0, max_pieces=5, min_len=1e-4):
    k = draw(st.integers(1, max_pieces))
    pts = sorted(draw(st.lists(st.floats(lo, hi), min_size=2 * k, max_size=2 * k)))
    pairs = [(a, b) for a, b in zip(pts[::2], pts[1::2]) if b - a > min_len]
    if not pairs:
        mid = 0.5 * (lo + hi)
        pairs = [(mid - 0.25 * (hi - lo), mid + 0.25 * (hi - lo))]
    return MeasurableSet1D.from_pairs(pairs, ambient=(lo, hi))


def test_measure_examples():
    assert measure(MeasurableSet1D.from_pairs([[0, 0.3], [0.5, 0.7]])) == pytest.approx(0.5, abs=1e-15)
    assert measure(MeasurableSet1D.empty()) == 0.0
    assert fat_cantor(3, 0.25).measure == pytest.approx(2835 / 4096, rel=1e-14)


def test_interval_and_set_validation():
    with pytest.raises(ValueError):
        Interval(0.5, 0.2)
    with pytest.raises(ValueError):
        MeasurableSet1D((Interval(0, 0.5), Interval(0.4, 0.6)))
    with pytest.raises(ValueError):
        MeasurableSet1D((Interval(0.2, 1.5),))
    merged = MeasurableSet1D.from_pairs([[0.4, 0.6], [0.0, 0.2], [0.1, 0.3], [0.6, 0.7]])
    assert merged.as_pairs() == [[0.0, 0.3], [0.4, 0.7]]


@given(st.integers(0, 7), st.floats(0.01, 0.33))
def test_fat_cantor_matches_closed_form(depth, ratio):
    spec = FatCantorSpec(depth, ratio)
    s = spec.build()
    assert s.measure == pytest.approx(spec.closed_form_measure(), rel=1e-12)
    assert s.measure > 0
    assert len(s) == 2 ** depth


def test_fat_cantor_rejects_bad_ratio():
    with pytest.raises(ValueError):
        FatCantorSpec(2, 0.4)
    with pytest.raises(ValueError):
        FatCantorSpec(-1, 0.2)


@given(interval_sets(), interval_sets())
def test_measure_additive_and_monotone(a, b):
    union = a.union(b)
    inter = sum(float(b.measure_in(iv.lo, iv.hi)) for iv in a.intervals)
    assert union.measure == pytest.approx(a.measure + b.measure - inter, abs=1e-12)
    assert union.measure >= max(a.measure, b.measure) - 1e-12
    assert a.issubset(union) and b.issubset(union)


def test_greedy_nodes_examples():
    E = MeasurableSet1D.from_pairs([[-0.2, 0.2]], ambient=(-0.2, 0.2))
    np.testing.assert_allclose(greedy_nodes(E, 1), [-0.2, 0.0], atol=1e-15)
    np.testing.assert_allclose(greedy_nodes(E, 0), [-0.2])
    E2 = MeasurableSet1D.from_pairs([[-0.2, -0.1], [0.1, 0.2]], ambient=(-0.2, 0.2))
    np.testing.assert_allclose(greedy_nodes(E2, 1), [-0.2, -0.1], atol=1e-15)


def test_greedy_nodes_rejects_set_above_upper():
    E = MeasurableSet1D.from_pairs([[-0.2, -0.19], [0.19, 0.2]], ambient=(-0.2, 0.2))
    with pytest.raises(ValueError):
        greedy_nodes(E, 1, upper=0.0)
    assert issubclass(InfeasibleError, ValueError)


@given(interval_sets(-0.2, 0.2), st.integers(0, 60))
def test_greedy_nodes_postconditions(E, n):
    x = greedy_nodes(E, n)
    assert len(x) == n + 1
    gap = E.measure / (n + 1)
    assert np.all(np.diff(x) >= gap * (1 - 1e-12))
    assert np.all(E.contains(x))
    assert x[0] == E.inf


@given(st.floats(0.01, 1.0))
def test_partition_cells_cover_and_center(rho):
    cells = partition_cells(rho)
    assert len(cells) == math.ceil(5 / (2 * rho) - 1e-12)
    np.testing.assert_allclose(cells[:, 1] - cells[:, 0], 2 * rho / 5)
    assert cells[0, 0] == 0.0 and cells[-1, 1] == pytest.approx(1.0)
    assert np.all(cells[1:, 0] <= cells[:-1, 1] + 1e-15)
    centers = cells.mean(axis=1)
    assert np.all((centers >= 0) & (centers <= 1))


def test_best_subinterval_examples():
    I, m = best_subinterval(MeasurableSet1D.from_pairs([[0, 1]]), 1.0)
    assert I.length == pytest.approx(0.4) and m == pytest.approx(0.4)
    I, m = best_subinterval(MeasurableSet1D.from_pairs([[0, 0.1]]), 0.5)
    assert (I.lo, I.hi) == pytest.approx((0.0, 0.2)) and m == pytest.approx(0.1)


def test_best_subinterval_fat_cantor_against_scan():
    E = fat_cantor(3, 0.25)
    I, m = best_subinterval(E, 0.25)
    k, masses = brute_best_cell(E, 0.25)
    cells = partition_cells(0.25)
    assert m == pytest.approx(masses.max(), abs=1e-5)
    assert m >= masses[k] - 1e-5
    assert abs(I.lo - cells[k, 0]) < 1e-12 or masses[k] == pytest.approx(m, abs=1e-5)


@given(interval_sets(), st.floats(0.02, 1.0))
def test_best_subinterval_pigeonhole(E, rho):
    _, m = best_subinterval(E, rho)
    assert m >= E.measure / math.ceil(5 / (2 * rho) - 1e-12) - 1e-12


def test_ray_measure_examples():
    sq = RectSet.from_list([[0, 1, 0, 1]])
    assert ray_measure(sq, (0, 0), (1, 0))[0] == pytest.approx(1.0)
    half = RectSet.from_list([[0.5, 1, 0, 1]])
    assert ray_measure(half, (0, 0), (1, 0))[0] == pytest.approx(0.5)
    d = math.sqrt(0.5)
    m, trace = ray_measure(sq, (0, 0), (d, d))
    assert m == pytest.approx(1.0)
    assert trace.as_pairs() == [[0.0, 1.0]]
    with pytest.raises(ValueError):
        ray_measure(sq, (0, 0), (1, 1))


@given(st.lists(st.tuples(st.floats(-0.5, 0.4), st.floats(-0.5, 0.4), st.floats(0.01, 0.3), st.floats(0.01, 0.3)),
                min_size=1, max_size=4),
       st.floats(-0.4, 0.4), st.floats(-0.4, 0.4), st.floats(0, 2 * math.pi))
def test_ray_measure_matches_sampling(rects, px, py, ang):
    r = np.array([[x, x + w, y, y + h] for x, y, w, h in rects])
    E = RectSet(r)
    z = (math.cos(ang), math.sin(ang))
    m, _ = ray_measure(E, (px, py), z)
    assert m == pytest.approx(sampled_trace_measure(r, (px, py), z), abs=2e-5)
    batch = ray_measures(E, (px, py), np.array([z]))
    assert batch[0] == pytest.approx(m, abs=1e-12)


@given(st.floats(-0.5, 0.3), st.floats(-0.5, 0.3), st.floats(0.01, 0.2), st.floats(0.01, 0.2),
       st.floats(0, 1), st.floats(0, 1))
def test_some_direction_sees_a_quarter(x0, y0, w, h, s, t):
    # family: one rectangle in [-1/2, 1/2]^2 viewed from one of its points
    E = RectSet.from_list([[x0, x0 + w, y0, y0 + h]])
    p = (x0 + s * w, y0 + t * h)
    ang = 2 * math.pi * np.arange(256) / 256
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    assert ray_measures(E, p, dirs).max() >= E.measure / 4


def test_rect_measure_of_overlaps():
    E = RectSet.from_list([[0, 1, 0, 1], [0.5, 1.5, 0.5, 1.5]])
    assert E.measure == pytest.approx(1.75)
    assert E.contains([[0.25, 0.25], [1.25, 1.25], [1.25, 0.25]]).tolist() == [True, True, False]
