import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import FOUR_ROOT_TWO, TWO_ROOT_TEN, five_taxon_pair
from treespace.core import TaxonSet, Tree, TreeError, euclidean_distance
from treespace.geodesic import (
    cone_path_distance,
    distance,
    distance_matrix,
    geodesic,
    min_weight_cover,
    min_weight_cover_bruteforce,
    point_along,
)
from treespace.simulate import random_tree

ABCDE = TaxonSet("ABCDE")


def _taxa(m):
    return TaxonSet([f"t{i}" for i in range(m)])


def _terminals(taxa, value=1.0):
    return {taxa.canonical(1 << i): value for i in range(taxa.m)}


# -- minimum weight vertex cover ------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(
    st.integers(1, 6),
    st.integers(1, 6),
    st.data(),
)
def test_min_cover_matches_bruteforce(na, nb, data):
    wa = data.draw(st.lists(st.floats(0.01, 1.0), min_size=na, max_size=na))
    wb = data.draw(st.lists(st.floats(0.01, 1.0), min_size=nb, max_size=nb))
    edges = data.draw(st.sets(st.tuples(st.integers(0, na - 1), st.integers(0, nb - 1))))
    w, ca, cb = min_weight_cover(wa, wb, sorted(edges))
    w_ref, _, _ = min_weight_cover_bruteforce(wa, wb, sorted(edges))
    assert w == pytest.approx(w_ref, abs=1e-12)
    cover_a, cover_b = set(ca), set(cb)
    assert all(i in cover_a or j in cover_b for i, j in edges)


# -- worked examples --------------------------------------------------------------


def test_identity_has_empty_support():
    x, _ = five_taxon_pair(ABCDE)
    g = geodesic(x, x)
    assert g.length == 0.0 and g.support == ()


def test_four_taxa_through_star():
    taxa = TaxonSet("ABCD")
    x = Tree(taxa, {**_terminals(taxa), taxa.parse_split("A,B").mask: 1.0})
    y = Tree(taxa, {**_terminals(taxa), taxa.parse_split("A,C").mask: 2.0})
    assert distance(x, y) == 3.0
    assert cone_path_distance(x, y) == 3.0


def test_five_taxon_frozen_values():
    x, y = five_taxon_pair(ABCDE)
    g = geodesic(x, y)
    assert g.length == pytest.approx(FOUR_ROOT_TWO, abs=1e-12)
    assert distance(x, y) == pytest.approx(FOUR_ROOT_TWO, abs=1e-12)
    assert cone_path_distance(x, y) == pytest.approx(TWO_ROOT_TEN, abs=1e-12)
    assert g.is_valid_support()
    assert len(g.support) == 2


def test_five_taxon_additivity():
    x, y = five_taxon_pair(ABCDE)
    g = geodesic(x, y)
    pts = [point_along(g, t) for t in (0.0, 0.25, 0.5, 0.75, 1.0)]
    total = math.fsum(distance(a, b) for a, b in zip(pts, pts[1:]))
    assert total == pytest.approx(FOUR_ROOT_TWO, abs=1e-8)


def test_same_topology_is_euclidean_and_midpoint_average():
    taxa = _taxa(7)
    rng = np.random.default_rng(3)
    x = random_tree(taxa, rng)
    y = x.scaled({k: float(rng.uniform(0.5, 2.0)) for k in x._lengths})
    assert distance(x, y) == euclidean_distance(x, y)
    mid = point_along(geodesic(x, y), 0.5)
    for k in x._lengths:
        assert mid._lengths[k] == pytest.approx(0.5 * (x._lengths[k] + y._lengths[k]), rel=1e-14)


def test_disjoint_single_splits_cone():
    taxa = ABCDE
    x = Tree(taxa, {**_terminals(taxa), taxa.parse_split("A,B").mask: 0.7})
    y = Tree(taxa, {**_terminals(taxa), taxa.parse_split("A,C").mask: 0.4})
    assert cone_path_distance(x, y) == pytest.approx(1.1)
    assert distance(x, y) == pytest.approx(1.1)


def test_point_along_errors_and_endpoints():
    x, y = five_taxon_pair(ABCDE)
    g = geodesic(x, y)
    assert point_along(g, 0.0) == x and point_along(g, 1.0) == y
    with pytest.raises(ValueError):
        point_along(g, 1.5)
    with pytest.raises(ValueError):
        point_along(g, -0.1)


def test_mismatched_taxa():
    x, _ = five_taxon_pair(ABCDE)
    other = TaxonSet("ABCDF")
    y = Tree(other, _terminals(other))
    with pytest.raises(TreeError):
        distance(x, y)


# -- properties -------------------------------------------------------------------


@settings(max_examples=150, deadline=None)
@given(st.integers(5, 12), st.integers(0, 2 ** 31))
def test_support_structure_invariants(m, seed):
    rng = np.random.default_rng(seed)
    taxa = _taxa(m)
    x = random_tree(taxa, rng, collapse=0.25)
    y = random_tree(taxa, rng, collapse=0.25)
    g = geodesic(x, y)
    assert g.is_valid_support()
    lx, ly = x._lengths, y._lengths
    A = [a for pair in g.support for a in pair[0]]
    B = [b for pair in g.support for b in pair[1]]
    assert len(A) == len(set(A)) and len(B) == len(set(B))
    only_x = {k for k in lx if k not in ly}
    only_y = {k for k in ly if k not in lx}
    carried = {k for k, u, v in g.common}
    assert set(A) | (carried & only_x) == only_x
    assert set(B) | (carried & only_y) == only_y
    # shared splits are present at every interior point
    shared = set(lx) & set(ly)
    for t in (0.2, 0.5, 0.8):
        assert shared <= set(point_along(g, t)._lengths)
    terms = [(u - v) ** 2 for _, u, v in g.common] + [(a + b) ** 2 for a, b in g.norms()]
    assert g.length == pytest.approx(math.sqrt(math.fsum(terms)), rel=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(5, 10), st.integers(0, 2 ** 31), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_point_along_arc_length(m, seed, t1, t2):
    rng = np.random.default_rng(seed)
    taxa = _taxa(m)
    x, y = random_tree(taxa, rng, collapse=0.2), random_tree(taxa, rng, collapse=0.2)
    g = geodesic(x, y)
    t1, t2 = sorted((t1, t2))
    d = distance(point_along(g, t1), point_along(g, t2))
    assert d == pytest.approx((t2 - t1) * g.length, abs=1e-9 * max(1.0, g.length))


@settings(max_examples=100, deadline=None)
@given(st.integers(5, 10), st.integers(0, 2 ** 31))
def test_identity_of_indiscernibles(m, seed):
    rng = np.random.default_rng(seed)
    taxa = _taxa(m)
    x, y = random_tree(taxa, rng, collapse=0.2), random_tree(taxa, rng, collapse=0.2)
    assert distance(x, x) == 0.0
    assert (distance(x, y) == 0.0) == (x == y)


def test_distance_matrix_symmetric_and_parallel_identical():
    rng = np.random.default_rng(5)
    taxa = _taxa(7)
    trees = [random_tree(taxa, rng, collapse=0.2) for _ in range(6)]
    d = distance_matrix(trees)
    assert np.array_equal(d, d.T) and not d.diagonal().any()
    assert np.array_equal(d, distance_matrix(trees, workers=2))
