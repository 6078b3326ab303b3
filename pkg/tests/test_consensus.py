import math

import numpy as np
import pytest

from treespace.consensus import (
    ScaleMap,
    back_transform,
    back_transform_weights,
    majority_consensus,
    normalize_lengths,
    normalize_tree,
    split_counts,
)
from treespace.core import TaxonSet, Tree, TreeError, parse_newick
from treespace.line import SimpleLine
from treespace.simulate import random_tree

ABCDE = TaxonSet("ABCDE")


def nwk(text):
    return parse_newick(text, ABCDE)


def test_identical_trees():
    t = nwk("((A:1,B:2):0.5,C:1,(D:1,E:1):0.25);")
    assert majority_consensus([t, t, t]) == t


def test_two_of_three_average():
    t1 = nwk("((A:1,B:1):1,C:1,D:1,E:1);")
    t2 = nwk("((A:1,B:1):2,C:1,D:1,E:1);")
    t3 = nwk("((A:1,C:1):1,B:1,D:1,E:1);")
    c = majority_consensus([t1, t2, t3])
    assert c.internal_masks() == {ABCDE.parse_split("A,B").mask}
    assert c.length(ABCDE.parse_split("A,B")) == 1.5


def test_exact_half_is_excluded():
    t1 = nwk("((A:1,B:1):1,C:1,D:1,E:1);")
    t2 = nwk("((A:1,C:1):1,B:1,D:1,E:1);")
    assert majority_consensus([t1, t2]).internal_masks() == frozenset()


def test_consensus_permutation_invariant_and_errors():
    rng = np.random.default_rng(0)
    taxa = TaxonSet("ABCDEFG")
    trees = [random_tree(taxa, rng, collapse=0.3) for _ in range(9)]
    assert majority_consensus(trees) == majority_consensus(trees[::-1])
    with pytest.raises(ValueError):
        majority_consensus([])
    with pytest.raises(TreeError):
        majority_consensus([trees[0], nwk("((A:1,B:1):1,C:1,D:1,E:1);")])


def test_normalize_example():
    ts = [
        nwk("((A:1,B:1):1,C:1,D:1,E:1);"),
        nwk("((A:1,B:1):2,C:1,D:1,E:1);"),
        nwk("((A:1,B:1):3,C:1,D:1,E:1);"),
    ]
    scaled, scales = normalize_lengths(ts)
    ab = ABCDE.parse_split("A,B")
    assert [t.length(ab) for t in scaled] == [0.5, 1.0, 1.5]
    assert scales.factor(ab) == 2.0
    assert all(v == 1.0 for t in scaled for k, v in t._lengths.items() if k != ab.mask)


def test_normalize_then_consensus_has_unit_internal_lengths():
    rng = np.random.default_rng(1)
    taxa = TaxonSet("ABCDEFGH")
    base = random_tree(taxa, rng)
    trees = [base.scaled({k: float(rng.uniform(0.2, 3.0)) for k in base._lengths}) for _ in range(7)]
    trees += [random_tree(taxa, rng) for _ in range(2)]
    scaled, scales = normalize_lengths(trees)
    cons = majority_consensus(scaled)
    for v in cons._lengths.values():
        assert v == pytest.approx(1.0, abs=1e-12)
    for t, s in zip(trees, scaled):
        assert normalize_tree(t, scales)._lengths == pytest.approx(s._lengths, rel=1e-15)
        back = back_transform(s, scales)
        for k, v in t._lengths.items():
            assert back._lengths[k] == pytest.approx(v, rel=1e-12)


def test_scale_map_csv_and_validation():
    sm = ScaleMap(ABCDE, {ABCDE.parse_split("A,B").mask: 2.0})
    assert sm.to_csv() == 'split,factor\n"A,B|C,D,E",2.0\n'
    with pytest.raises(ValueError):
        ScaleMap(ABCDE, {6: 0.0})


def test_split_counts():
    t1 = nwk("((A:1,B:1):1,C:1,D:1,E:1);")
    t2 = nwk("((A:1,B:1):1,C:1,(D:1,E:1):1);")
    counts = split_counts([t1, t2])
    assert counts == {ABCDE.parse_split("A,B").mask: 2, ABCDE.parse_split("D,E").mask: 1}


def _line():
    mid = nwk("((A:1,B:1):1,C:1,(D:1,E:1):2);")
    ab, de = ABCDE.parse_split("A,B").mask, ABCDE.parse_split("D,E").mask
    ac, ce = ABCDE.parse_split("A,C").mask, ABCDE.parse_split("C,E").mask
    return mid, SimpleLine(mid, [(ab, ac, 0.5), (de, ce, -0.5)])


def test_back_transform_weights_identity_and_single_factor():
    mid, line = _line()
    ones = ScaleMap(ABCDE, {k: 1.0 for k in mid._lengths})
    same = back_transform_weights(line, ones)
    assert same.key() == line.key()
    ab = ABCDE.parse_split("A,B").mask
    factors = {k: 1.0 for k in mid._lengths}
    factors[ab] = 2.0
    out = back_transform_weights(line, ScaleMap(ABCDE, factors))
    w = {sp.p: sp.w for sp in out.pairs}
    assert w[ab] == 1.0
    assert out.midpoint.length(ABCDE.parse_split("A,B")) == 2.0


def test_back_transform_keeps_breakpoints():
    # both lambda0(p) and w(p) scale by the factor of p, so s = -lambda0/w
    # cannot move; the result is still re-sorted and re-validated
    mid, line = _line()
    factors = {k: 1.0 for k in mid._lengths}
    factors[ABCDE.parse_split("A,B").mask] = 10.0
    factors[ABCDE.parse_split("D,E").mask] = 0.1
    out = back_transform_weights(line, ScaleMap(ABCDE, factors))
    assert out.breakpoints == pytest.approx(line.breakpoints, rel=1e-15)
    assert out.is_valid()


def test_back_transform_weights_missing_factor():
    _, line = _line()
    with pytest.raises(TreeError, match="no scale factor"):
        back_transform_weights(line, ScaleMap(ABCDE, {}))
