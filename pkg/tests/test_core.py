import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treespace.core import (
    NewickError,
    Split,
    TaxonSet,
    Tree,
    TreeError,
    compatible,
    compatible_with,
    euclidean_distance,
    format_trees,
    masks_compatible,
    parse_newick,
    read_trees,
    write_newick,
    xnni_masks,
    xnni_replacements,
)
from treespace.simulate import random_tree

ABCDE = TaxonSet("ABCDE")


def sp(text, taxa=ABCDE):
    return taxa.parse_split(text)


# -- taxa and splits ----------------------------------------------------------


def test_taxon_set_rejects_small_and_duplicate():
    with pytest.raises(TreeError):
        TaxonSet("ABC")
    with pytest.raises(TreeError, match="duplicate"):
        TaxonSet(["A", "B", "C", "A"])
    with pytest.raises(TreeError):
        TaxonSet(["A", "B", "", "D"])


def test_split_canonical_form():
    assert sp("A,B") == sp("C,D,E")
    assert sp("A,B").mask == sp("C,D,E").mask
    assert not sp("A,B").mask & 1
    assert sp("A").is_terminal and sp("B,C,D,E").is_terminal
    assert not sp("A,B").is_terminal
    with pytest.raises(TreeError):
        ABCDE.split([])
    with pytest.raises(TreeError):
        ABCDE.split("ABCDE")


def test_format_split_smaller_side_first():
    assert ABCDE.format_split(sp("C,D,E").mask) == "A,B|C,D,E"
    assert ABCDE.format_split(sp("E,A").mask) == "A,E|B,C,D"


def test_compatible_examples():
    assert not compatible(sp("A,B"), sp("A,C"))
    assert compatible(sp("A,B"), sp("D,E"))
    assert compatible(sp("A,B"), sp("A,B"))
    assert all(compatible(sp("A,B"), sp(t)) for t in "ABCDE")
    with pytest.raises(TreeError):
        compatible(sp("A,B"), TaxonSet("ABCDEF").parse_split("A,B"))


def test_compatible_with_examples():
    assert compatible_with(sp("A,B"), [sp("D,E")])
    assert not compatible_with(sp("B,E"), [sp("A,B")])
    assert compatible_with(sp("B,E"), [])


@given(st.integers(1, 2 ** 9 - 1), st.integers(1, 2 ** 9 - 1))
def test_compatibility_matches_set_definition(a, b):
    full = 2 ** 10 - 1
    a, b = a << 1, b << 1
    X, Y = a, b
    expected = any(v == 0 for v in (X & Y, X & (full ^ Y), (full ^ X) & Y, (full ^ X) & (full ^ Y)))
    assert masks_compatible(a, b) == expected == masks_compatible(b, a)


# -- trees ---------------------------------------------------------------------


def _terminals(taxa, value=1.0):
    return {taxa.canonical(1 << i): value for i in range(taxa.m)}


def test_tree_validation():
    lengths = _terminals(ABCDE)
    Tree(ABCDE, lengths)
    with pytest.raises(TreeError, match="terminal"):
        Tree(ABCDE, {k: v for k, v in list(lengths.items())[1:]})
    with pytest.raises(TreeError):
        Tree(ABCDE, {**lengths, sp("A,B").mask: 0.0})
    with pytest.raises(TreeError, match="compatible"):
        Tree(ABCDE, {**lengths, sp("A,B").mask: 1.0, sp("A,C").mask: 1.0})


def test_tree_accepts_split_keys_and_equality():
    a = Tree(ABCDE, {**{Split(k, 5): v for k, v in _terminals(ABCDE).items()}, sp("A,B"): 2.0})
    b = Tree(ABCDE, {**_terminals(ABCDE), sp("A,B").mask: 2.0})
    assert a == b and hash(a) == hash(b)
    assert a.length(sp("A,B")) == 2.0 and a.length(sp("A,C")) == 0.0
    assert a.topology == frozenset({sp("A,B")})
    assert not a.is_resolved()


def test_euclidean_distance_example():
    term = _terminals(ABCDE)
    x = Tree(ABCDE, {**term, sp("A,B").mask: 1.0, sp("D,E").mask: 3.0})
    y = Tree(ABCDE, {**term, sp("A,C").mask: 3.0, sp("B,E").mask: 1.0})
    assert euclidean_distance(x, y) == pytest.approx(math.sqrt(20), abs=1e-15)
    assert euclidean_distance(x, x) == 0.0
    z = Tree(ABCDE, {**term, sp("A,B").mask: 1.25, sp("D,E").mask: 3.0})
    assert euclidean_distance(x, z) == pytest.approx(0.25)


# -- XNNI ----------------------------------------------------------------------


def test_xnni_worked_example():
    t = [sp("A,B"), sp("D,E")]
    got = xnni_replacements(t, sp("D,E"))
    assert got == {sp("C,D"), sp("C,E")}


def test_xnni_terminal_and_incompatible_errors():
    with pytest.raises(TreeError):
        xnni_replacements([sp("A,B")], sp("A"))
    with pytest.raises(TreeError):
        xnni_replacements([sp("A,C")], sp("A,B"))


def test_xnni_unresolved_star():
    # p = AB in a tree with no other internal split: far end has C, D, E
    got = xnni_replacements([sp("A,B")], sp("A,B"))
    assert got == {sp("A,C"), sp("A,D"), sp("A,E"), sp("B,C"), sp("B,D"), sp("B,E")}


@settings(max_examples=60, deadline=None)
@given(st.integers(5, 11), st.integers(0, 2 ** 31))
def test_xnni_on_binary_tree_gives_two(m, seed):
    rng = np.random.default_rng(seed)
    taxa = TaxonSet([f"x{i}" for i in range(m)])
    tree = random_tree(taxa, rng)
    internal = tree.internal_masks()
    for p in internal:
        got = xnni_masks(internal, p, taxa.full)
        assert len(got) == 2
        for q in got:
            assert not masks_compatible(p, q)
            assert all(masks_compatible(q, r) for r in internal if r != p)


# -- Newick --------------------------------------------------------------------


def test_parse_example_unrooted():
    t = parse_newick("((A:1,B:1):1,(C:1,D:1):1,E:1);")
    assert t.internal_masks() == {sp("A,B").mask, sp("C,D").mask}
    assert t.length(sp("A,B")) == 1.0 and t.length(sp("C,D")) == 1.0


def test_parse_rooted_is_derooted():
    taxa = TaxonSet("ABCD")
    t = parse_newick("((A:1,B:1):0.5,(C:1,D:1):0.5);", taxa)
    assert t.internal_masks() == {taxa.parse_split("A,B").mask}
    assert t.length(taxa.parse_split("A,B")) == 1.0


@pytest.mark.parametrize(
    "text, message",
    [
        ("((A:1,A:1):1,C:1,D:1);", "duplicate"),
        ("((A:1,B:1),C:1,D:1,E:1);", "missing branch length"),
        ("((A:1,B:1):1,C:1,D:0,E:1);", "zero"),
        ("((A:1,B:1):-1,C:1,D:1,E:1);", "invalid branch length"),
        ("((A:1,B:1):1,C:1);", "4 taxa"),
        ("((A:1,B:1):1,C:1,D:1,E:1", None),
    ],
)
def test_parse_errors(text, message):
    with pytest.raises(NewickError, match=message):
        parse_newick(text)


def test_parse_label_not_in_taxa():
    with pytest.raises(NewickError, match="extra"):
        parse_newick("((A:1,B:1):1,C:1,D:1,F:1);", ABCDE)


def test_zero_internal_edge_dropped_and_comments_quotes():
    t = parse_newick("[comment] ((A:1,B:1):0,C:1,'D':1, E:1 ) ;")
    assert t.internal_masks() == frozenset()
    q = parse_newick("(('a b':1,B:1):1,C:1,D:1,E:1);")
    assert "a b" in q.taxa.names
    assert "'a b'" in write_newick(q)


def test_write_examples():
    t = Tree(ABCDE, {**_terminals(ABCDE), sp("A,B").mask: 1.0})
    assert write_newick(t) == "((A:1,B:1):1,C:1,D:1,E:1);"
    abcd = TaxonSet("ABCD")
    assert write_newick(Tree(abcd, _terminals(abcd))) == "(A:1,B:1,C:1,D:1);"


@settings(max_examples=200, deadline=None)
@given(st.integers(4, 14), st.floats(0.0, 0.6), st.integers(0, 2 ** 31))
def test_newick_round_trip(m, collapse, seed):
    rng = np.random.default_rng(seed)
    taxa = TaxonSet([f"t{i}" for i in range(m)])
    tree = random_tree(taxa, rng, collapse=collapse)
    back = parse_newick(write_newick(tree), taxa)
    assert back._lengths.keys() == tree._lengths.keys()
    for k, v in tree._lengths.items():
        assert back._lengths[k] == pytest.approx(v, rel=1e-12)


def test_read_trees_comments_and_line_numbers():
    text = "# header\n((A:1,B:1):1,C:1,D:1,E:1);\n\n((A:1,C:1):1,B:1,D:1,E:1);\n"
    trees = read_trees(text.splitlines())
    assert len(trees) == 2 and trees[0].taxa == trees[1].taxa
    assert format_trees(trees).count("\n") == 2
    with pytest.raises(NewickError, match="line 2"):
        read_trees(["((A:1,B:1):1,C:1,D:1,E:1);", "((A:1,B:1):1,C:1,D:1,F:1);"])
