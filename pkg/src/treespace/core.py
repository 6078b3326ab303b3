"""
Taxon sets, splits, trees and Newick I/O.

A split is stored as an integer bit mask over taxon indices. The canonical
side is the one that does *not* contain taxon 0, so two splits are equal iff
their masks are equal. Trees keep their branch lengths in a plain
``{mask: length}`` dict; the :class:`Split` objects are a thin public wrapper
used at API boundaries, while the geometry code works on the raw masks.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence


class TreeError(ValueError):
    """Raised for malformed trees, taxon mismatches and Newick errors."""


class NewickError(TreeError):
    pass


# ---------------------------------------------------------------------------
# Taxa and splits
# ---------------------------------------------------------------------------


class TaxonSet:
    """An ordered set of distinct taxon labels (at least four)."""

    __slots__ = ("names", "_index", "full")

    def __init__(self, names: Iterable[str]):
        names = tuple(names)
        if len(names) < 4:
            raise TreeError(f"need at least 4 taxa, got {len(names)}")
        if any(not isinstance(n, str) or not n for n in names):
            raise TreeError("taxon labels must be nonempty strings")
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise TreeError(f"duplicate taxon label(s): {', '.join(dup)}")
        self.names = names
        self._index = {n: i for i, n in enumerate(names)}
        self.full = (1 << len(names)) - 1

    @property
    def m(self) -> int:
        return len(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)

    def __eq__(self, other) -> bool:
        return isinstance(other, TaxonSet) and self.names == other.names

    def __hash__(self) -> int:
        return hash(self.names)

    def __repr__(self) -> str:
        return f"TaxonSet({list(self.names)!r})"

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise TreeError(f"taxon {name!r} not in taxon set") from None

    def canonical(self, mask: int) -> int:
        """Return the canonical mask (side without taxon 0) of a bipartition."""
        if mask & 1:
            mask = self.full ^ mask
        if mask == 0:
            raise TreeError("a split needs two nonempty sides")
        return mask

    def split(self, side: Iterable[str]) -> "Split":
        """Build a split from the labels on one side."""
        mask = 0
        for name in side:
            mask |= 1 << self.index(name)
        if mask in (0, self.full):
            raise TreeError("a split needs two nonempty sides")
        return Split(canonical_mask(mask, self.full), self.m)

    def parse_split(self, text: str) -> "Split":
        """Parse ``"A,B"`` or ``"A,B|C,D,E"`` into a split."""
        left = text.split("|")[0]
        return self.split(s.strip() for s in left.split(",") if s.strip())

    def labels(self, mask: int) -> list[str]:
        return [n for i, n in enumerate(self.names) if mask >> i & 1]

    def format_split(self, mask: int) -> str:
        """Render ``"A,B|C,D,E"`` with the smaller side first, taxa sorted."""
        other = self.full ^ mask
        a, b = sorted(self.labels(mask)), sorted(self.labels(other))
        if (len(b), b) < (len(a), a):
            a, b = b, a
        return ",".join(a) + "|" + ",".join(b)


def canonical_mask(mask: int, full: int) -> int:
    return full ^ mask if mask & 1 else mask


def popcount(x: int) -> int:
    return bin(x).count("1")


def is_terminal_mask(mask: int, full: int) -> bool:
    # canonical masks never hold taxon 0, so the other side is terminal
    # exactly when the mask covers everything except taxon 0
    return mask & (mask - 1) == 0 or mask == full ^ 1


def masks_compatible(a: int, b: int) -> bool:
    """Compatibility of two canonical masks.

    Both complements contain taxon 0, so only three of the four
    intersections can be empty.
    """
    c = a & b
    return c == 0 or c == a or c == b


@dataclass(frozen=True, order=True)
class Split:
    """A bipartition of the taxa, stored canonically as a bit mask."""

    mask: int
    n_taxa: int

    def __post_init__(self):
        full = (1 << self.n_taxa) - 1
        if self.mask & 1 or self.mask <= 0 or self.mask > full:
            raise TreeError(f"mask {self.mask:#x} is not a canonical split")

    @property
    def is_terminal(self) -> bool:
        return is_terminal_mask(self.mask, (1 << self.n_taxa) - 1)

    def side(self) -> frozenset[int]:
        """Taxon indices on the canonical side."""
        return frozenset(i for i in range(self.n_taxa) if self.mask >> i & 1)

    def __repr__(self) -> str:
        return f"Split({sorted(self.side())}|{self.n_taxa})"


def _same_width(p: Split, q: Split) -> None:
    if p.n_taxa != q.n_taxa:
        raise TreeError("splits are over different taxon sets")


def compatible(p: Split, q: Split) -> bool:
    """True iff the two splits can appear together on one tree."""
    _same_width(p, q)
    return masks_compatible(p.mask, q.mask)


def compatible_with(p: Split, topology: Iterable[Split]) -> bool:
    """True iff *p* is compatible with every split in *topology*."""
    for q in topology:
        _same_width(p, q)
        if not masks_compatible(p.mask, q.mask):
            return False
    return True


def all_compatible(masks: Sequence[int]) -> bool:
    for i, a in enumerate(masks):
        for b in masks[i + 1:]:
            if not masks_compatible(a, b):
                return False
    return True


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------


class Tree:
    """An unrooted tree as a weighted set of pairwise compatible splits.

    Parameters
    ----------
    taxa : TaxonSet
    lengths : mapping
        Split (or canonical mask) to strictly positive branch length. All
        terminal splits must be present.
    """

    __slots__ = ("taxa", "_lengths", "_hash")

    def __init__(self, taxa: TaxonSet, lengths: Mapping):
        self.taxa = taxa
        lens: dict[int, float] = {}
        for key, value in lengths.items():
            if isinstance(key, Split):
                if key.n_taxa != taxa.m:
                    raise TreeError("split is over a different taxon set")
                key = key.mask
            key = canonical_mask(int(key), taxa.full)
            value = float(value)
            if not value > 0 or not math.isfinite(value):
                raise TreeError(f"branch length must be positive and finite, got {value}")
            if key in lens:
                raise TreeError("split listed twice")
            lens[key] = value
        self._lengths = lens
        self._hash = None
        self._check()

    @classmethod
    def _trusted(cls, taxa: TaxonSet, lengths: dict[int, float]) -> "Tree":
        # hot-path constructor: caller guarantees the invariants
        obj = object.__new__(cls)
        obj.taxa = taxa
        obj._lengths = lengths
        obj._hash = None
        return obj

    def _check(self) -> None:
        m, full = self.taxa.m, self.taxa.full
        for i in range(1, m):
            if (1 << i) not in self._lengths:
                raise TreeError(f"terminal split for {self.taxa.names[i]!r} missing")
        if (full ^ 1) not in self._lengths:
            raise TreeError(f"terminal split for {self.taxa.names[0]!r} missing")
        if len(self._lengths) > 2 * m - 3:
            raise TreeError("too many splits for a tree")
        if not all_compatible(list(self._lengths)):
            raise TreeError("splits are not pairwise compatible")

    # -- accessors ---------------------------------------------------------

    @property
    def m(self) -> int:
        return self.taxa.m

    @property
    def masks(self) -> Mapping[int, float]:
        """Read-only ``{mask: length}`` view."""
        return MappingProxyType(self._lengths)

    @property
    def lengths(self) -> dict[Split, float]:
        m = self.taxa.m
        return {Split(k, m): v for k, v in sorted(self._lengths.items())}

    @property
    def splits(self) -> frozenset[Split]:
        m = self.taxa.m
        return frozenset(Split(k, m) for k in self._lengths)

    @property
    def topology(self) -> frozenset[Split]:
        """Internal (nonterminal) splits."""
        m, full = self.taxa.m, self.taxa.full
        return frozenset(Split(k, m) for k in self._lengths if not is_terminal_mask(k, full))

    def internal_masks(self) -> frozenset[int]:
        full = self.taxa.full
        return frozenset(k for k in self._lengths if not is_terminal_mask(k, full))

    def length(self, split) -> float:
        """Branch length of *split*, zero when absent."""
        key = split.mask if isinstance(split, Split) else split
        return self._lengths.get(key, 0.0)

    def is_resolved(self) -> bool:
        return len(self._lengths) == 2 * self.taxa.m - 3

    def scaled(self, factors: Mapping[int, float]) -> "Tree":
        """Multiply each length by ``factors.get(mask, 1)``."""
        return Tree._trusted(
            self.taxa, {k: v * factors.get(k, 1.0) for k, v in self._lengths.items()}
        )

    def vector(self, order: Sequence[int]):
        import numpy as np

        return np.array([self._lengths.get(k, 0.0) for k in order])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Tree)
            and self.taxa == other.taxa
            and self._lengths == other._lengths
        )

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.taxa, frozenset(self._lengths.items())))
        return self._hash

    def __repr__(self) -> str:
        return f"Tree({write_newick(self)!r})"


def check_same_taxa(*trees: Tree) -> TaxonSet:
    taxa = trees[0].taxa
    for t in trees[1:]:
        if t.taxa != taxa:
            raise TreeError("trees are over different taxon sets")
    return taxa


def euclidean_distance(x: Tree, y: Tree) -> float:
    """L2 distance between the split-length vectors of two trees."""
    check_same_taxa(x, y)
    lx, ly = x._lengths, y._lengths
    terms = [(v - ly.get(k, 0.0)) ** 2 for k, v in lx.items()]
    terms.extend(v * v for k, v in ly.items() if k not in lx)
    return math.sqrt(math.fsum(terms))


# ---------------------------------------------------------------------------
# Extended nearest neighbour interchange
# ---------------------------------------------------------------------------


def _subtrees(side: int, others: Iterable[int], full: int) -> list[int]:
    """Subtrees hanging off the end of an edge whose far side is *side*."""
    inside = []
    for q in others:
        for s in (q, full ^ q):
            if s & side == s and s != side:
                inside.append(s)
    maximal = [s for s in inside if not any(s != t and s & t == s for t in inside)]
    maximal = sorted(set(maximal))
    covered = 0
    for s in maximal:
        covered |= s
    rest = side & ~covered
    i = 0
    while rest >> i:
        if rest >> i & 1:
            maximal.append(1 << i)
        i += 1
    return maximal


def xnni_masks(topology: Iterable[int], p: int, full: int) -> list[int]:
    """All splits reachable from *p* by one XNNI move, as canonical masks.

    *topology* may or may not contain *p*; the remaining splits must be
    compatible with *p*.
    """
    if is_terminal_mask(p, full):
        raise TreeError("terminal splits have no XNNI replacements")
    others = [q for q in topology if q != p]
    for q in others:
        if not masks_compatible(p, q):
            raise TreeError("split is not compatible with the topology")
    near = _subtrees(p, others, full)
    far = _subtrees(full ^ p, others, full)
    out = set()
    for a in near:
        for b in far:
            out.add(canonical_mask((p ^ a) | b, full))
    return sorted(out)


def xnni_replacements(topology: Iterable[Split], p: Split) -> set[Split]:
    """Splits obtainable from *p* by swapping one subtree across its edge."""
    topology = list(topology)
    for q in topology:
        _same_width(p, q)
    full = (1 << p.n_taxa) - 1
    return {Split(k, p.n_taxa) for k in xnni_masks([q.mask for q in topology], p.mask, full)}


# ---------------------------------------------------------------------------
# Newick
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:('(?:[^']|'')*')|([(),:;])|([^\s(),:;\[\]']+))")


def _strip_comments(text: str) -> str:
    out, depth = [], 0
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            if depth == 0:
                raise NewickError("unbalanced ']'")
            depth -= 1
        elif depth == 0:
            out.append(ch)
    if depth:
        raise NewickError("unterminated comment")
    return "".join(out)


def _tokenize(text: str) -> list[str]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None or match.end() == pos:
            raise NewickError(f"unexpected character {text[pos]!r} at offset {pos}")
        quoted, punct, word = match.groups()
        if quoted is not None:
            tokens.append("\0" + quoted[1:-1].replace("''", "'"))
        else:
            tokens.append(punct if punct is not None else word)
        pos = match.end()
    return tokens


class _Node:
    __slots__ = ("label", "length", "children")

    def __init__(self):
        self.label = None
        self.length = None
        self.children = []


def _parse_nodes(tokens: list[str]) -> _Node:
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def node():
        nonlocal pos
        n = _Node()
        if peek() == "(":
            pos += 1
            n.children.append(node())
            while peek() == ",":
                pos += 1
                n.children.append(node())
            if peek() != ")":
                raise NewickError("expected ')'")
            pos += 1
        tok = peek()
        if tok is not None and tok not in "(),:;":
            n.label = tok.lstrip("\0")
            pos += 1
        if peek() == ":":
            pos += 1
            tok = peek()
            try:
                n.length = float(tok)
            except (TypeError, ValueError):
                raise NewickError(f"bad branch length {tok!r}") from None
            pos += 1
        return n

    root = node()
    if peek() == ";":
        pos += 1
    if pos != len(tokens):
        raise NewickError(f"trailing input after tree: {' '.join(tokens[pos:pos + 3])!r}")
    return root


def parse_newick(text: str, taxa: TaxonSet | None = None) -> Tree:
    """Parse one Newick expression into an unrooted :class:`Tree`.

    Every edge needs a branch length. A degree-2 root is suppressed by
    summing its two edges. Zero-length internal edges are dropped, leaving an
    unresolved tree; zero or negative terminal edges are errors.
    """
    root = _parse_nodes(_tokenize(_strip_comments(text)))
    if not root.children:
        raise NewickError("tree has no internal structure")

    leaves: list[tuple[str, float | None]] = []
    edges: list[tuple[int, float]] = []

    def walk(n: _Node) -> int:
        if not n.children:
            if not n.label:
                raise NewickError("unlabelled leaf")
            leaves.append((n.label, n.length))
            mask = 1 << (len(leaves) - 1)
        else:
            mask = 0
            for c in n.children:
                mask |= walk(c)
        if n is not root:
            if n.length is None:
                what = repr(n.label) if not n.children else "internal edge"
                raise NewickError(f"missing branch length on {what}")
            edges.append((mask, n.length))
        return mask

    walk(root)
    names = [label for label, _ in leaves]
    if taxa is None:
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise NewickError(f"duplicate leaf label(s): {', '.join(dup)}")
        try:
            taxa = TaxonSet(names)
        except TreeError as exc:
            raise NewickError(str(exc)) from None
    else:
        if sorted(names) != sorted(taxa.names) or len(set(names)) != len(names):
            extra = sorted(set(names) - set(taxa.names))
            missing = sorted(set(taxa.names) - set(names))
            if len(set(names)) != len(names):
                raise NewickError("duplicate leaf labels")
            raise NewickError(f"leaf labels do not match taxon set (extra {extra}, missing {missing})")
    # leaf order in the text -> index in the taxon set
    remap = [taxa.index(n) for n in names]

    full = taxa.full
    lengths: dict[int, float] = {}
    for local, length in edges:
        mask, i = 0, 0
        while local >> i:
            if local >> i & 1:
                mask |= 1 << remap[i]
            i += 1
        if mask == full:
            continue
        if length < 0 or not math.isfinite(length):
            raise NewickError(f"invalid branch length {length}")
        key = canonical_mask(mask, full)
        lengths[key] = lengths.get(key, 0.0) + length
    for key in list(lengths):
        if lengths[key] == 0.0:
            if is_terminal_mask(key, full):
                raise NewickError("terminal branch of length zero")
            del lengths[key]
    try:
        return Tree(taxa, lengths)
    except TreeError as exc:
        raise NewickError(str(exc)) from None


def _format_length(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def _format_label(name: str) -> str:
    if re.search(r"[\s(),:;\[\]']", name):
        return "'" + name.replace("'", "''") + "'"
    return name


def write_newick(x: Tree) -> str:
    """Serialize deterministically, rooted at the node next to the last taxon.

    Children are ordered by their smallest taxon index.
    """
    taxa = x.taxa
    m, full = taxa.m, taxa.full
    last = 1 << (m - 1)
    # clusters are split sides that exclude the last taxon
    clusters = {}
    for k, v in x._lengths.items():
        side = full ^ k if k & last else k
        if side == full ^ last:
            continue  # terminal edge of the last taxon: attaches to the root
        clusters[side] = v
    order = sorted(clusters, key=popcount)
    children: dict[int, list[int]] = {full ^ last: []}
    for c in clusters:
        children.setdefault(c, [])
    for i, c in enumerate(order):
        parent = full ^ last
        for d in order[i + 1:]:
            if d & c == c and d != c:
                parent = d
                break
        children[parent].append(c)

    def low(c: int) -> int:
        return (c & -c).bit_length()

    def render(c: int) -> str:
        if popcount(c) == 1:
            return _format_label(taxa.names[c.bit_length() - 1])
        kids = sorted(children[c], key=low)
        return "(" + ",".join(f"{render(k)}:{_format_length(clusters[k])}" for k in kids) + ")"

    body = render(full ^ last)
    tail = f"{_format_label(taxa.names[m - 1])}:{_format_length(x._lengths[canonical_mask(last, full)])}"
    return body[:-1] + "," + tail + ");"


def read_trees(lines: Iterable[str], taxa: TaxonSet | None = None) -> list[Tree]:
    """Parse a multi-tree file: one Newick per line, ``#`` lines are comments.

    All trees must share the taxon set of the first one.
    """
    trees = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            tree = parse_newick(line, taxa)
        except TreeError as exc:
            raise NewickError(f"line {lineno}: {exc}") from None
        taxa = tree.taxa
        trees.append(tree)
    return trees


def format_trees(trees: Iterable[Tree]) -> str:
    return "".join(write_newick(t) + "\n" for t in trees)
