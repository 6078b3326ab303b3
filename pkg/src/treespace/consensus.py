"""Majority-rule consensus midpoint and per-split branch-length normalization."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import Split, TaxonSet, Tree, TreeError, check_same_taxa, is_terminal_mask


@dataclass(frozen=True)
class ScaleMap:
    """Per-split divisors used by :func:`normalize_lengths`."""

    taxa: TaxonSet
    factors: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.factors.items():
            if not v > 0:
                raise ValueError(f"scale factor for split {k:#x} must be positive")

    def factor(self, split) -> float:
        key = split.mask if isinstance(split, Split) else split
        return self.factors.get(key, 1.0)

    def items(self):
        return sorted(self.factors.items())

    def to_csv(self) -> str:
        rows = ["split,factor"]
        for k, v in self.items():
            rows.append(f'"{self.taxa.format_split(k)}",{v!r}')
        return "\n".join(rows) + "\n"


def _occurrences(trees: Sequence[Tree]) -> dict[int, list[float]]:
    seen: dict[int, list[float]] = defaultdict(list)
    for t in trees:
        for k, v in t._lengths.items():
            seen[k].append(v)
    return seen


def majority_consensus(trees: Sequence[Tree]) -> Tree:
    """Splits present in strictly more than half the trees, mean lengths.

    Each retained split gets the mean of its length over the trees that
    contain it.
    """
    if not trees:
        raise ValueError("majority consensus of an empty list")
    taxa = check_same_taxa(*trees)
    n = len(trees)
    lengths = {
        k: math.fsum(v) / len(v)
        for k, v in _occurrences(trees).items()
        if 2 * len(v) > n
    }
    return Tree(taxa, lengths)


def normalize_lengths(trees: Sequence[Tree]) -> tuple[list[Tree], ScaleMap]:
    """Scale every split so its mean length over the trees holding it is one."""
    if not trees:
        raise ValueError("cannot normalize an empty list of trees")
    taxa = check_same_taxa(*trees)
    factors = {k: math.fsum(v) / len(v) for k, v in _occurrences(trees).items()}
    scaled = [
        Tree._trusted(taxa, {k: v / factors[k] for k, v in t._lengths.items()})
        for t in trees
    ]
    return scaled, ScaleMap(taxa, factors)


def back_transform(tree: Tree, scales: ScaleMap) -> Tree:
    """Undo :func:`normalize_lengths` on one tree (unknown splits keep scale 1)."""
    if tree.taxa != scales.taxa:
        raise TreeError("scale map is over a different taxon set")
    return tree.scaled(scales.factors)


def normalize_tree(tree: Tree, scales: ScaleMap) -> Tree:
    """Apply existing scale factors to another tree, e.g. a supplied midpoint."""
    if tree.taxa != scales.taxa:
        raise TreeError("scale map is over a different taxon set")
    return tree.scaled({k: 1.0 / v for k, v in scales.factors.items()})


def split_counts(trees: Sequence[Tree], internal_only: bool = True) -> dict[int, int]:
    full = trees[0].taxa.full
    counts = {k: len(v) for k, v in _occurrences(trees).items()}
    if internal_only:
        counts = {k: c for k, c in counts.items() if not is_terminal_mask(k, full)}
    return counts


def back_transform_weights(line, scales: ScaleMap):
    """Map a line fitted to normalized data back to the original scale.

    Returns a new line with rescaled midpoint and weights; see
    :meth:`treespace.line.SimpleLine.rescaled`.
    """
    if line.taxa != scales.taxa:
        raise TreeError("scale map is over a different taxon set")
    for sp in line.pairs:
        if sp.p not in scales.factors:
            raise TreeError(f"no scale factor for split {scales.taxa.format_split(sp.p)}")
    return line.rescaled(scales)
