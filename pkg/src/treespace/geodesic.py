"""
Geodesic distances in tree-space.

The geodesic between two trees is found by support refinement: start from
the cone path (collapse everything in T_x \\ T_y, then grow T_y \\ T_x) and
repeatedly split a support pair (A, B) into (C, B \\ D), (A \\ C, D) whenever
the incompatibility graph between A and B has a vertex cover C + D of
normalised weight below one. Each cover is a min-cut in a small bipartite
flow network.

Splits of one tree that are compatible with every split of the other tree
never need to leave the path; they are treated like shared splits whose
length goes linearly to zero.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from itertools import combinations

from .core import Split, Tree, check_same_taxa, masks_compatible

RATIO_RTOL = 1e-12


# ---------------------------------------------------------------------------
# Minimum weight vertex cover on a bipartite graph
# ---------------------------------------------------------------------------


def max_flow_min_cut(capacity: list[list[float]], source: int, sink: int):
    """Edmonds-Karp on a dense capacity matrix.

    Returns ``(flow_value, reachable)`` where *reachable* is the source side
    of a minimum cut (nodes reachable in the final residual graph).
    """
    n = len(capacity)
    residual = [row[:] for row in capacity]
    value = 0.0
    while True:
        parent = [-1] * n
        parent[source] = source
        queue = deque([source])
        while queue and parent[sink] < 0:
            u = queue.popleft()
            row = residual[u]
            for v in range(n):
                if parent[v] < 0 and row[v] > 0.0:
                    parent[v] = u
                    queue.append(v)
        if parent[sink] < 0:
            break
        bottleneck = math.inf
        v = sink
        while v != source:
            u = parent[v]
            bottleneck = min(bottleneck, residual[u][v])
            v = u
        v = sink
        while v != source:
            u = parent[v]
            residual[u][v] -= bottleneck
            residual[v][u] += bottleneck
            v = u
        value += bottleneck
    reachable = {i for i in range(n) if parent[i] >= 0}
    return value, reachable


def min_weight_cover(a_weights, b_weights, edges):
    """Minimum weight vertex cover of a bipartite graph via min-cut.

    Parameters
    ----------
    a_weights, b_weights : sequence of float
    edges : iterable of (i, j)
        Edge between A-vertex ``i`` and B-vertex ``j``.

    Returns
    -------
    (weight, cover_a, cover_b) with index lists into the two sides.
    """
    na, nb = len(a_weights), len(b_weights)
    n = na + nb + 2
    source, sink = 0, n - 1
    cap = [[0.0] * n for _ in range(n)]
    for i, w in enumerate(a_weights):
        cap[source][1 + i] = w
    for j, w in enumerate(b_weights):
        cap[1 + na + j][sink] = w
    for i, j in edges:
        cap[1 + i][1 + na + j] = math.inf
    _, reach = max_flow_min_cut(cap, source, sink)
    cover_a = [i for i in range(na) if 1 + i not in reach]
    cover_b = [j for j in range(nb) if 1 + na + j in reach]
    weight = math.fsum([a_weights[i] for i in cover_a] + [b_weights[j] for j in cover_b])
    return weight, cover_a, cover_b


def min_weight_cover_bruteforce(a_weights, b_weights, edges):
    """Exhaustive minimum vertex cover; reference for :func:`min_weight_cover`."""
    na = len(a_weights)
    best = (math.inf, [], [])
    for r in range(na + 1):
        for chosen in combinations(range(na), r):
            left = set(range(na)) - set(chosen)
            cover_b = sorted({j for i, j in edges if i in left})
            w = math.fsum([a_weights[i] for i in chosen] + [b_weights[j] for j in cover_b])
            if w < best[0]:
                best = (w, list(chosen), cover_b)
    return best


# ---------------------------------------------------------------------------
# Support computation
# ---------------------------------------------------------------------------


def _norm(lengths, keys) -> float:
    return math.sqrt(math.fsum([lengths[k] ** 2 for k in keys]))


def _refine_pair(A, B, lx, ly):
    """Try to split one support pair; returns two pairs or None."""
    if len(A) < 2 or len(B) < 2:
        # a single vertex on either side is always a cover of weight one
        return None
    na2 = math.fsum([lx[a] ** 2 for a in A])
    nb2 = math.fsum([ly[b] ** 2 for b in B])
    wa = [lx[a] ** 2 / na2 for a in A]
    wb = [ly[b] ** 2 / nb2 for b in B]
    edges = [
        (i, j)
        for i, a in enumerate(A)
        for j, b in enumerate(B)
        if not masks_compatible(a, b)
    ]
    weight, ca, cb = min_weight_cover(wa, wb, edges)
    if weight >= 1.0 - RATIO_RTOL:
        return None
    C = tuple(A[i] for i in ca)
    D = tuple(B[j] for j in cb)
    Cs, Ds = set(C), set(D)
    return (C, tuple(b for b in B if b not in Ds)), (tuple(a for a in A if a not in Cs), D)


def _decompose(lx: dict, ly: dict):
    """Split the two length maps into common terms and a geodesic support.

    Returns ``(common, support)`` where *common* is a sorted list of
    ``(mask, len_x, len_y)`` (zero for a missing side) and *support* is a
    list of ``(A, B)`` mask tuples.
    """
    only_x = sorted(k for k in lx if k not in ly)
    only_y = sorted(k for k in ly if k not in lx)
    A, B, common = [], [], []
    for k in sorted(lx):
        if k in ly:
            common.append((k, lx[k], ly[k]))
    for a in only_x:
        if all(masks_compatible(a, b) for b in only_y):
            common.append((a, lx[a], 0.0))
        else:
            A.append(a)
    for b in only_y:
        if all(masks_compatible(a, b) for a in only_x):
            common.append((b, 0.0, ly[b]))
        else:
            B.append(b)
    if not A:
        return common, []
    support = [(tuple(A), tuple(B))]
    i = 0
    while i < len(support):
        split = _refine_pair(*support[i], lx, ly)
        if split is None:
            i += 1
        else:
            support[i:i + 1] = split
    return common, support


def _length(common, support, lx, ly) -> float:
    terms = [(u - v) ** 2 for _, u, v in common]
    for A, B in support:
        terms.append((_norm(lx, A) + _norm(ly, B)) ** 2)
    return math.sqrt(math.fsum(terms))


def distance_masks(lx: dict, ly: dict) -> float:
    """Geodesic distance between two ``{mask: length}`` maps."""
    common, support = _decompose(lx, ly)
    return _length(common, support, lx, ly)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicPath:
    """Support structure of the geodesic from ``x`` to ``y``.

    ``common`` lists ``(mask, len_x, len_y)`` for shared splits, including
    splits of one tree that are compatible with all of the other (their far
    length is zero). ``support`` holds the ordered pairs ``(A_i, B_i)``.
    """

    x: Tree
    y: Tree
    common: tuple
    support: tuple
    length: float

    @property
    def endpoints(self) -> tuple[Tree, Tree]:
        return self.x, self.y

    @property
    def common_splits(self) -> dict[Split, tuple[float, float]]:
        m = self.x.m
        return {Split(k, m): (u, v) for k, u, v in self.common}

    @property
    def support_splits(self) -> list[tuple[frozenset[Split], frozenset[Split]]]:
        m = self.x.m
        return [
            (frozenset(Split(a, m) for a in A), frozenset(Split(b, m) for b in B))
            for A, B in self.support
        ]

    def norms(self) -> list[tuple[float, float]]:
        lx, ly = self.x._lengths, self.y._lengths
        return [(_norm(lx, A), _norm(ly, B)) for A, B in self.support]

    def ratios(self) -> list[float]:
        return [a / b for a, b in self.norms()]

    def is_valid_support(self) -> bool:
        """Leg ratios are non-decreasing and no pair can be refined further."""
        r = self.ratios()
        if any(r[i] > r[i + 1] * (1 + RATIO_RTOL) for i in range(len(r) - 1)):
            return False
        lx, ly = self.x._lengths, self.y._lengths
        return all(_refine_pair(A, B, lx, ly) is None for A, B in self.support)


def geodesic(x: Tree, y: Tree) -> GeodesicPath:
    """The geodesic path between two trees on the same taxa."""
    check_same_taxa(x, y)
    lx, ly = x._lengths, y._lengths
    common, support = _decompose(lx, ly)
    return GeodesicPath(x, y, tuple(common), tuple(support), _length(common, support, lx, ly))


def distance(x: Tree, y: Tree) -> float:
    """Geodesic (BHV) distance between two trees."""
    check_same_taxa(x, y)
    return distance_masks(x._lengths, y._lengths)


def cone_path_distance(x: Tree, y: Tree) -> float:
    """Length of the path through the shared-topology face."""
    check_same_taxa(x, y)
    lx, ly = x._lengths, y._lengths
    terms = [(v - ly[k]) ** 2 for k, v in lx.items() if k in ly]
    na = _norm(lx, [k for k in lx if k not in ly])
    nb = _norm(ly, [k for k in ly if k not in lx])
    terms.append((na + nb) ** 2)
    return math.sqrt(math.fsum(terms))


def point_along(g: GeodesicPath, t: float) -> Tree:
    """The tree a fraction *t* of the way along the geodesic."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return g.x
    if t == 1.0:
        return g.y
    lx, ly = g.x._lengths, g.y._lengths
    out: dict[int, float] = {}
    for k, u, v in g.common:
        val = (1.0 - t) * u + t * v
        if val > 0.0:
            out[k] = val
    for A, B in g.support:
        na, nb = _norm(lx, A), _norm(ly, B)
        shrink = (1.0 - t) * na - t * nb
        if shrink > 0.0:
            for a in A:
                out[a] = lx[a] * shrink / na
        elif shrink < 0.0:
            for b in B:
                out[b] = ly[b] * (-shrink) / nb
    return Tree._trusted(g.x.taxa, out)


def _row(args):
    trees, i = args
    return [distance(trees[i], trees[j]) for j in range(i + 1, len(trees))]


def distance_matrix(trees: list[Tree], workers: int = 1):
    """Symmetric matrix of pairwise geodesic distances.

    With ``workers > 1`` rows are computed in a process pool; the result is
    identical to the serial one.
    """
    import numpy as np

    n = len(trees)
    out = np.zeros((n, n))
    jobs = [(trees, i) for i in range(n)]
    if workers > 1 and n > 2:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row, jobs))
    else:
        rows = [_row(job) for job in jobs]
    for i, row in enumerate(rows):
        out[i, i + 1:] = row
        out[i + 1:, i] = row
    return out
