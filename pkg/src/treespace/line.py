"""
Simple lines through a midpoint tree and projection onto them.

A simple line is given by the midpoint ``x0`` and an ordered list of split
pairs ``(p, p', w)``. Along the line the length of ``p`` is
``lambda0(p) + s*w`` while that is positive; once it goes negative ``p`` is
gone and ``p'`` carries the absolute value. Every other split keeps its
midpoint length. The pair swaps at ``s_break = -lambda0(p)/w``, and the
pairs are kept ordered by breakpoint.

The speed of the line is ``sqrt(sum w_i**2)`` in every orthant, so arc
length is ``speed * |s1 - s2|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import (
    Split,
    Tree,
    TreeError,
    all_compatible,
    check_same_taxa,
    is_terminal_mask,
    masks_compatible,
    xnni_masks,
)
from .geodesic import distance_masks

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
BREAK_RTOL = 1e-12


class InvalidLine(ValueError):
    """A pair list that does not describe a valid simple line."""


class InvalidExtension(ValueError):
    """A proposed pair that cannot extend the line at all."""


def _mask(split) -> int:
    return split.mask if isinstance(split, Split) else int(split)


def golden_section(f, a: float, b: float, tol: float, maximize: bool = False):
    """Golden-section search on ``[a, b]``.

    Returns ``(x, fx)`` for the best point evaluated. Stops when the bracket
    is narrower than *tol*.
    """
    sign = -1.0 if maximize else 1.0
    if b < a:
        a, b = b, a
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x)
    c = b - INV_PHI * h
    d = a + INV_PHI * h
    fc, fd = sign * f(c), sign * f(d)
    best = (c, fc) if fc <= fd else (d, fd)
    while h > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            h = b - a
            c = b - INV_PHI * h
            fc = sign * f(c)
            if fc < best[1]:
                best = (c, fc)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = sign * f(d)
            if fd < best[1]:
                best = (d, fd)
    return best[0], sign * best[1]


@dataclass(frozen=True)
class SplitPair:
    """One swap on the line; ``p`` and ``p_prime`` are canonical masks."""

    p: int
    p_prime: int
    w: float
    s_break: float

    def before(self) -> int:
        """Split present just below the breakpoint."""
        return self.p_prime if self.w > 0 else self.p

    def after(self) -> int:
        return self.p if self.w > 0 else self.p_prime


@dataclass(frozen=True)
class WeightRange:
    """Feasible weights ``lo <= w <= hi`` (infinite ends allowed, 0 excluded)."""

    lo: float
    hi: float

    def clipped(self, cap: float, floor: float):
        """Intersect with ``floor <= |w| <= cap``; None when empty."""
        if self.hi <= 0:
            lo, hi = max(self.lo, -cap), min(self.hi, -floor)
        else:
            lo, hi = max(self.lo, floor), min(self.hi, cap)
        if lo > hi:
            return None
        return WeightRange(lo, hi)


@dataclass(frozen=True)
class Projection:
    s_star: float
    y: Tree
    d_perp: float
    d_par: float


class SimpleLine:
    """A simple line through ``midpoint``.

    Parameters
    ----------
    midpoint : Tree
    pairs : sequence of (p, p_prime, w)
        Splits may be :class:`Split` objects or canonical masks. The pairs
        are stably sorted by breakpoint, so tied breakpoints keep the order
        given.
    validate : bool
        Run the full validity check (default True).
    """

    __slots__ = ("midpoint", "pairs", "_lambda0", "_topologies", "_internal0")

    def __init__(self, midpoint: Tree, pairs: Sequence = (), validate: bool = True):
        self.midpoint = midpoint
        self._lambda0 = midpoint._lengths
        built = []
        for item in pairs:
            if isinstance(item, SplitPair):
                p, q, w = item.p, item.p_prime, item.w
            else:
                p, q, w = item
            p, q, w = _mask(p), _mask(q), float(w)
            if w == 0.0 or not math.isfinite(w):
                raise InvalidLine("pair weights must be finite and nonzero")
            built.append(SplitPair(p, q, w, -self._lambda0.get(p, 0.0) / w))
        built.sort(key=lambda sp: sp.s_break)
        self.pairs: tuple[SplitPair, ...] = tuple(built)
        self._topologies = None
        full = midpoint.taxa.full
        self._internal0 = frozenset(k for k in self._lambda0 if not is_terminal_mask(k, full))
        if validate:
            self.validate()

    @classmethod
    def _ordered(cls, midpoint: Tree, pairs: Sequence[SplitPair]) -> "SimpleLine":
        obj = cls.__new__(cls)
        obj.midpoint = midpoint
        obj._lambda0 = midpoint._lengths
        obj.pairs = tuple(pairs)
        obj._topologies = None
        full = midpoint.taxa.full
        obj._internal0 = frozenset(k for k in obj._lambda0 if not is_terminal_mask(k, full))
        return obj

    # -- basic properties -----------------------------------------------

    @property
    def k(self) -> int:
        return len(self.pairs)

    @property
    def taxa(self):
        return self.midpoint.taxa

    @property
    def weights(self) -> list[float]:
        return [sp.w for sp in self.pairs]

    @property
    def breakpoints(self) -> list[float]:
        return [sp.s_break for sp in self.pairs]

    @property
    def speed(self) -> float:
        return math.sqrt(math.fsum([sp.w * sp.w for sp in self.pairs]))

    def key(self) -> tuple:
        return tuple((sp.p, sp.p_prime, sp.w) for sp in self.pairs)

    def used_splits(self) -> set[int]:
        out = set()
        for sp in self.pairs:
            out.add(sp.p)
            out.add(sp.p_prime)
        return out

    def lambda0(self, split) -> float:
        return self._lambda0.get(_mask(split), 0.0)

    def interval(self, i: int) -> tuple[float, float]:
        """``(s_i, s_{i+1})`` with infinite outer ends."""
        lo = self.pairs[i - 1].s_break if i > 0 else -math.inf
        hi = self.pairs[i].s_break if i < self.k else math.inf
        return lo, hi

    @property
    def topologies(self) -> list[frozenset[int]]:
        """Internal topology on each of the ``k + 1`` intervals."""
        if self._topologies is None:
            moving = {sp.p for sp in self.pairs}
            base = set(self._internal0 - moving)
            tops = []
            for i in range(self.k + 1):
                t = set(base)
                for j, sp in enumerate(self.pairs):
                    t.add(sp.after() if j < i else sp.before())
                tops.append(frozenset(t))
            self._topologies = tops
        return self._topologies

    # -- evaluation -------------------------------------------------------

    def lengths_at(self, s: float) -> dict[int, float]:
        out = dict(self._lambda0)
        for sp in self.pairs:
            v = self._lambda0.get(sp.p, 0.0) + s * sp.w
            if v > 0.0:
                out[sp.p] = v
            else:
                out.pop(sp.p, None)
                if v < 0.0:
                    out[sp.p_prime] = -v
        return out

    def evaluate(self, s: float) -> Tree:
        """The tree at parameter *s*; ``evaluate(0)`` is the midpoint."""
        if s == 0.0:
            return self.midpoint
        return Tree._trusted(self.midpoint.taxa, self.lengths_at(float(s)))

    def __call__(self, s: float) -> Tree:
        return self.evaluate(s)

    def _segment(self, i: int):
        """Affine pieces ``(mask, c, v)`` of the moving splits on interval i."""
        out = []
        for j, sp in enumerate(self.pairs):
            l0 = self._lambda0.get(sp.p, 0.0)
            present = sp.after() if j < i else sp.before()
            if present == sp.p:
                out.append((sp.p, l0, sp.w))
            else:
                out.append((sp.p_prime, -l0, -sp.w))
        return out

    # -- validity -----------------------------------------------------------

    def validate(self) -> None:
        """Raise :class:`InvalidLine` unless every simple-line condition holds."""
        full = self.taxa.full
        seen = set()
        for sp in self.pairs:
            for s in (sp.p, sp.p_prime):
                if s & 1 or s <= 0 or s >= full or is_terminal_mask(s, full):
                    raise InvalidLine("pairs must use internal splits")
                if s in seen:
                    raise InvalidLine("a split appears in more than one pair")
                seen.add(s)
            if sp.p_prime in self._lambda0:
                raise InvalidLine("replacement split already in the midpoint")
            if masks_compatible(sp.p, sp.p_prime):
                raise InvalidLine("a pair's splits must be incompatible")
            if sp.p not in self._lambda0 and not all(
                masks_compatible(sp.p, q) for q in self._internal0
            ):
                raise InvalidLine("split is incompatible with the midpoint")
        for a, b in zip(self.pairs, self.pairs[1:]):
            if a.s_break > b.s_break:
                raise InvalidLine("breakpoints out of order")
        tops = self.topologies
        for t in tops:
            if not all_compatible(sorted(t)):
                raise InvalidLine("incompatible splits on one interval")
        for j, sp in enumerate(self.pairs):
            face = tops[j] - {sp.before()}
            try:
                options = xnni_masks(face | {sp.p}, sp.p, full)
            except TreeError as exc:
                raise InvalidLine(str(exc)) from None
            if sp.p_prime not in options:
                raise InvalidLine("pair is not an XNNI move at its breakpoint")

    def is_valid(self) -> bool:
        try:
            self.validate()
        except InvalidLine:
            return False
        return True

    # -- extension --------------------------------------------------------------

    def xnni_on_interval(self, p, p_prime, i: int) -> bool:
        """Whether ``p -> p'`` is an XNNI move in the topology on interval i."""
        p, q = _mask(p), _mask(p_prime)
        t = self.topologies[i]
        if not all(masks_compatible(p, r) for r in t):
            return False
        return q in xnni_masks(t | {p}, p, self.taxa.full)

    def extend(self, p, p_prime, w: float, i: int, validate: bool = True) -> "SimpleLine":
        """Insert a pair so that its swap happens on interval *i*."""
        p, q, w = _mask(p), _mask(p_prime), float(w)
        if w == 0.0:
            raise InvalidLine("weight must be nonzero")
        s = -self._lambda0.get(p, 0.0) / w
        lo, hi = self.interval(i)
        tol = BREAK_RTOL * max(1.0, abs(s))
        if not lo - tol <= s <= hi + tol:
            raise InvalidLine(f"breakpoint {s} not inside interval {i} = [{lo}, {hi}]")
        s = min(max(s, lo), hi)
        pairs = list(self.pairs)
        pairs.insert(i, SplitPair(p, q, w, s))
        line = SimpleLine._ordered(self.midpoint, pairs)
        if validate:
            line.validate()
        return line

    def without(self, index: int) -> "SimpleLine":
        pairs = list(self.pairs)
        del pairs[index]
        return SimpleLine._ordered(self.midpoint, pairs)

    def rescaled(self, scales) -> "SimpleLine":
        """Back-transform a line fitted to normalized data.

        Midpoint lengths are multiplied by their split factors and each
        weight by the factor of its ``p`` split; breakpoints are recomputed
        and the pairs re-sorted and re-validated.
        """
        mid = self.midpoint.scaled(scales.factors)
        pairs = []
        for sp in self.pairs:
            f = scales.factors.get(sp.p, 1.0)
            pairs.append((sp.p, sp.p_prime, sp.w * f))
        return SimpleLine(mid, pairs, validate=True)

    def describe(self) -> list[str]:
        fmt = self.taxa.format_split
        return [f"{fmt(sp.p)} -> {fmt(sp.p_prime)}" for sp in self.pairs]

    def __repr__(self) -> str:
        body = ", ".join(f"{d} (w={sp.w:.4g})" for d, sp in zip(self.describe(), self.pairs))
        return f"SimpleLine([{body}])"


def validate_extension(line: SimpleLine, p, p_prime, i: int, w_sign: int) -> WeightRange | None:
    """Weights of sign *w_sign* that extend *line* with ``p -> p'`` on interval i.

    Raises :class:`InvalidExtension` when ``p`` is incompatible with the
    midpoint or ``p'`` is not an XNNI replacement of ``p`` on interval i.
    Returns None when the topological or geometrical constraints leave no
    feasible weight.
    """
    p, q = _mask(p), _mask(p_prime)
    if w_sign not in (-1, 1):
        raise ValueError("w_sign must be +1 or -1")
    if not 0 <= i <= line.k:
        raise ValueError(f"interval index {i} out of range")
    if p not in line._lambda0 and not all(masks_compatible(p, r) for r in line._internal0):
        raise InvalidExtension("split is not compatible with the midpoint")
    used = line.used_splits()
    if p in used or q in used or q in line._lambda0:
        return None
    if not line.xnni_on_interval(p, q, i):
        raise InvalidExtension("not an XNNI replacement on this interval")

    tops = line.topologies
    # w < 0: p lives on intervals 0..i and p' on i..k; mirrored for w > 0
    if w_sign < 0:
        p_side, q_side = range(0, i + 1), range(i, line.k + 1)
    else:
        p_side, q_side = range(i, line.k + 1), range(0, i + 1)
    if not all(masks_compatible(p, r) for j in p_side for r in tops[j]):
        return None
    if not all(masks_compatible(q, r) for j in q_side for r in tops[j] if r != p):
        return None

    l0 = line._lambda0.get(p, 0.0)
    lo, hi = line.interval(i)
    if l0 == 0.0:
        if not lo <= 0.0 <= hi:
            return None
        rng = WeightRange(-math.inf, -0.0) if w_sign < 0 else WeightRange(0.0, math.inf)
    elif w_sign < 0:
        # breakpoint l0/|w| > 0 must lie in [lo, hi]
        if hi <= 0.0:
            return None
        w_lo = -math.inf if lo <= 0.0 else -l0 / lo
        w_hi = -0.0 if math.isinf(hi) else -l0 / hi
        rng = WeightRange(w_lo, w_hi)
    else:
        # breakpoint -l0/w < 0 must lie in [lo, hi]
        if lo >= 0.0:
            return None
        w_lo = 0.0 if math.isinf(lo) else l0 / -lo
        w_hi = math.inf if hi >= 0.0 else l0 / -hi
        rng = WeightRange(w_lo, w_hi)
    if rng.lo > rng.hi:
        return None
    rep = _representative(rng)
    try:
        line.extend(p, q, rep, i)
    except InvalidLine:
        return None
    return rng


def _representative(rng: WeightRange) -> float:
    lo, hi = rng.lo, rng.hi
    if math.isinf(lo) and math.isinf(hi):
        return 1.0
    if math.isinf(lo):
        return hi - abs(hi) - 1.0
    if math.isinf(hi):
        return lo + abs(lo) + 1.0
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Projection
# ---------------------------------------------------------------------------


def euclidean_guess(lx: dict, line: SimpleLine, s_max: float) -> float:
    """Closest point of the embedded line image to ``lx`` within ``|s| <= s_max``."""
    best_s, best_r = 0.0, math.inf
    for i in range(line.k + 1):
        lo, hi = line.interval(i)
        lo, hi = max(lo, -s_max), min(hi, s_max)
        if lo > hi:
            continue
        seg = line._segment(i)
        num = math.fsum([v * (lx.get(k, 0.0) - c) for k, c, v in seg])
        den = math.fsum([v * v for _, _, v in seg])
        s = min(max(num / den, lo), hi)
        ly = line.lengths_at(s)
        r = math.fsum([(v - ly.get(k, 0.0)) ** 2 for k, v in lx.items()])
        r += math.fsum([v * v for k, v in ly.items() if k not in lx])
        if r < best_r:
            best_s, best_r = s, r
    return best_s


def project(x: Tree, line: SimpleLine, tol: float = 1e-8) -> Projection:
    """Closest point on *line* to *x*.

    The Euclidean closest point of the embedded line gives a first guess
    ``s0``; the true minimiser lies within arc length ``2 * d(x, y(s0))`` of
    it and within ``d(x0, x)`` of the midpoint, and golden-section search
    narrows that bracket to ``tol * max(|s0|, d(x0, x) / speed)``.
    """
    check_same_taxa(x, line.midpoint)
    lx = x._lengths
    l0 = line.midpoint._lengths
    r = distance_masks(l0, lx)
    if line.k == 0 or r == 0.0:
        return Projection(0.0, line.midpoint, r, 0.0)
    speed = line.speed
    s_max = r / speed
    s0 = euclidean_guess(lx, line, s_max)
    delta0 = distance_masks(lx, line.lengths_at(s0))
    half = 2.0 * delta0 / speed
    a, b = max(s0 - half, -s_max), min(s0 + half, s_max)

    def f(s):
        return distance_masks(lx, line.lengths_at(s))

    scale = max(abs(s0), s_max)
    s_star, d_perp = golden_section(f, a, b, tol * scale)
    if delta0 <= d_perp:
        s_star, d_perp = s0, delta0
    # f**2 is quadratic where the geodesics to x stay in one flat, so a wide
    # three-point parabola pins the minimum far below the bracket width
    h = 1e-4 * scale
    if a <= s_star - h and s_star + h <= b:
        gm, g0, gp = f(s_star - h) ** 2, d_perp ** 2, f(s_star + h) ** 2
        curv = gm - 2.0 * g0 + gp
        if curv > 0.0:
            step = 0.5 * h * (gm - gp) / curv
            if abs(step) <= h:
                s_new = s_star + step
                f_new = f(s_new)
                if f_new <= d_perp:
                    s_star, d_perp = s_new, f_new
    # minima often sit exactly on a breakpoint, where f has a kink
    for sb in line.breakpoints:
        if a <= sb <= b and abs(sb - s_star) <= 2.0 * tol * scale:
            fb = f(sb)
            if fb <= d_perp:
                s_star, d_perp = sb, fb
    y = line.evaluate(s_star)
    return Projection(s_star, y, d_perp, distance_masks(l0, y._lengths))


def project_all(data: Sequence[Tree], line: SimpleLine, tol: float = 1e-8) -> list[Projection]:
    return [project(x, line, tol) for x in data]


def sums_of_squares(line: SimpleLine, data: Sequence[Tree], tol: float = 1e-8) -> tuple[float, float]:
    """``(d2_par, d2_perp)``: squared distances along and off the line."""
    proj = project_all(data, line, tol)
    return (
        math.fsum([pr.d_par ** 2 for pr in proj]),
        math.fsum([pr.d_perp ** 2 for pr in proj]),
    )


# ---------------------------------------------------------------------------
# Random lines (tests and demos)
# ---------------------------------------------------------------------------


def random_simple_line(midpoint: Tree, rng, max_pairs: int = 3, attempts: int = 200) -> SimpleLine:
    """Grow a random valid simple line by repeated random extensions."""
    taxa = midpoint.taxa
    full = taxa.full
    line = SimpleLine(midpoint)
    for _ in range(attempts):
        if line.k >= max_pairs:
            break
        used = line.used_splits()
        if rng.random() < 0.5 and line._internal0 - used:
            p = int(rng.choice(sorted(line._internal0 - used)))
        else:
            p = int(rng.integers(1, 1 << (taxa.m - 1))) << 1
            if is_terminal_mask(p, full) or p in used:
                continue
            if not all(masks_compatible(p, r) for r in line._internal0):
                continue
        i = int(rng.integers(0, line.k + 1))
        t = line.topologies[i]
        if not all(masks_compatible(p, r) for r in t):
            continue
        options = [q for q in xnni_masks(t | {p}, p, full) if q not in used]
        if not options:
            continue
        q = options[int(rng.integers(len(options)))]
        sign = 1 if rng.random() < 0.5 else -1
        try:
            wr = validate_extension(line, p, q, i, sign)
        except InvalidExtension:
            continue
        if wr is None:
            continue
        lo, hi = max(wr.lo, -3.0), min(wr.hi, 3.0)
        if sign > 0:
            lo = max(lo, 0.05)
        else:
            hi = min(hi, -0.05)
        if lo > hi:
            continue
        w = float(rng.uniform(lo, hi))
        try:
            line = line.extend(p, q, w, i)
        except InvalidLine:
            continue
    return line
