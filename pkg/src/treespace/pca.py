"""
Searching for a principal simple line.

Two searches are provided. :func:`greedy_search` repeatedly adds the split
pair (with optimised weight) that most improves the objective.
:func:`anneal_search` runs a birth/death simulated-annealing chain over
simple lines and returns the best line visited.

Scores are always maximised internally: ``d2_par`` for the parallel
objective and ``-d2_perp`` for the perpendicular one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .consensus import ScaleMap, majority_consensus, normalize_lengths, normalize_tree
from .core import Tree, check_same_taxa, is_terminal_mask, masks_compatible
from .line import (
    InvalidExtension,
    InvalidLine,
    Projection,
    SimpleLine,
    WeightRange,
    golden_section,
    project,
    validate_extension,
)


class Objective(enum.Enum):
    PARALLEL = "par"
    PERPENDICULAR = "perp"


@dataclass(frozen=True)
class AnnealConfig:
    iterations: int = 5000
    tau0: float = 1.0
    decay: float = 0.999
    birth_floor: float = 0.2

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if not self.tau0 > 0:
            raise ValueError("tau0 must be positive")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must lie in (0, 1)")
        if not 0.0 < self.birth_floor < 1.0:
            raise ValueError("birth_floor must lie in (0, 1)")


@dataclass(frozen=True)
class PcaConfig:
    """Search settings.

    ``weight_cap`` bounds ``|w|`` (None picks a data-driven default), and the
    search floor is ``weight_cap * weight_floor``. ``weight_tol`` is the
    golden-section tolerance on ``log|w|``; ``golden_tol`` the relative
    tolerance of each projection.
    """

    objective: Objective = Objective.PARALLEL
    weight_cap: float | None = None
    weight_floor: float = 1e-6
    weight_tol: float = 1e-4
    golden_tol: float = 1e-8
    stop_rtol: float = 1e-10
    annealing: AnnealConfig = field(default_factory=AnnealConfig)
    seed: int = 0
    normalize: bool = False
    debug: bool = False

    def __post_init__(self):
        if isinstance(self.objective, str):
            object.__setattr__(self, "objective", Objective(self.objective))
        if isinstance(self.annealing, dict):
            object.__setattr__(self, "annealing", AnnealConfig(**self.annealing))
        for name in ("weight_floor", "weight_tol", "golden_tol", "stop_rtol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_cap is not None and not self.weight_cap > 0:
            raise ValueError("weight_cap must be positive")


@dataclass
class PcaResult:
    line: SimpleLine
    normalized_weights: list[float]
    projections: list[Projection]
    d2_par: float
    d2_perp: float
    d2_0: float
    proportion: float
    objective: Objective
    algorithm: str
    scale_map: ScaleMap | None = None
    trace: list[float] = field(default_factory=list)
    weight_cap: float = math.nan

    @property
    def original_line(self) -> SimpleLine:
        """The line on the original branch-length scale."""
        if self.scale_map is None:
            return self.line
        return self.line.rescaled(self.scale_map)


def feasible_splits(data: Sequence[Tree]) -> list[int]:
    """Sorted masks of every internal split found in at least one tree."""
    if not data:
        raise ValueError("no trees given")
    full = data[0].taxa.full
    out = set()
    for t in data:
        out.update(k for k in t._lengths if not is_terminal_mask(k, full))
    return sorted(out)


def default_weight_cap(data: Sequence[Tree], x0: Tree) -> float:
    full = x0.taxa.full
    longest = max(v for t in data for v in t._lengths.values())
    internal0 = [v for k, v in x0._lengths.items() if not is_terminal_mask(k, full)]
    if not internal0:
        internal0 = [
            v for t in data for k, v in t._lengths.items() if not is_terminal_mask(k, full)
        ] or [longest]
    return 10.0 * longest / min(internal0)


class _Evaluator:
    """Scores lines on a fixed data set, memoised on the line's pairs."""

    def __init__(self, data, x0, config: PcaConfig):
        self.data = list(data)
        self.x0 = x0
        self.config = config
        self.tol = config.golden_tol
        self.cache: dict = {}
        empty = self.stats(SimpleLine(x0))
        self.d2_0 = empty[1]

    def stats(self, line: SimpleLine):
        key = line.key()
        hit = self.cache.get(key)
        if hit is None:
            proj = [project(x, line, self.tol) for x in self.data]
            d2_par = math.fsum([p.d_par ** 2 for p in proj])
            d2_perp = math.fsum([p.d_perp ** 2 for p in proj])
            hit = (d2_par, d2_perp, proj)
            self.cache[key] = hit
        return hit

    def score(self, line: SimpleLine) -> float:
        d2_par, d2_perp, _ = self.stats(line)
        if self.config.objective is Objective.PARALLEL:
            return d2_par
        return -d2_perp


def optimize_weight(
    line: SimpleLine,
    p,
    p_prime,
    interval: int,
    w_range: WeightRange,
    evaluator: _Evaluator,
    weight_cap: float,
) -> tuple[float, float]:
    """Best weight for ``p -> p'`` on *interval*, other weights held fixed.

    Golden-section search runs over ``log|w|`` inside the feasible range
    clipped to ``|w| <= weight_cap``; both range ends are also tried. A line
    with a single pair is the same point set for every weight of one sign,
    so the first pair just takes the geometric middle of its range.
    """
    cfg = evaluator.config
    rng = w_range.clipped(weight_cap, weight_cap * cfg.weight_floor)
    if rng is None:
        raise ValueError("weight range is empty after clipping")
    sign = -1.0 if rng.hi <= 0 else 1.0
    a, b = math.log(abs(rng.lo)), math.log(abs(rng.hi))
    if a > b:
        a, b = b, a

    def score_at(u: float) -> float:
        return evaluator.score(line.extend(p, p_prime, sign * math.exp(u), interval, validate=False))

    if line.k == 0:
        u = 0.5 * (a + b)
        return sign * math.exp(u), score_at(u)
    u, best = golden_section(score_at, a, b, cfg.weight_tol, maximize=True)
    for end in (a, b):
        val = score_at(end)
        if val > best:
            u, best = end, val
    return sign * math.exp(u), best


def _prepare(data: Sequence[Tree], x0: Tree | None, config: PcaConfig):
    if not data:
        raise ValueError("no trees given")
    taxa = check_same_taxa(*data)
    if x0 is not None and x0.taxa != taxa:
        raise ValueError("midpoint is over a different taxon set")
    scales = None
    if config.normalize:
        data, scales = normalize_lengths(data)
        x0 = majority_consensus(data) if x0 is None else normalize_tree(x0, scales)
    elif x0 is None:
        x0 = majority_consensus(data)
    return list(data), x0, scales


def _candidates(line: SimpleLine, pool: Sequence[int]):
    """Yield ``(p, p', interval, sign, w_range)`` in canonical order."""
    used = line.used_splits()
    free = [s for s in pool if s not in used]
    internal0 = line._internal0
    for p in free:
        if p not in internal0 and not all(masks_compatible(p, r) for r in internal0):
            continue
        for q in free:
            if q == p or masks_compatible(p, q) or q in line._lambda0:
                continue
            for i in range(line.k + 1):
                if not line.xnni_on_interval(p, q, i):
                    continue
                for sign in (-1, 1):
                    try:
                        rng = validate_extension(line, p, q, i, sign)
                    except InvalidExtension:
                        continue
                    if rng is not None:
                        yield p, q, i, sign, rng


def _result(line, ev: _Evaluator, algorithm: str, scales, trace, cap) -> PcaResult:
    d2_par, d2_perp, proj = ev.stats(line)
    norm = line.speed
    weights = [sp.w / norm for sp in line.pairs] if line.k else []
    proportion = d2_par / ev.d2_0 if ev.d2_0 > 0 else math.nan
    return PcaResult(
        line=line,
        normalized_weights=weights,
        projections=list(proj),
        d2_par=d2_par,
        d2_perp=d2_perp,
        d2_0=ev.d2_0,
        proportion=proportion,
        objective=ev.config.objective,
        algorithm=algorithm,
        scale_map=scales,
        trace=list(trace),
        weight_cap=cap,
    )


def greedy_search(data: Sequence[Tree], x0: Tree | None = None, config: PcaConfig | None = None) -> PcaResult:
    """Grow the line one best split pair at a time.

    Each round tries every feasible ``p`` compatible with the midpoint, every
    feasible replacement ``p'``, every interval and both weight signs, and
    commits the best. Weights already on the line stay frozen. Stops when no
    candidate improves the score by more than ``stop_rtol * d2_0`` or the
    line holds ``m - 3`` pairs.
    """
    config = config or PcaConfig()
    data, x0, scales = _prepare(data, x0, config)
    ev = _Evaluator(data, x0, config)
    cap = config.weight_cap or default_weight_cap(data, x0)
    pool = feasible_splits(data)
    line = SimpleLine(x0)
    current = ev.score(line)
    trace = [current]
    for _ in range(x0.taxa.m - 3):
        best = None
        for p, q, i, sign, rng in _candidates(line, pool):
            try:
                w, score = optimize_weight(line, p, q, i, rng, ev, cap)
            except ValueError:
                continue
            if best is None or score > best[0]:
                best = (score, p, q, i, w)
        if best is None or best[0] - current <= config.stop_rtol * ev.d2_0:
            break
        score, p, q, i, w = best
        line = line.extend(p, q, w, i)
        current = score
        trace.append(current)
    return _result(line, ev, "greedy", scales, trace, cap)


def anneal_search(data: Sequence[Tree], x0: Tree | None = None, config: PcaConfig | None = None) -> PcaResult:
    """Birth/death simulated annealing over simple lines.

    Births pick ``p`` uniformly from the unused feasible splits and ``p'``
    uniformly from its valid replacements, then take the best interval,
    sign and weight. Deaths drop the pair at a random end of the line.
    Worse proposals are accepted with probability ``(1 - delta/D)**(1/tau)``.
    """
    config = config or PcaConfig()
    ac = config.annealing
    data, x0, scales = _prepare(data, x0, config)
    ev = _Evaluator(data, x0, config)
    cap = config.weight_cap or default_weight_cap(data, x0)
    pool = feasible_splits(data)
    kmax = x0.taxa.m - 3
    rng = np.random.default_rng(config.seed)
    parallel = config.objective is Objective.PARALLEL

    state = SimpleLine(x0)
    current = ev.score(state)
    best_line, best_score = state, current
    trace = [current]
    births: dict = {}
    tau = ac.tau0

    def birth(line: SimpleLine):
        used = line.used_splits()
        free = [s for s in pool if s not in used]
        if not free:
            return None
        p = free[int(rng.integers(len(free)))]
        key = (line.key(), p)
        if key not in births:
            options: dict[int, list] = {}
            for cp, q, i, sign, wr in _candidates(line, [p] + [s for s in free if s != p]):
                if cp == p:
                    options.setdefault(q, []).append((i, sign, wr))
            births[key] = options
        options = births[key]
        if not options:
            return None
        q = sorted(options)[int(rng.integers(len(options)))]
        memo = (line.key(), p, q)
        if memo not in births:
            found = None
            for i, sign, wr in options[q]:
                try:
                    w, score = optimize_weight(line, p, q, i, wr, ev, cap)
                except ValueError:
                    continue
                if found is None or score > found[0]:
                    found = (score, w, i)
            births[memo] = found
        found = births[memo]
        if found is None:
            return None
        return line.extend(p, q, found[1], found[2])

    def death(line: SimpleLine):
        index = 0 if rng.random() < 0.5 else line.k - 1
        out = line.without(index)
        return out if out.is_valid() else None

    for _ in range(ac.iterations):
        k = state.k
        if k == 0:
            p_birth = 1.0
        elif k >= kmax:
            p_birth = 0.0
        else:
            p_birth = max(ac.birth_floor, 1.0 - k / kmax)
        proposal = birth(state) if rng.random() < p_birth else death(state)
        if proposal is not None:
            new = ev.score(proposal)
            if new > current:
                accept = True
            else:
                delta = abs(new - current)
                bound = max(current, 1e-6 * ev.d2_0) if parallel else ev.d2_0
                if bound <= 0.0:
                    prob = 1.0 if delta == 0.0 else 0.0
                else:
                    prob = max(0.0, 1.0 - delta / bound) ** (1.0 / tau)
                accept = rng.random() < prob
            if accept:
                state, current = proposal, new
                if config.debug:
                    state.validate()
                if current > best_score:
                    best_line, best_score = state, current
        trace.append(current)
        tau *= ac.decay
    return _result(best_line, ev, "anneal", scales, trace, cap)


def principal_path(
    data: Sequence[Tree],
    x0: Tree | None = None,
    config: PcaConfig | None = None,
    algorithm: str = "greedy",
) -> PcaResult:
    if algorithm == "greedy":
        return greedy_search(data, x0, config)
    if algorithm == "anneal":
        return anneal_search(data, x0, config)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def proportion_of_variance(result: PcaResult) -> float:
    """``d2_par / d2_0``."""
    if not result.d2_0 > 0:
        raise ValueError("all trees coincide with the midpoint (d2_0 = 0)")
    return result.d2_par / result.d2_0
