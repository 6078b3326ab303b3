"""
Two-topology mixture generators and random trees.

Trees are drawn around a base tree in which one (or two) internal splits
flip to an NNI alternative. Extra noise comes from multiplying every branch
by an independent log-normal factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import multivariate_normal, norm

from .core import Split, TaxonSet, Tree, masks_compatible, xnni_masks


@dataclass(frozen=True)
class MixtureSpec:
    """Parameters for :func:`simulate_mixture` and :func:`simulate_correlated`.

    ``pair`` and ``second_pair`` are ``(t1_split, t2_split)``; the first
    split must be in the base tree, the second an XNNI replacement of it.
    """

    base: Tree
    pair: tuple
    theta: float
    jitter_sigma: float = 0.0
    n: int = 100
    seed: int = 0
    second_pair: tuple | None = None
    rho: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be non-negative")
        if self.n < 0:
            raise ValueError("n must be non-negative")
        self._check_pair(self.pair)
        if (self.second_pair is None) != (self.rho is None):
            raise ValueError("second_pair and rho must be given together")
        if self.second_pair is not None:
            if not -1.0 <= self.rho <= 1.0:
                raise ValueError("rho must lie in [-1, 1]")
            self._check_pair(self.second_pair)
            a1, a2 = (_mask(s) for s in self.pair)
            b1, b2 = (_mask(s) for s in self.second_pair)
            if len({a1, a2, b1, b2}) < 4 or not all(
                masks_compatible(a, b) for a in (a1, a2) for b in (b1, b2)
            ):
                raise ValueError("the two pairs must act on disjoint parts of the tree")

    def _check_pair(self, pair):
        t1, t2 = (_mask(s) for s in pair)
        lengths = self.base._lengths
        if t1 not in lengths:
            raise ValueError("t1 split is not in the base tree")
        if t2 not in xnni_masks(self.base.internal_masks(), t1, self.base.taxa.full):
            raise ValueError("t2 split is not an NNI replacement of t1 in the base tree")


def _mask(split) -> int:
    return split.mask if isinstance(split, Split) else int(split)


def _jitter(lengths: dict, sigma: float, rng) -> dict:
    if sigma == 0.0:
        return lengths
    keys = sorted(lengths)
    factors = np.exp(rng.normal(0.0, sigma, len(keys)))
    return {k: lengths[k] * float(f) for k, f in zip(keys, factors)}


def _swap(lengths: dict, old: int, new: int) -> dict:
    out = dict(lengths)
    out[new] = out.pop(old)
    return out


def simulate_mixture(spec: MixtureSpec) -> list[Tree]:
    """Trees keeping ``t1`` with probability theta, else swapping to ``t2``."""
    trees, _ = simulate_mixture_with_truth(spec)
    return trees


def simulate_mixture_with_truth(spec: MixtureSpec) -> tuple[list[Tree], np.ndarray]:
    if spec.second_pair is not None:
        raise ValueError("use simulate_correlated for two pairs")
    rng = np.random.default_rng(spec.seed)
    t1, t2 = (_mask(s) for s in spec.pair)
    base = spec.base._lengths
    keep = rng.random(spec.n) < spec.theta
    trees = []
    for flag in keep:
        lengths = base if flag else _swap(base, t1, t2)
        trees.append(Tree._trusted(spec.base.taxa, _jitter(lengths, spec.jitter_sigma, rng)))
    return trees, keep.astype(int)


def bernoulli_correlation(theta: float, latent: float) -> float:
    """Correlation of two Bernoulli(theta) indicators from a Gaussian copula."""
    if theta in (0.0, 1.0):
        return 0.0
    c = norm.ppf(theta)
    if latent >= 1.0:
        both = theta
    elif latent <= -1.0:
        both = max(0.0, 2.0 * theta - 1.0)
    else:
        both = multivariate_normal(mean=[0.0, 0.0], cov=[[1.0, latent], [latent, 1.0]]).cdf([c, c])
    return (both - theta * theta) / (theta * (1.0 - theta))


def latent_correlation(theta: float, rho: float) -> float:
    """Latent normal correlation giving indicator correlation *rho*."""
    lo_rho = bernoulli_correlation(theta, -1.0)
    if rho < lo_rho - 1e-12 or rho > 1.0:
        raise ValueError(f"correlation {rho} infeasible for Bernoulli({theta}) margins")
    if rho >= 1.0:
        return 1.0
    if rho <= lo_rho:
        return -1.0
    return brentq(lambda r: bernoulli_correlation(theta, r) - rho, -1.0, 1.0, xtol=1e-12)


def correlated_indicators(n: int, theta: float, rho: float, rng) -> np.ndarray:
    """``(n, 2)`` array of correlated Bernoulli(theta) indicators."""
    r = latent_correlation(theta, rho)
    c = norm.ppf(theta) if 0.0 < theta < 1.0 else (np.inf if theta == 1.0 else -np.inf)
    z1 = rng.standard_normal(n)
    if r >= 1.0:
        z2 = z1
    elif r <= -1.0:
        z2 = -z1
    else:
        z2 = r * z1 + np.sqrt(1.0 - r * r) * rng.standard_normal(n)
    return np.column_stack([z1 < c, z2 < c]).astype(int)


def simulate_correlated(spec: MixtureSpec) -> list[Tree]:
    """Two flips whose indicators have correlation rho."""
    trees, _ = simulate_correlated_with_truth(spec)
    return trees


def simulate_correlated_with_truth(spec: MixtureSpec) -> tuple[list[Tree], np.ndarray]:
    if spec.second_pair is None:
        raise ValueError("simulate_correlated needs second_pair and rho")
    rng = np.random.default_rng(spec.seed)
    a1, a2 = (_mask(s) for s in spec.pair)
    b1, b2 = (_mask(s) for s in spec.second_pair)
    flags = correlated_indicators(spec.n, spec.theta, spec.rho, rng)
    base = spec.base._lengths
    trees = []
    for keep_a, keep_b in flags:
        lengths = base
        if not keep_a:
            lengths = _swap(lengths, a1, a2)
        if not keep_b:
            lengths = _swap(lengths, b1, b2)
        trees.append(Tree._trusted(spec.base.taxa, _jitter(lengths, spec.jitter_sigma, rng)))
    return trees, flags


def random_tree(taxa: TaxonSet, rng, collapse: float = 0.0, scale: float = 1.0) -> Tree:
    """Random binary tree by random cherry merging, exponential lengths.

    Each internal edge is dropped with probability *collapse*.
    """
    clusters = [1 << i for i in range(taxa.m)]
    lengths: dict[int, float] = {}
    full = taxa.full
    while len(clusters) > 3:
        i, j = sorted(rng.choice(len(clusters), 2, replace=False))
        merged = clusters[i] | clusters[j]
        del clusters[j], clusters[i]
        clusters.append(merged)
        key = full ^ merged if merged & 1 else merged
        if rng.random() >= collapse:
            lengths[key] = float(rng.exponential(scale)) + 1e-3 * scale
    for i in range(taxa.m):
        key = full ^ (1 << i) if i == 0 else 1 << i
        lengths[key] = float(rng.exponential(scale)) + 1e-3 * scale
    return Tree(taxa, lengths)
