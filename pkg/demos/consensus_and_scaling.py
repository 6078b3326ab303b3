"""Majority-rule consensus and per-split length normalisation.

A simulated sample flips one internal edge in roughly half of the trees.
The consensus keeps splits seen in more than half the sample and averages
their lengths.  Normalisation divides every split by its mean length so
that short and long edges weigh equally in later analyses.
"""

from treespace import MixtureSpec, TaxonSet, back_transform, majority_consensus, normalize_lengths, parse_newick
from treespace import simulate_mixture

taxa = TaxonSet("ABCDEFGH")
base = parse_newick("(((A:0.1,B:0.1):0.1,C:0.1):0.12,D:0.1,(((E:0.1,F:0.1):0.1,G:0.1):0.08,H:0.1):0.1);", taxa)
flip = (taxa.parse_split("A,B,C").mask, taxa.parse_split("A,B,D").mask)

trees = simulate_mixture(MixtureSpec(base, flip, theta=0.7, jitter_sigma=0.05, n=200, seed=1))
cons = majority_consensus(trees)
print("consensus   ", cons)

scaled, scales = normalize_lengths(trees)
print("scaled #0   ", scaled[0])
print("scale factors (first rows):")
print("\n".join(scales.to_csv().splitlines()[:6]))

# scaling is exactly reversible
back = back_transform(scaled[0], scales)
print("round trip  ", max(abs(back._lengths[k] - trees[0]._lengths[k]) for k in trees[0]._lengths))
