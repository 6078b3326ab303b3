"""Simple lines through tree space and projection onto them.

A simple line starts at a midpoint tree and, at each breakpoint, swaps
one internal split for a neighbour.  Projecting a tree onto the line
finds the closest point on it; the squared distances split into a part
along the line and a part orthogonal to it.
"""

import numpy as np

from treespace import SimpleLine, TaxonSet, distance, parse_newick, project

taxa = TaxonSet("ABCDEF")
mid = parse_newick("((((A:1,B:1):1,C:1):1,D:1):2,E:1,F:1);", taxa)
ab, ac = taxa.parse_split("A,B").mask, taxa.parse_split("A,C").mask
ef, df = taxa.parse_split("E,F").mask, taxa.parse_split("D,F").mask

line = SimpleLine(mid, [(ab, ac, -0.25), (ef, df, -0.5)])
print("pairs       ", line.describe())
print("breakpoints ", line.breakpoints)
print("speed       ", round(line.speed, 6))
for s in (-2.0, 0.0, 4.0, 6.0):
    print(f"line({s:+.0f})    ", line(s))

# a tree near the line at s = 5, nudged off it
x = line(5.0).scaled({taxa.parse_split("A,B,C").mask: 1.3})
proj = project(x, line)
print("s*          ", round(proj.s_star, 6))
print("d_perp      ", round(proj.d_perp, 6), " d_par", round(proj.d_par, 6))
print("check       ", round(proj.d_perp ** 2 + proj.d_par ** 2, 6), "<=", round(distance(mid, x) ** 2, 6))

# distance to the line is smallest at s*
grid = np.linspace(proj.s_star - 2, proj.s_star + 2, 9)
print(np.round([distance(x, line(s)) for s in grid], 4))
