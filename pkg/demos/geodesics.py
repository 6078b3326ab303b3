"""Geodesic distances between five-taxon trees.

Two trees that share no internal split can still be joined by a path
shorter than the one through the star tree.  This script builds such a
pair, compares the geodesic with the cone path and walks along the
geodesic to check that distances add up.
"""

import numpy as np

from treespace import TaxonSet, cone_path_distance, distance, distance_matrix, geodesic, parse_newick, point_along

taxa = TaxonSet("ABCDE")
x = parse_newick("((A:1,B:1):1,C:1,(D:1,E:1):3);", taxa)
y = parse_newick("((A:1,C:1):3,D:1,(B:1,E:1):1);", taxa)

g = geodesic(x, y)
print("geodesic length   ", round(g.length, 6))
print("cone path length  ", round(cone_path_distance(x, y), 6))
print("support blocks    ", len(g.support))

# walking along the path: consecutive pieces sum to the full length
pts = [point_along(g, t) for t in np.linspace(0.0, 1.0, 5)]
pieces = [distance(a, b) for a, b in zip(pts, pts[1:])]
print("sum of 4 pieces   ", round(sum(pieces), 6))
print("halfway tree      ", point_along(g, 0.5))

# a small distance matrix
trees = [x, y, point_along(g, 0.25), point_along(g, 0.75)]
print(np.round(distance_matrix(trees), 4))
