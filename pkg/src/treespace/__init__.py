"""Geodesic geometry and principal paths in the space of phylogenetic trees."""

from .consensus import ScaleMap, back_transform, back_transform_weights, majority_consensus, normalize_lengths
from .core import NewickError, Split, TaxonSet, Tree, TreeError, euclidean_distance, parse_newick, read_trees, write_newick
from .geodesic import GeodesicPath, cone_path_distance, distance, distance_matrix, geodesic, point_along
from .line import InvalidExtension, InvalidLine, Projection, SimpleLine, project, validate_extension
from .pca import (
    AnnealConfig,
    Objective,
    PcaConfig,
    PcaResult,
    anneal_search,
    feasible_splits,
    greedy_search,
    optimize_weight,
    principal_path,
    proportion_of_variance,
)
from .simulate import MixtureSpec, random_tree, simulate_correlated, simulate_mixture

__version__ = "0.1.0"

__all__ = [
    "AnnealConfig", "GeodesicPath", "InvalidExtension", "InvalidLine", "MixtureSpec", "NewickError",
    "Objective", "PcaConfig", "PcaResult", "Projection", "ScaleMap", "SimpleLine", "Split", "TaxonSet",
    "Tree", "TreeError", "anneal_search", "back_transform", "back_transform_weights", "cone_path_distance",
    "distance", "distance_matrix", "euclidean_distance", "feasible_splits", "geodesic", "greedy_search",
    "majority_consensus", "normalize_lengths", "optimize_weight", "parse_newick", "point_along",
    "principal_path", "project", "proportion_of_variance", "random_tree", "read_trees",
    "simulate_correlated", "simulate_mixture", "validate_extension", "write_newick",
]
