"""Landmark-based embedding of networks and dissimilarity data into hyperbolic space."""
from .embed import (DEFAULT_GRID, EmbeddingError, EmbeddingResult, NonNegativeTrailingEigenvalue, lhydra,
                    optimize_curvature)
from .evaluation import ErrorReport, evaluate, sweep_dimensions
from .geometry import (PointConfiguration, hyperbolic_distance, lorentz_product, pairwise_distance_matrix,
                       project_to_hyperboloid, random_hyperbolic_points)
from .graph import (DistanceBlocks, Graph, LandmarkSet, bfs_distances, landmark_distance_blocks,
                    largest_connected_component, load_edge_list, sample_validation_pairs, select_landmarks)
from .kernels import BACKEND
from .stress import lhydra_plus, stress_gradient, stress_value

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DEFAULT_GRID", "DistanceBlocks", "EmbeddingError", "EmbeddingResult", "ErrorReport", "Graph",
    "LandmarkSet", "NonNegativeTrailingEigenvalue", "PointConfiguration", "bfs_distances", "evaluate",
    "hyperbolic_distance", "landmark_distance_blocks", "largest_connected_component", "lhydra", "lhydra_plus",
    "load_edge_list", "lorentz_product", "optimize_curvature", "pairwise_distance_matrix",
    "project_to_hyperboloid", "random_hyperbolic_points", "sample_validation_pairs", "select_landmarks",
    "stress_gradient", "stress_value", "sweep_dimensions",
]
