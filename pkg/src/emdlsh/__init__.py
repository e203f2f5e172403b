"""Locality-sensitive hashing and approximate near-neighbor search for EMD
over small multisets of vectors, with exact oracles and statistical suites."""

from emdlsh.ann import AnnIndex, build_index, core_preprocess, core_query, query
from emdlsh.core import (
    Dataset,
    Matching,
    PointSet,
    chamfer,
    emd,
    emd_bruteforce,
    emd_exact,
    greedy_matching_cost,
    ground_distance,
)
from emdlsh.dind import DataIndHash, dind_eval, sample_dind_hash
from emdlsh.glued import GluedLsh, GluedParams, build_glued, derive_params, glued_eval
from emdlsh.quadtree import PathReport, QuadTree, sample_binomial, unary_encode
from emdlsh.reduction import (
    GridHash,
    ThresholdMap,
    grid_hash_eval,
    lp_to_l1,
    sample_grid_hash,
    sample_threshold_map,
    threshold_map_apply,
)
from emdlsh.sampletree import (
    L1Lsh,
    SampleTreeDraw,
    SparseVector,
    build_sampletree,
    embed_l1,
    l1_lsh_eval,
    nbr,
    sample_l1_lsh,
    sampletree_hash_eval,
)

__all__ = [
    "AnnIndex", "DataIndHash", "Dataset", "GluedLsh", "GluedParams",
    "GridHash", "L1Lsh", "Matching", "PathReport", "PointSet", "QuadTree",
    "SampleTreeDraw", "SparseVector", "ThresholdMap", "build_glued",
    "build_index", "build_sampletree", "chamfer", "core_preprocess",
    "core_query", "derive_params", "dind_eval", "emd", "emd_bruteforce",
    "emd_exact", "embed_l1", "glued_eval", "greedy_matching_cost",
    "grid_hash_eval", "ground_distance", "l1_lsh_eval", "lp_to_l1", "nbr",
    "query", "sample_binomial", "sample_dind_hash", "sample_grid_hash",
    "sample_l1_lsh", "sample_threshold_map", "sampletree_hash_eval",
    "threshold_map_apply", "unary_encode",
]

__version__ = "0.1.0"
