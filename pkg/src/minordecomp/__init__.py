"""Deterministic CONGEST simulation and cluster decompositions for
minor-free networks: structural measures, expander splits, heavy-stars
merging, token/walk information gathering, overlapping expander
decompositions, the diameter/routing decomposition pipeline, and its
approximation and property-testing consumers."""

from .graph import Graph, read_edge_list, write_edge_list, parse_fraction
from .measures import (volume, boundary_size, conductance_of_set, conductance_exact,
                       sparsity_of_set, sparsity_exact, diameter_of_induced,
                       conductance_sweep_lower_bound, CapacityError, INFINITE)
from .split import expander_split, regularize_even, SplitMap
from .arboricity import arboricity_exact
from .ldd import ldd_sequential, cut_edges_of_partition
from . import generators
from .sim import (SimConfig, SimTranscript, ClusterRoundCost, StepResult,
                  NodeContext, SimError, run, run_charged, STRICT, ACCOUNTING,
                  WAKE_ON_MESSAGE)
from .stars import (WeightedClusterGraph, StarSet, heavy_stars, orient_step1,
                    cole_vishkin_3color, mark_step3, extract_stars,
                    cluster_graph_from_partition, HeavyStarsViolation,
                    heavy_stars_via_program)

__all__ = [name for name in dir() if not name.startswith("_")]
