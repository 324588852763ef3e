"""Bernoulli bond percolation laboratory.

Finite lattice regions, counter-based sampling, crossing and connection
events, exact enumeration for small regions, Monte Carlo estimators,
transfer-matrix diagnostics and slab modification-map checks.
"""

__version__ = "0.1.0"

from .lattice import (LatticeError, LatticeSpec, Region, VertexSet, build_ball_region, build_box_region,
                      build_explicit_region, build_rectangle_region, build_slab_box_sets, column_projection,
                      induced_restriction, metric_sets)
from .percolation import (ClusterLabeling, Configuration, connected_in, crossing_cluster_count, label_clusters,
                          sample_block, sample_configuration)
from .events import (E1, E2, And, Circuit, Connect, CrossingCount, Cylinder, Event, Not, OneArm, Sure,
                     UniqueCrossing, event_cylinder, event_E1, event_E2, event_from_dict, event_unique_crossing,
                     origin_star, resolve_set)
from .circuits import CircuitData, CircuitGeometry, circuit_exists, minimal_open_circuit, validate_circuit
from .oracle import (EDGE_CAP, EventPolynomial, OracleCapError, exact, exact_event_polynomial, exact_probability,
                     oracle_mc_crosscheck, verify_bk_chain)
from .estimators import (ConditioningStarvation, Estimate, SeriesReport, cluster_census, default_pc,
                         estimate_conditional, estimate_event_probability, estimate_pc, iic_first_limit,
                         iic_second_limit, qm_ratio, qm_ratio_events, set_workers)
from .decoupling import (HopfReport, ScaleSchedule, ScaleSearchError, TransferMatrix, choose_scales,
                         cross_ratio_and_contraction, estimate_hopf_chain, estimate_transfer_matrix, explore_inner,
                         explore_outer, verify_factorization_exact)
from .slabqm import (ModificationError, SlabSetup, apply_modification, classify_case, qm_constant_report,
                     reconstruct_columns, verify_modification)
from .io import ResultRow, RunManifest, read_manifest, read_results, write_manifest, write_results
