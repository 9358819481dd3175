"""Spiking networks with graph-limit interactions: simulation and checks.

Microscopic side: exact event-driven simulation of nonlinear Hawkes networks
on sampled random graphs.  Macroscopic side: fixed points, stability reports
and neural-field integration for the corresponding graph-limit dynamics.
"""
from .fields import GridField, GridTrajectory, midpoint_nodes
from .graph import (DegreeReport, InteractionGraph, SMaxReport, complete_graph,
                    degree_concentration, dilution_report, dump_edges,
                    load_edges, positions, regularity_sums, s_max_statistic,
                    sample_graph)
from .kernels import (BlockGraphon, ConstantGraphon, ConstantRate,
                      ExpDistanceGraphon, ExponentialMemory, KernelError,
                      LinearRate, PNearestGraphon, ProductGraphon, Profile,
                      RelaxationDrive, SigmoidRate, TabulatedMemory,
                      constant_drive, graphon_sup)
from .macro import (BlowUpError, FixedPointResult, fixed_point,
                    solve_lambda_volterra, solve_nfe_exponential,
                    time_to_neighborhood)
from .micro import (DominationError, HistoryCapacityError, ObserverPlan,
                    TrajectoryRecord, first_event, martingale_diagnostic,
                    profile_distance, simulate_exponential, simulate_general_h,
                    stream)
from .operator import (GridOperator, IterationError, StabilityReport,
                       apply_TW, build_operator, linearized_semigroup_decay,
                       power_iteration, spectral_radius, stability_report)

__version__ = "0.1.0"

__all__ = [
    "BlockGraphon", "BlowUpError", "ConstantGraphon", "ConstantRate",
    "DegreeReport", "DominationError", "ExpDistanceGraphon",
    "ExponentialMemory", "FixedPointResult", "GridField", "GridOperator",
    "GridTrajectory", "HistoryCapacityError", "InteractionGraph",
    "IterationError", "KernelError", "LinearRate", "ObserverPlan",
    "PNearestGraphon", "ProductGraphon", "Profile", "RelaxationDrive",
    "SMaxReport", "SigmoidRate", "StabilityReport", "TabulatedMemory",
    "TrajectoryRecord", "apply_TW", "build_operator", "complete_graph",
    "constant_drive", "degree_concentration", "dilution_report", "dump_edges",
    "first_event", "fixed_point", "graphon_sup", "linearized_semigroup_decay",
    "load_edges", "martingale_diagnostic", "midpoint_nodes", "positions",
    "power_iteration", "profile_distance", "regularity_sums",
    "s_max_statistic", "sample_graph", "simulate_exponential",
    "simulate_general_h",
    "solve_lambda_volterra", "solve_nfe_exponential", "spectral_radius",
    "stability_report", "stream", "time_to_neighborhood",
]
