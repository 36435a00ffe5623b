"""Latency-aware, failure-resilient capacity planning for mobile edge clouds."""

from .demand import (
    Cluster,
    DemandProfile,
    HandoverGraph,
    Partition,
    aggregate_demand,
    build_handover_graph,
    inter_cluster_sar,
)
from .experiments import SweepConfig, initial_partition, run_sweep, solve
from .lp_core import LpProblem, LpSolution, solve_lp, verify_solution
from .multiway_cut import isolating_kcut, max_flow_min_cut, repair_partition
from .optimizer import exact_oracle, greedy_merge, pseudocost
from .provisioner import CostBreakdown, CostModel, MecInstance, ProvisionOptions, ProvisioningPlan, check_plan, provision
from .scenario import ScenarioParams, generate_scenario, grouped_scenario, preset, ring_scenario, validate_scenario
from .topology import TopologyGraph, build_topology, feasible_paths, load_topology, min_dc_cover, service_areas

__version__ = "0.1.0"
