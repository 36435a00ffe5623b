"""Primary/spare capacity provisioning for a fixed cluster-to-DC assignment.

With the assignment fixed, routing primary demand and reserving shared spare
DC and link capacity against any single DC failure is a linear program. The
primary-DC and SAR cost terms do not depend on the LP and are added after.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .demand import HandoverGraph, Partition
from .lp_core import EQ, GE, LE, LpProblem, solve_lp, solve_lp_highs
from .topology import Path, ServiceAreaMap, TopologyGraph, feasible_paths, link_key

FLOW_TOL = 1e-9
# above this many tableau entries "auto" hands the LP to HiGHS
DENSE_LIMIT = 400_000


class ProvisioningError(ValueError):
    pass


@dataclass(frozen=True)
class CostModel:
    """Unit costs. ``b_link`` is per Mbps per distance unit; ``distance_scale``
    converts topology km into that unit (1.0 keeps km)."""

    b_dc: float = 1.0
    b_link: float = 1.0
    b_sar: float = 0.0
    distance_scale: float = 1.0

    def __post_init__(self):
        if min(self.b_dc, self.b_link, self.b_sar, self.distance_scale) < 0:
            raise ValueError("costs must be non-negative")

    def link_cost(self, distance_km: float) -> float:
        return self.b_link * self.distance_scale * distance_km


@dataclass(frozen=True)
class ProvisionOptions:
    resilience: bool = True
    uncapacitated: bool = True
    max_paths: int = 4
    dc_capacity_mbps: Mapping[str, float] | None = None
    # "simplex" (built in), "highs" (SciPy) or "auto" by problem size
    lp_solver: str = "auto"


@dataclass(frozen=True)
class PathFlow:
    leaf: str
    path: tuple[str, ...]
    mbps: float


@dataclass(frozen=True)
class FailoverFlow:
    leaf: str
    failed_dc: str
    backup_dc: str
    path: tuple[str, ...]
    mbps: float


@dataclass
class CostBreakdown:
    primary_dc_cost: float
    spare_dc_cost: float
    primary_link_cost: float
    spare_link_cost: float
    sar_cost: float

    @property
    def total(self) -> float:
        return self.primary_dc_cost + self.spare_dc_cost + self.primary_link_cost + self.spare_link_cost + self.sar_cost

    @property
    def link_cost(self) -> float:
        return self.primary_link_cost + self.spare_link_cost

    @property
    def dc_cost(self) -> float:
        return self.primary_dc_cost + self.spare_dc_cost

    def as_dict(self) -> dict[str, float]:
        return {
            "primary_dc_cost": self.primary_dc_cost,
            "spare_dc_cost": self.spare_dc_cost,
            "primary_link_cost": self.primary_link_cost,
            "spare_link_cost": self.spare_link_cost,
            "sar_cost": self.sar_cost,
            "total": self.total,
        }


@dataclass
class ProvisioningPlan:
    assignment: dict[str, str]
    leaf_demand: dict[str, float]
    primary_dc: dict[str, float]
    spare_dc: dict[str, float]
    primary_flows: list[PathFlow]
    failover_flows: list[FailoverFlow]
    primary_link: dict[tuple[str, str], float]
    spare_link: dict[tuple[str, str], float]
    total_sar: float
    budget_rtt_ms: float
    resilience: bool = True

    @property
    def serving_dcs(self) -> list[str]:
        return sorted(v for v, c in self.primary_dc.items() if c > FLOW_TOL)

    @property
    def secondary_dcs(self) -> list[str]:
        return sorted(v for v, c in self.spare_dc.items() if c > FLOW_TOL)

    def secondaries_of(self, dc: str) -> list[str]:
        return sorted({f.backup_dc for f in self.failover_flows if f.failed_dc == dc and f.mbps > FLOW_TOL})

    def to_dict(self, costs: CostBreakdown | None = None) -> dict:
        clusters = defaultdict(list)
        for leaf, v in sorted(self.assignment.items()):
            clusters[v].append(leaf)
        links = sorted(set(self.primary_link) | set(self.spare_link))
        out = {
            "budget_rtt_ms": self.budget_rtt_ms,
            "resilience": self.resilience,
            "total_sar": self.total_sar,
            "dcs": {
                v: {"primary_mbps": self.primary_dc.get(v, 0.0), "spare_mbps": self.spare_dc.get(v, 0.0)}
                for v in sorted(set(self.primary_dc) | set(self.spare_dc))
            },
            "links": {
                f"{a}|{b}": {
                    "primary_mbps": self.primary_link.get((a, b), 0.0),
                    "spare_mbps": self.spare_link.get((a, b), 0.0),
                }
                for a, b in links
            },
            "clusters": [
                {
                    "serving_dc": v,
                    "leaves": leaves,
                    "demand_mbps": sum(self.leaf_demand.get(l, 0.0) for l in leaves),
                    "secondary_dcs": self.secondaries_of(v),
                }
                for v, leaves in sorted(clusters.items())
            ],
            "primary_flows": [
                {"leaf": f.leaf, "path": list(f.path), "mbps": f.mbps} for f in self.primary_flows
            ],
            "failover_flows": [
                {"leaf": f.leaf, "failed_dc": f.failed_dc, "backup_dc": f.backup_dc, "path": list(f.path), "mbps": f.mbps}
                for f in self.failover_flows
            ],
        }
        if costs is not None:
            out["costs"] = costs.as_dict()
        return out

    def to_json(self, costs: CostBreakdown | None = None) -> str:
        return json.dumps(self.to_dict(costs), indent=1, sort_keys=True) + "\n"


class MecInstance:
    """Everything about a scenario that stays fixed while assignments change.

    Holds per-leaf candidate DCs and a cache of leaf-to-DC paths, and
    precomputes the leaf-level handover matrix so SAR totals for an assignment
    are a quick masked sum.
    """

    def __init__(
        self,
        g: TopologyGraph,
        sam: ServiceAreaMap,
        leaf_demands: Mapping[str, float],
        handover: HandoverGraph | None = None,
        max_paths: int = 4,
    ):
        self.topology = g
        self.sam = sam
        self.leaf_demands = {l: float(leaf_demands.get(l, 0.0)) for l in g.leaf_dcs}
        self.handover = handover
        self.max_paths = max_paths
        self.leaves = list(g.leaf_dcs)
        self.candidates = {l: sorted(sam.dc_of.get(l, ())) for l in self.leaves}
        self._paths: dict[tuple[str, str], list[Path]] = {}
        self._leaf_idx = {l: k for k, l in enumerate(self.leaves)}
        self.leaf_ho = handover.leaf_matrix(self.leaves) if handover is not None else np.zeros((len(self.leaves),) * 2)
        self.lp_cache: dict[tuple, tuple] = {}

    @property
    def budget_rtt_ms(self) -> float:
        return self.sam.budget_rtt_ms

    def paths(self, leaf: str, dc: str) -> list[Path]:
        key = (leaf, dc)
        if key not in self._paths:
            budget = self.topology.leaf_budget_ms(leaf, self.sam.budget_rtt_ms)
            self._paths[key] = feasible_paths(self.topology, leaf, dc, budget, self.max_paths) if budget > 0 else []
        return self._paths[key]

    def sar_total(self, assignment: Mapping[str, str]) -> float:
        serving = np.array([assignment[l] for l in self.leaves])
        cross = serving[:, None] != serving[None, :]
        return float(self.leaf_ho[cross].sum())

    def sar_between(self, assignment: Mapping[str, str], v: str, u: str) -> float:
        serving = np.array([assignment[l] for l in self.leaves])
        a, b = serving == v, serving == u
        return float(self.leaf_ho[np.ix_(a, b)].sum() + self.leaf_ho[np.ix_(b, a)].sum())

    def demand_served(self, assignment: Mapping[str, str]) -> dict[str, float]:
        out: dict[str, float] = defaultdict(float)
        for l, v in assignment.items():
            out[v] += self.leaf_demands[l]
        return dict(out)


@dataclass
class LpIndex:
    """Where each plan quantity lives in the LP variable vector."""

    primary: dict[tuple[str, int], int] = field(default_factory=dict)
    failover: dict[tuple[str, str, int], int] = field(default_factory=dict)
    spare_dc: dict[str, int] = field(default_factory=dict)
    spare_link: dict[tuple[str, str], int] = field(default_factory=dict)


def _instance(g, sam, leaf_demands, handover, options, instance) -> MecInstance:
    if instance is not None:
        return instance
    return MecInstance(g, sam, leaf_demands, handover, options.max_paths)


def build_mec_lp(
    g: TopologyGraph,
    sam: ServiceAreaMap,
    partition: Partition | Mapping[str, str],
    leaf_demands: Mapping[str, float],
    cost_model: CostModel,
    options: ProvisionOptions = ProvisionOptions(),
    instance: MecInstance | None = None,
) -> tuple[LpProblem, LpIndex]:
    """Assemble the routing + shared-spare LP for a fixed assignment.

    Variables: primary path flows, failover path flows per (leaf, backup DC),
    spare DC capacity and spare link capacity. Spare capacity at a DC or link
    must cover the load of every single-failure scenario separately, so it is
    shared between scenarios rather than summed.
    """
    inst = _instance(g, sam, leaf_demands, None, options, instance)
    assignment = partition.assignment if isinstance(partition, Partition) else dict(partition)
    demands = inst.leaf_demands
    lp = LpProblem()
    idx = LpIndex()
    by_primary: dict[str, list[str]] = defaultdict(list)
    prim_link_terms: dict[tuple[str, str], dict[int, float]] = defaultdict(dict)

    for leaf in sorted(assignment):
        v1 = assignment[leaf]
        h = demands.get(leaf, 0.0)
        if h <= 0:
            continue
        if v1 not in inst.candidates.get(leaf, ()):
            raise ProvisioningError(f"leaf {leaf!r} is outside the service area of {v1!r}")
        paths = inst.paths(leaf, v1)
        if not paths:
            raise ProvisioningError(f"cluster of {leaf!r} has no feasible path to {v1!r}")
        by_primary[v1].append(leaf)
        row = {}
        for k, p in enumerate(paths):
            j = lp.add_var(cost_model.link_cost(p.distance_km), name=f"h[{leaf},{v1},{k}]")
            idx.primary[(leaf, k)] = j
            row[j] = 1.0
            for e in p.links:
                prim_link_terms[e][j] = 1.0
        lp.add_constraint(row, EQ, h, name=f"route[{leaf}]")

    dc_caps = {} if options.uncapacitated or options.dc_capacity_mbps is None else dict(options.dc_capacity_mbps)
    link_cap = lambda e: math.inf if options.uncapacitated else g.links[e].capacity_mbps

    if options.resilience:
        scen_dc: dict[tuple[str, str], dict[int, float]] = defaultdict(dict)
        scen_link: dict[tuple[str, tuple[str, str]], dict[int, float]] = defaultdict(dict)
        for v1 in sorted(by_primary):
            for leaf in by_primary[v1]:
                row = {}
                for v2 in inst.candidates[leaf]:
                    if v2 == v1:
                        continue
                    for k, p in enumerate(inst.paths(leaf, v2)):
                        j = lp.add_var(0.0, name=f"f[{leaf},{v1},{v2},{k}]")
                        idx.failover[(leaf, v2, k)] = j
                        row[j] = 1.0
                        scen_dc[(v1, v2)][j] = 1.0
                        for e in p.links:
                            scen_link[(v1, e)][j] = 1.0
                if not row:
                    raise ProvisioningError(f"leaf {leaf!r} has no secondary DC distinct from {v1!r}")
                lp.add_constraint(row, EQ, demands[leaf], name=f"failover[{leaf}]")
        for v2 in sorted({v2 for _, v2 in scen_dc}):
            idx.spare_dc[v2] = lp.add_var(cost_model.b_dc, name=f"spare_dc[{v2}]")
        for e in sorted({e for _, e in scen_link}):
            idx.spare_link[e] = lp.add_var(cost_model.link_cost(g.links[e].distance_km), name=f"spare_link[{e[0]}|{e[1]}]")
        for (v1, v2), terms in sorted(scen_dc.items()):
            row = {j: -1.0 for j in terms}
            row[idx.spare_dc[v2]] = 1.0
            lp.add_constraint(row, GE, 0.0, name=f"spare_dc[{v1}->{v2}]")
        for (v1, e), terms in sorted(scen_link.items()):
            row = {j: -1.0 for j in terms}
            row[idx.spare_link[e]] = 1.0
            lp.add_constraint(row, GE, 0.0, name=f"spare_link[{v1}:{e[0]}|{e[1]}]")

    served = inst.demand_served({l: assignment[l] for l in assignment if demands.get(l, 0.0) > 0})
    for v, cap in sorted(dc_caps.items()):
        load = served.get(v, 0.0)
        if v in idx.spare_dc:
            lp.add_constraint({idx.spare_dc[v]: 1.0}, LE, cap - load, name=f"dc_cap[{v}]")
        elif load > cap + FLOW_TOL:
            raise ProvisioningError(f"primary demand at {v!r} exceeds its capacity")
    for e in sorted(set(prim_link_terms) | set(idx.spare_link)):
        cap = link_cap(e)
        if math.isinf(cap):
            continue
        row = dict(prim_link_terms.get(e, {}))
        if e in idx.spare_link:
            row[idx.spare_link[e]] = 1.0
        lp.add_constraint(row, LE, cap, name=f"link_cap[{e[0]}|{e[1]}]")
    return lp, idx


def _assignment_key(assignment: Mapping[str, str], demands: Mapping[str, float]) -> tuple:
    return tuple(sorted((l, v) for l, v in assignment.items() if demands.get(l, 0.0) > 0))


def provision(
    g: TopologyGraph,
    sam: ServiceAreaMap,
    partition: Partition | Mapping[str, str],
    leaf_demands: Mapping[str, float],
    handover_graph: HandoverGraph | None,
    cost_model: CostModel,
    options: ProvisionOptions = ProvisionOptions(),
    instance: MecInstance | None = None,
) -> tuple[ProvisioningPlan, CostBreakdown]:
    """Solve the provisioning LP and price the full objective for this assignment."""
    inst = _instance(g, sam, leaf_demands, handover_graph, options, instance)
    assignment = partition.assignment if isinstance(partition, Partition) else dict(partition)
    missing = set(inst.leaves) - set(assignment)
    if missing:
        raise ProvisioningError(f"assignment misses leaves {sorted(missing)}")
    plan = solve_assignment(inst, assignment, cost_model, options)
    return plan, price_plan(plan, inst.topology, cost_model)


def solve_assignment(inst: MecInstance, assignment: Mapping[str, str], cost_model: CostModel, options: ProvisionOptions) -> ProvisioningPlan:
    """Plan for one assignment; memoized on the instance, since the LP ignores ``b_sar``."""
    caps = tuple(sorted((options.dc_capacity_mbps or {}).items()))
    key = (
        _assignment_key(assignment, inst.leaf_demands),
        cost_model.b_dc, cost_model.b_link, cost_model.distance_scale,
        options.resilience, options.uncapacitated, caps, options.lp_solver,
    )
    hit = inst.lp_cache.get(key)
    if hit is None:
        try:
            hit = _solve_plan(inst, assignment, cost_model, options)
        except ProvisioningError as exc:
            hit = exc
        inst.lp_cache[key] = hit
    if isinstance(hit, ProvisioningError):
        raise hit
    plan = hit
    return ProvisioningPlan(
        assignment=dict(sorted(assignment.items())),
        leaf_demand=plan.leaf_demand,
        primary_dc=plan.primary_dc,
        spare_dc=plan.spare_dc,
        primary_flows=plan.primary_flows,
        failover_flows=plan.failover_flows,
        primary_link=plan.primary_link,
        spare_link=plan.spare_link,
        total_sar=inst.sar_total(assignment),
        budget_rtt_ms=plan.budget_rtt_ms,
        resilience=plan.resilience,
    )


def _lp_solve(lp: LpProblem, solver: str):
    if solver == "auto":
        solver = "simplex" if len(lp.constraints) * lp.n <= DENSE_LIMIT else "highs"
    if solver == "simplex":
        return solve_lp(lp)
    if solver == "highs":
        return solve_lp_highs(lp)
    raise ValueError(f"unknown LP solver {solver!r}")


def _solve_plan(inst: MecInstance, assignment, cost_model, options) -> ProvisioningPlan:
    g = inst.topology
    lp, idx = build_mec_lp(g, inst.sam, assignment, inst.leaf_demands, cost_model, options, inst)
    sol = _lp_solve(lp, options.lp_solver)
    if not sol.optimal:
        raise ProvisioningError(f"provisioning LP is {sol.status}")
    x = sol.x

    primary_flows = []
    primary_link: dict[tuple[str, str], float] = defaultdict(float)
    for (leaf, k), j in idx.primary.items():
        if x[j] <= FLOW_TOL:
            continue
        p = inst.paths(leaf, assignment[leaf])[k]
        primary_flows.append(PathFlow(leaf, p.nodes, float(x[j])))
        for e in p.links:
            primary_link[e] += float(x[j])

    failover_flows = []
    scen_dc: dict[tuple[str, str], float] = defaultdict(float)
    scen_link: dict[tuple[str, tuple], float] = defaultdict(float)
    for (leaf, v2, k), j in idx.failover.items():
        if x[j] <= FLOW_TOL:
            continue
        v1 = assignment[leaf]
        p = inst.paths(leaf, v2)[k]
        failover_flows.append(FailoverFlow(leaf, v1, v2, p.nodes, float(x[j])))
        scen_dc[(v1, v2)] += float(x[j])
        for e in p.links:
            scen_link[(v1, e)] += float(x[j])
    # spare = worst single-failure load; never above the LP value, so cost can only drop
    spare_dc: dict[str, float] = {}
    for (v1, v2), load in scen_dc.items():
        spare_dc[v2] = max(spare_dc.get(v2, 0.0), load)
    spare_link: dict[tuple[str, str], float] = {}
    for (v1, e), load in scen_link.items():
        spare_link[e] = max(spare_link.get(e, 0.0), load)

    primary_dc: dict[str, float] = defaultdict(float)
    for leaf, v in assignment.items():
        if inst.leaf_demands.get(leaf, 0.0) > 0:
            primary_dc[v] += inst.leaf_demands[leaf]
    return ProvisioningPlan(
        assignment=dict(assignment),
        leaf_demand=dict(inst.leaf_demands),
        primary_dc=dict(sorted(primary_dc.items())),
        spare_dc=dict(sorted(spare_dc.items())),
        primary_flows=primary_flows,
        failover_flows=failover_flows,
        primary_link=dict(sorted(primary_link.items())),
        spare_link=dict(sorted(spare_link.items())),
        total_sar=0.0,
        budget_rtt_ms=inst.budget_rtt_ms,
        resilience=options.resilience,
    )


def price_plan(plan: ProvisioningPlan, g: TopologyGraph, cost_model: CostModel) -> CostBreakdown:
    cm = cost_model
    return CostBreakdown(
        primary_dc_cost=cm.b_dc * sum(plan.primary_dc.values()),
        spare_dc_cost=cm.b_dc * sum(plan.spare_dc.values()),
        primary_link_cost=sum(cm.link_cost(g.links[e].distance_km) * f for e, f in plan.primary_link.items()),
        spare_link_cost=sum(cm.link_cost(g.links[e].distance_km) * c for e, c in plan.spare_link.items()),
        sar_cost=cm.b_sar * plan.total_sar,
    )


def check_plan(
    plan: ProvisioningPlan,
    g: TopologyGraph,
    sam: ServiceAreaMap,
    options: ProvisionOptions = ProvisionOptions(),
    tol: float = 1e-6,
) -> list[str]:
    """Replay the plan against the topology and every single-DC failure.

    Only the plan's own flows and reserved capacities are used; latencies are
    recomputed from the topology. Returns human-readable violations.
    """
    bad: list[str] = []

    def route_ok(leaf: str, dc: str, nodes: tuple[str, ...], what: str) -> bool:
        if nodes[0] != leaf or nodes[-1] != dc or len(set(nodes)) != len(nodes):
            bad.append(f"{what}: path {nodes} is not a simple {leaf}->{dc} route")
            return False
        for a, b in zip(nodes, nodes[1:]):
            if link_key(a, b) not in g.links:
                bad.append(f"{what}: path {nodes} uses a missing link {a}-{b}")
                return False
        rtt = g.make_path(nodes).latency_rtt_ms
        if rtt > g.leaf_budget_ms(leaf, sam.budget_rtt_ms) + 1e-9:
            bad.append(f"{what}: path {nodes} RTT {rtt:.4f} ms exceeds the budget")
            return False
        return True

    prim_sum: dict[str, float] = defaultdict(float)
    prim_link: dict[tuple, float] = defaultdict(float)
    for f in plan.primary_flows:
        v1 = plan.assignment[f.leaf]
        route_ok(f.leaf, v1, f.path, f"primary {f.leaf}")
        prim_sum[f.leaf] += f.mbps
        for a, b in zip(f.path, f.path[1:]):
            prim_link[link_key(a, b)] += f.mbps

    for leaf, v1 in plan.assignment.items():
        h = plan.leaf_demand.get(leaf, 0.0)
        if h <= 0:
            continue
        if v1 not in sam.dc_of.get(leaf, ()):
            bad.append(f"leaf {leaf} served by {v1} outside its service area")
        if abs(prim_sum[leaf] - h) > tol * max(1.0, h):
            bad.append(f"leaf {leaf}: primary flows carry {prim_sum[leaf]} of {h} Mbps")

    if plan.resilience:
        failed_groups: dict[str, list[str]] = defaultdict(list)
        for leaf, v1 in plan.assignment.items():
            if plan.leaf_demand.get(leaf, 0.0) > 0:
                failed_groups[v1].append(leaf)
        for v1, leaves in sorted(failed_groups.items()):
            dc_load: dict[str, float] = defaultdict(float)
            link_load: dict[tuple, float] = defaultdict(float)
            for leaf in leaves:
                got = 0.0
                for f in plan.failover_flows:
                    if f.leaf != leaf:
                        continue
                    if f.failed_dc != v1:
                        bad.append(f"failover flow for {leaf} tagged with wrong failed DC {f.failed_dc}")
                        continue
                    if f.backup_dc == v1:
                        bad.append(f"leaf {leaf} fails over to its own primary {v1}")
                        continue
                    if f.backup_dc not in sam.dc_of.get(leaf, ()):
                        bad.append(f"leaf {leaf} backup {f.backup_dc} is outside its service area")
                    route_ok(leaf, f.backup_dc, f.path, f"failover {leaf}")
                    got += f.mbps
                    dc_load[f.backup_dc] += f.mbps
                    for a, b in zip(f.path, f.path[1:]):
                        link_load[link_key(a, b)] += f.mbps
                h = plan.leaf_demand[leaf]
                if abs(got - h) > tol * max(1.0, h):
                    bad.append(f"failure of {v1}: leaf {leaf} recovers {got} of {h} Mbps")
            for v2, load in sorted(dc_load.items()):
                if load > plan.spare_dc.get(v2, 0.0) + tol * max(1.0, load):
                    bad.append(f"failure of {v1}: backup DC {v2} needs {load} but reserves {plan.spare_dc.get(v2, 0.0)}")
            for e, load in sorted(link_load.items()):
                if load > plan.spare_link.get(e, 0.0) + tol * max(1.0, load):
                    bad.append(f"failure of {v1}: link {e} needs {load} spare but reserves {plan.spare_link.get(e, 0.0)}")

    if not options.uncapacitated:
        caps = options.dc_capacity_mbps or {}
        for v, cap in caps.items():
            used = plan.primary_dc.get(v, 0.0) + plan.spare_dc.get(v, 0.0)
            if used > cap + tol * max(1.0, cap):
                bad.append(f"DC {v} uses {used} of capacity {cap}")
        for e in set(prim_link) | set(plan.spare_link):
            cap = g.links[e].capacity_mbps
            used = prim_link.get(e, 0.0) + plan.spare_link.get(e, 0.0)
            if used > cap + tol * max(1.0, cap):
                bad.append(f"link {e} uses {used} of capacity {cap}")
    return bad
