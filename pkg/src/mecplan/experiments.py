"""End-to-end planning pipeline and the studies built on it: SAR sweeps,
fixed-vs-MEC capacity comparison and greedy-vs-oracle gaps."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

from .demand import (
    DemandProfile,
    HandoverGraph,
    Partition,
    aggregate_demand,
    build_handover_graph,
)
from .multiway_cut import isolating_kcut, repair_partition
from .optimizer import MergeTrace, OracleError, OracleTable, enumerate_assignments, exact_oracle, greedy_merge
from .provisioner import (
    CostBreakdown,
    CostModel,
    MecInstance,
    ProvisioningError,
    ProvisioningPlan,
    ProvisionOptions,
    check_plan,
)
from .scenario import generate_scenario, load_scenario, preset
from .topology import ServiceAreaMap, TopologyGraph, build_topology, min_dc_cover, service_areas

DEFAULT_B_SAR_GRID = (0.0, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5)
SWEEP_COLUMNS = ["b_sar", "budget", "link_cost", "dc_cost", "sar_cost", "total", "n_primary_dcs", "n_secondary_dcs", "total_sar"]
CURVE_COLUMNS = ["b_dc", "series", "b_sar", "dc_capacity_mbps", "dc_cost"]
GAP_COLUMNS = ["seed", "budget", "b_sar", "greedy_total", "oracle_total", "ratio", "greedy_clusters", "oracle_clusters"]
TIMING_COLUMNS = ["greedy_s", "oracle_s"]


class InfeasibleError(RuntimeError):
    """No resilient plan exists; ``uncovered`` lists BSs outside every service area."""

    def __init__(self, msg: str, uncovered: Sequence[str] = ()):
        super().__init__(msg)
        self.uncovered = list(uncovered)


@dataclass
class SweepConfig:
    scenarios: list[str] = field(default_factory=list)
    hour: int = 18
    budgets: list[float] = field(default_factory=lambda: [10.0])
    b_dc: float = 1.0
    b_link: float = 1.0
    b_sar_grid: list[float] = field(default_factory=lambda: list(DEFAULT_B_SAR_GRID))
    resilience: bool = True
    out_dir: str = "out"
    mode: str = "greedy"
    max_paths: int = 4
    jobs: int = 1
    # compare-fixed
    fixed_dcs: list[str] = field(default_factory=list)
    b_dc_grid: list[float] = field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0, 8.0])
    mec_b_sar: list[float] = field(default_factory=lambda: [0.0])
    # gap
    preset: str = "tiny"
    preset_overrides: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=lambda: list(range(5)))
    timing: bool = False

    def validate(self) -> None:
        if not self.budgets or any(not b > 0 for b in self.budgets):
            raise ValueError("budgets must be a non-empty list of positive values")
        if not self.b_sar_grid or any(b < 0 for b in self.b_sar_grid):
            raise ValueError("b_sar grid must be non-empty and non-negative")
        if self.mode not in ("greedy", "oracle"):
            raise ValueError(f"mode must be 'greedy' or 'oracle', not {self.mode!r}")
        if not 0 <= self.hour < 24:
            raise ValueError("hour must be in 0..23")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @classmethod
    def from_json(cls, path, **overrides) -> "SweepConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8")) if path else {}
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        raw.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def cost_model(self, b_sar: float = 0.0, b_dc: float | None = None) -> CostModel:
        return CostModel(b_dc=self.b_dc if b_dc is None else b_dc, b_link=self.b_link, b_sar=b_sar)

    def options(self) -> ProvisionOptions:
        return ProvisionOptions(resilience=self.resilience, max_paths=self.max_paths)


@dataclass
class Inputs:
    """A scenario reduced to one hour of traffic."""

    g: TopologyGraph
    ho: HandoverGraph
    leaf_demand: dict[str, float]
    bs_demand: dict[str, float]

    @classmethod
    def from_scenario(cls, g: TopologyGraph, profile: DemandProfile, ho_rows, hour: int) -> "Inputs":
        ho = build_handover_graph(g, ho_rows, hour)
        bs_demand = {b: profile.at(b, hour) for b in g.base_stations}
        return cls(g, ho, aggregate_demand(profile, g, hour), bs_demand)


def load_inputs(path, hour: int) -> Inputs:
    g, profile, ho_rows = load_scenario(path)
    return Inputs.from_scenario(g, profile, ho_rows, hour)


def inputs_from_scenario(s, hour: int) -> Inputs:
    g = build_topology(s.topology)
    return Inputs.from_scenario(g, DemandProfile.from_rows(s.demand_rows), s.handover_rows, hour)


def initial_partition(inp: Inputs, sam: ServiceAreaMap) -> Partition:
    """Isolating cut on the handover graph with one leaf DC per cluster.

    Each cluster starts on its own leaf; a leaf whose own site is outside its
    service area starts on its lowest-RTT candidate instead.
    """
    g = inp.g
    bad = sam.uncovered(g.base_stations)
    if bad:
        raise InfeasibleError(f"{len(bad)} BSs have no DC within {sam.budget_rtt_ms} ms", bad)
    if len(g.leaf_dcs) == 1:
        assignment = {g.leaf_dcs[0]: g.leaf_dcs[0]}
    else:
        cut = repair_partition(isolating_kcut(inp.ho, g.leaf_dcs), inp.ho)
        assignment = cut.to_partition(g).assignment
    for leaf, v in list(assignment.items()):
        cands = sam.dc_of.get(leaf, frozenset())
        if v not in cands:
            if not cands:
                raise InfeasibleError(f"leaf {leaf} has no candidate DC", [b for b in g.base_stations_of(leaf) if not sam.dc_of.get(b)])
            assignment[leaf] = min(cands, key=lambda d: (sam.rtt_ms.get((leaf, d), math.inf), d))
    return Partition.from_assignment(g, assignment)


@dataclass
class Solution:
    partition: Partition
    plan: ProvisioningPlan
    costs: CostBreakdown
    trace: MergeTrace | None = None


def make_instance(inp: Inputs, budget: float, max_paths: int = 4) -> MecInstance:
    return MecInstance(inp.g, service_areas(inp.g, budget), inp.leaf_demand, inp.ho, max_paths)


def solve(
    inp: Inputs,
    budget: float,
    cost_model: CostModel,
    options: ProvisionOptions = ProvisionOptions(),
    mode: str = "greedy",
    inst: MecInstance | None = None,
    table: OracleTable | None = None,
    force_merge_to_one: bool = False,
) -> Solution:
    """K-cut, repair, greedy merge (or exact enumeration) and final provisioning."""
    inst = inst or make_instance(inp, budget, options.max_paths)
    try:
        if mode == "oracle":
            bad = inst.sam.uncovered(inp.g.base_stations)
            if bad:
                raise InfeasibleError(f"{len(bad)} BSs have no DC within {budget} ms", bad)
            part, costs, plan = exact_oracle(None, inst, cost_model, options, table=table)
            return Solution(part, plan, costs)
        start = initial_partition(inp, inst.sam)
        trace = greedy_merge(start, inst, cost_model, options, force_merge_to_one)
    except (ProvisioningError, OracleError) as exc:
        raise InfeasibleError(f"no feasible plan at {budget} ms: {exc}") from exc
    return Solution(trace.partition, trace.plan, trace.costs, trace)


def sweep_row(b_sar: float, budget: float, sol: Solution) -> dict:
    c = sol.costs
    return {
        "b_sar": b_sar,
        "budget": budget,
        "link_cost": c.link_cost,
        "dc_cost": c.dc_cost,
        "sar_cost": c.sar_cost,
        "total": c.total,
        "n_primary_dcs": len(sol.plan.serving_dcs),
        "n_secondary_dcs": len(sol.plan.secondary_dcs),
        "total_sar": sol.plan.total_sar,
    }


def _sweep_task(args) -> list[dict]:
    scenario, budget, cfg = args
    inp = load_inputs(scenario, cfg.hour)
    inst = make_instance(inp, budget, cfg.max_paths)
    opts = cfg.options()
    table = None
    if cfg.mode == "oracle":
        bad = inst.sam.uncovered(inp.g.base_stations)
        if bad:
            raise InfeasibleError(f"{len(bad)} BSs have no DC within {budget} ms", bad)
        table = enumerate_assignments(inst, cfg.cost_model(), opts)
    rows = []
    for b_sar in cfg.b_sar_grid:
        sol = solve(inp, budget, cfg.cost_model(b_sar), opts, cfg.mode, inst, table)
        bad = check_plan(sol.plan, inp.g, inst.sam, opts)
        if bad:
            raise InfeasibleError(f"plan at budget {budget}, b_sar {b_sar} fails its resilience check: {bad[0]}")
        rows.append(sweep_row(b_sar, budget, sol))
    return rows


def _map(fn, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def run_sweep(cfg: SweepConfig, scenario) -> list[dict]:
    """One row per (budget, b_sar) point, budgets in config order."""
    tasks = [(str(scenario), b, cfg) for b in cfg.budgets]
    return [row for rows in _map(_sweep_task, tasks, cfg.jobs) for row in rows]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: Sequence[Mapping], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


# fixed placement vs MEC

@dataclass
class FixedReport:
    fixed_dcs: list[str]
    budget: float
    total_demand: float
    covered_fraction: float
    centralized_primary: float
    centralized_spare: float
    mec: list[dict]
    curves: list[dict]

    @property
    def shortfall_fraction(self) -> float:
        return 1.0 - self.covered_fraction

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shortfall_fraction"] = self.shortfall_fraction
        return d


def centralized_capacity(inp: Inputs, sam: ServiceAreaMap, fixed: Sequence[str]) -> tuple[float, float, float]:
    """(primary, spare, covered fraction) when all demand sits on the fixed DCs under 1+1.

    Every Mbps is hosted once on a fixed DC and duplicated on a standby, so the
    spare equals total demand. Coverage counts demand whose BS reaches some
    fixed DC within the budget.
    """
    missing = set(fixed) - set(inp.g.dcs)
    if not fixed or missing:
        raise ValueError(f"fixed DC set must be non-empty DC ids; unknown: {sorted(missing)}")
    total = sum(inp.bs_demand.values())
    covered = sam.restricted_to(fixed).coverage_fraction(inp.g.base_stations, inp.bs_demand)
    return total, total, covered


def compare_fixed(cfg: SweepConfig, inp: Inputs, budget: float | None = None) -> FixedReport:
    budget = cfg.budgets[0] if budget is None else budget
    sam = service_areas(inp.g, budget)
    prim, spare, covered = centralized_capacity(inp, sam, cfg.fixed_dcs)
    opts = cfg.options()
    inst = make_instance(inp, budget, cfg.max_paths)
    mec = []
    for b_sar in cfg.mec_b_sar:
        sol = solve(inp, budget, cfg.cost_model(b_sar), opts, cfg.mode, inst)
        p, s = sum(sol.plan.primary_dc.values()), sum(sol.plan.spare_dc.values())
        mec.append({
            "b_sar": b_sar,
            "primary_mbps": p,
            "spare_mbps": s,
            "n_primary_dcs": len(sol.plan.serving_dcs),
            "capacity_ratio": (prim + spare) / (p + s) if p + s > 0 else math.inf,
            "spare_ratio": s / spare if spare > 0 else 0.0,
        })
    curves = []
    for b_dc in cfg.b_dc_grid:
        curves.append({"b_dc": b_dc, "series": "fixed_1+1", "b_sar": 0.0, "dc_capacity_mbps": prim + spare, "dc_cost": b_dc * (prim + spare)})
        for b_sar in cfg.mec_b_sar:
            sol = solve(inp, budget, cfg.cost_model(b_sar, b_dc=b_dc), opts, cfg.mode, inst)
            cap = sum(sol.plan.primary_dc.values()) + sum(sol.plan.spare_dc.values())
            curves.append({"b_dc": b_dc, "series": "mec", "b_sar": b_sar, "dc_capacity_mbps": cap, "dc_cost": sol.costs.dc_cost})
    return FixedReport(list(cfg.fixed_dcs), budget, prim, covered, prim, spare, mec, curves)


# greedy vs oracle

def _gap_task(args) -> list[dict]:
    seed, cfg = args
    s = generate_scenario(preset(cfg.preset, seed=seed, **cfg.preset_overrides))
    inp = inputs_from_scenario(s, cfg.hour)
    opts = cfg.options()
    rows = []
    for budget in cfg.budgets:
        g_inst = make_instance(inp, budget, cfg.max_paths)
        o_inst = make_instance(inp, budget, cfg.max_paths)
        t0 = time.perf_counter()
        try:
            table = enumerate_assignments(o_inst, cfg.cost_model(), opts)
        except OracleError as exc:
            raise InfeasibleError(f"seed {seed}, budget {budget}: {exc}") from exc
        oracle_s = time.perf_counter() - t0
        for b_sar in cfg.b_sar_grid:
            cm = cfg.cost_model(b_sar)
            t0 = time.perf_counter()
            gs = solve(inp, budget, cm, opts, "greedy", g_inst)
            greedy_s = time.perf_counter() - t0
            t0 = time.perf_counter()
            os_ = solve(inp, budget, cm, opts, "oracle", o_inst, table)
            oracle_pick = time.perf_counter() - t0
            rows.append({
                "seed": seed,
                "budget": budget,
                "b_sar": b_sar,
                "greedy_total": gs.costs.total,
                "oracle_total": os_.costs.total,
                "ratio": gs.costs.total / os_.costs.total if os_.costs.total > 0 else 1.0,
                "greedy_clusters": len(gs.partition.clusters),
                "oracle_clusters": len(os_.partition.clusters),
                "greedy_s": greedy_s,
                # the enumeration is shared by the whole b_sar grid
                "oracle_s": oracle_s / len(cfg.b_sar_grid) + oracle_pick,
            })
    return rows


def run_gap(cfg: SweepConfig) -> list[dict]:
    tasks = [(seed, cfg) for seed in cfg.seeds]
    return [row for rows in _map(_gap_task, tasks, cfg.jobs) for row in rows]


def gap_summary(rows: Sequence[Mapping], rel_tol: float = 1e-6) -> dict:
    out = {}
    for budget in sorted({r["budget"] for r in rows}):
        sel = [r for r in rows if r["budget"] == budget]
        ratios = [r["ratio"] for r in sel]
        out[repr(budget)] = {
            "points": len(sel),
            "equal_fraction": sum(r <= 1 + rel_tol for r in ratios) / len(sel),
            "max_ratio": max(ratios),
            "min_ratio": min(ratios),
        }
    return out


def min_cover_size(inp: Inputs, budget: float) -> int:
    return len(min_dc_cover(service_areas(inp.g, budget), "exact"))
