"""Assignment search: greedy pairwise cluster merging and an exhaustive oracle."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .demand import Partition
from .provisioner import (
    CostBreakdown,
    CostModel,
    MecInstance,
    ProvisioningError,
    ProvisioningPlan,
    ProvisionOptions,
    price_plan,
    solve_assignment,
)

REL_TOL = 1e-9
TRACE_HEADER = ["step", "pair", "gamma", "direction", "total_cost", "n_serving_dcs", "total_sar"]


class OracleError(RuntimeError):
    pass


def gamma_ratio(sar: float, denominator: float) -> float:
    """SAR over primary cost, with the degenerate cases pinned down."""
    if sar <= 0:
        return 0.0
    if denominator <= 0:
        return math.inf
    return sar / denominator


@dataclass
class MergeState:
    """Current assignment plus its provisioning result."""

    inst: MecInstance
    assignment: dict[str, str]
    plan: ProvisioningPlan
    costs: CostBreakdown
    cost_model: CostModel

    @property
    def serving(self) -> list[str]:
        return sorted(set(self.assignment.values()))

    def members(self, v: str) -> list[str]:
        return sorted(l for l, dc in self.assignment.items() if dc == v)

    def demand(self, v: str) -> float:
        return sum(self.inst.leaf_demands[l] for l in self.members(v))

    def sar_between(self, v: str, u: str) -> float:
        return self.inst.sar_between(self.assignment, v, u)

    def primary_cost(self, v: str) -> float:
        """Primary DC cost plus primary path-link cost of the demand served at ``v``."""
        leaves = set(self.members(v))
        g = self.inst.topology
        link = 0.0
        for f in self.plan.primary_flows:
            if f.leaf in leaves:
                dist = g.make_path(f.path).distance_km
                link += self.cost_model.link_cost(dist) * f.mbps
        return self.cost_model.b_dc * self.demand(v) + link


def pseudocost(v: str, u: str, state: MergeState) -> float:
    """Merge priority of the cluster pair ``(v, u)``, normalized by ``v``'s primary cost."""
    return gamma_ratio(state.sar_between(v, u), state.primary_cost(v))


@dataclass(frozen=True)
class MergeStep:
    step: int
    pair: tuple[str, str]
    gamma: float
    direction: str
    total_cost: float
    n_serving_dcs: int
    total_sar: float


@dataclass
class MergeTrace:
    steps: list[MergeStep]
    partition: Partition
    plan: ProvisioningPlan
    costs: CostBreakdown
    initial_cost: float = math.nan

    @property
    def assignment(self) -> dict[str, str]:
        return self.partition.assignment

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for s in self.steps:
            w.writerow([s.step, f"{s.pair[0]}|{s.pair[1]}", repr(s.gamma), s.direction, repr(s.total_cost), s.n_serving_dcs, repr(s.total_sar)])
        return buf.getvalue()


def _evaluate(inst: MecInstance, assignment: Mapping[str, str], cost_model: CostModel, options: ProvisionOptions):
    plan = solve_assignment(inst, assignment, cost_model, options)
    return plan, price_plan(plan, inst.topology, cost_model)


def _merged(assignment: Mapping[str, str], src: str, dst: str) -> dict[str, str]:
    return {l: (dst if v == src else v) for l, v in assignment.items()}


def _feasible_move(inst: MecInstance, assignment: Mapping[str, str], src: str, dst: str) -> bool:
    return all(dst in inst.candidates[l] for l, v in assignment.items() if v == src)


def _better(a: float, b: float) -> bool:
    """``a`` strictly below ``b`` beyond round-off."""
    return a < b - REL_TOL * max(1.0, abs(b))


def greedy_merge(
    initial: Partition | Mapping[str, str],
    inst: MecInstance,
    cost_model: CostModel,
    options: ProvisionOptions = ProvisionOptions(),
    force_merge_to_one: bool = False,
) -> MergeTrace:
    """Repeatedly merge the neighbouring cluster pair with the largest pseudocost.

    Both merge directions are re-provisioned and the cheaper one is kept; the
    merge is accepted only if it lowers the total cost, otherwise the next pair
    in pseudocost order is tried. Stops when no merge helps or one cluster is
    left. ``force_merge_to_one`` accepts the best direction of the top
    feasible pair even when it costs more, tracing the whole merge path.
    """
    assignment = dict(initial.assignment if isinstance(initial, Partition) else initial)
    plan, costs = _evaluate(inst, assignment, cost_model, options)
    state = MergeState(inst, assignment, plan, costs, cost_model)
    steps: list[MergeStep] = []
    initial_cost = costs.total

    while len(state.serving) > 1:
        ranked = []
        for v, u in itertools.permutations(state.serving, 2):
            if state.sar_between(v, u) <= 0:
                continue
            ranked.append((pseudocost(v, u, state), v, u))
        # largest gamma first; equal gamma -> lexicographic pair
        ranked.sort(key=lambda r: (-r[0], r[1], r[2]))
        tried: set[frozenset] = set()
        accepted = None
        for gamma, v, u in ranked:
            key = frozenset((v, u))
            if key in tried:
                continue
            tried.add(key)
            options_here = []
            for src, dst in ((v, u), (u, v)):
                if not _feasible_move(inst, state.assignment, src, dst):
                    continue
                cand = _merged(state.assignment, src, dst)
                try:
                    p, c = _evaluate(inst, cand, cost_model, options)
                except ProvisioningError:
                    continue
                # equal cost -> keep the DC already serving more demand
                options_here.append((c.total, -state.demand(dst), dst, src, cand, p, c))
            if not options_here:
                continue
            best = min(options_here, key=lambda o: o[:3])
            if force_merge_to_one or _better(best[0], state.costs.total):
                accepted = (gamma, v, u, best)
                break
        if accepted is None:
            break
        gamma, v, u, (total, _, dst, src, cand, p, c) = accepted
        state = MergeState(inst, cand, p, c, cost_model)
        steps.append(MergeStep(len(steps) + 1, (v, u), gamma, f"{src}->{dst}", c.total, len(state.serving), p.total_sar))

    g = inst.topology
    return MergeTrace(steps, Partition.from_assignment(g, state.assignment), state.plan, state.costs, initial_cost)


@dataclass
class OracleTable:
    """Every feasible assignment with its SAR-independent cost and SAR volume.

    The provisioning LP does not involve ``b_sar``, so one enumeration answers
    the exact optimum for any SAR price via :meth:`best`.
    """

    leaves: list[str]
    rows: list[tuple[tuple[str, ...], float, float]] = field(default_factory=list)
    cost_model: CostModel = field(default_factory=CostModel)

    def best(self, b_sar: float) -> tuple[dict[str, str], float]:
        if not self.rows:
            raise OracleError("all assignments infeasible")
        best_row, best_val = None, math.inf
        for row in self.rows:
            val = row[1] + b_sar * row[2]
            if best_row is None or val < best_val - 1e-12 * max(1.0, abs(best_val)):
                best_row, best_val = row, val
        return dict(zip(self.leaves, best_row[0])), best_val


def count_assignments(inst: MecInstance, leaves: Iterable[str] | None = None) -> int:
    leaves = inst.leaves if leaves is None else list(leaves)
    return math.prod(len(inst.candidates[l]) for l in leaves)


def enumerate_assignments(
    inst: MecInstance,
    cost_model: CostModel,
    options: ProvisionOptions = ProvisionOptions(),
    limit: int = 10**6,
    leaves: Iterable[str] | None = None,
) -> OracleTable:
    leaves = inst.leaves if leaves is None else sorted(leaves)
    if set(leaves) != set(inst.leaves):
        raise OracleError("the oracle must enumerate every leaf")
    n = count_assignments(inst, leaves)
    if n > limit:
        raise OracleError(f"{n} assignments exceed the enumeration limit {limit}")
    base = CostModel(cost_model.b_dc, cost_model.b_link, 0.0, cost_model.distance_scale)
    table = OracleTable(list(leaves), [], base)
    for combo in itertools.product(*(inst.candidates[l] for l in leaves)):
        a = dict(zip(leaves, combo))
        try:
            plan, costs = _evaluate(inst, a, base, options)
        except ProvisioningError:
            continue
        table.rows.append((combo, costs.total, plan.total_sar))
    return table


def exact_oracle(
    clusters: Iterable[str] | None,
    inst: MecInstance,
    cost_model: CostModel,
    options: ProvisionOptions = ProvisionOptions(),
    limit: int = 10**6,
    table: OracleTable | None = None,
) -> tuple[Partition, CostBreakdown, ProvisioningPlan]:
    """Globally optimal assignment by enumerating every leaf -> candidate DC map."""
    if table is None:
        table = enumerate_assignments(inst, cost_model, options, limit, clusters)
    assignment, _ = table.best(cost_model.b_sar)
    plan, costs = _evaluate(inst, assignment, cost_model, options)
    return Partition.from_assignment(inst.topology, assignment), costs, plan
