import itertools
import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import desk_three_dc, make_topology
from oracles import brute_sar, brute_spare, simulate_failures
from mecplan.demand import build_handover_graph
from mecplan.lp_core import solve_lp, solve_lp_highs
from mecplan.provisioner import (
    CostModel,
    MecInstance,
    ProvisionOptions,
    ProvisioningError,
    build_mec_lp,
    check_plan,
    price_plan,
    provision,
    solve_assignment,
)
from mecplan.topology import service_areas

LOCAL = {"LA": "LA", "LB": "LB"}
DEMAND = {"LA": 5.0, "LB": 3.0}


def test_single_cluster_colocated_no_resilience():
    g = make_topology([("B1", 0, 0), ("L1", 0, 0)], [("B1", "L1", 0.0)])
    sam = service_areas(g, 1.0)
    opts = ProvisionOptions(resilience=False)
    lp, idx = build_mec_lp(g, sam, {"L1": "L1"}, {"L1": 4.0}, CostModel(), opts)
    assert lp.n == 1 and len(idx.primary) == 1
    plan, costs = provision(g, sam, {"L1": "L1"}, {"L1": 4.0}, None, CostModel(), opts)
    assert costs.primary_link_cost == 0.0 and costs.spare_dc_cost == 0.0
    assert costs.total == pytest.approx(4.0)
    assert check_plan(plan, g, sam, opts) == []


def test_shared_third_dc_spare_is_max_not_sum():
    g = desk_three_dc(with_c=True)
    sam = service_areas(g, 1.0)
    plan, costs = provision(g, sam, LOCAL, DEMAND, None, CostModel(), ProvisionOptions())
    want = brute_spare(DEMAND, {"LA": ["LB", "C"], "LB": ["LA", "C"]})
    assert want == 5.0
    assert sum(plan.spare_dc.values()) == pytest.approx(want)
    assert costs.spare_dc_cost == pytest.approx(5.0)
    assert check_plan(plan, g, sam) == []


def test_two_dcs_cover_each_other():
    g = desk_three_dc(with_c=False)
    sam = service_areas(g, 1.0)
    plan, _ = provision(g, sam, LOCAL, DEMAND, None, CostModel(), ProvisionOptions())
    assert plan.spare_dc == pytest.approx({"LA": 3.0, "LB": 5.0})
    assert brute_spare(DEMAND, {"LA": ["LB"], "LB": ["LA"]}) == 8.0
    # shared backup stays below the primary total with a third covering DC
    g3 = desk_three_dc(with_c=True)
    p3, _ = provision(g3, service_areas(g3, 1.0), LOCAL, DEMAND, None, CostModel(), ProvisionOptions())
    assert sum(p3.spare_dc.values()) < sum(plan.spare_dc.values())


def test_spare_dc_cost_scales_with_b_dc():
    g = desk_three_dc(with_c=True)
    sam = service_areas(g, 1.0)
    _, costs = provision(g, sam, LOCAL, DEMAND, None, CostModel(b_dc=3.0), ProvisionOptions())
    assert costs.spare_dc_cost == pytest.approx(15.0)
    assert costs.primary_dc_cost == pytest.approx(24.0)


def test_no_distinct_secondary_is_infeasible():
    g = make_topology([("B1", 0, 0), ("L1", 0, 0)], [("B1", "L1", 0.0)])
    sam = service_areas(g, 1.0)
    with pytest.raises(ProvisioningError, match="secondary"):
        provision(g, sam, {"L1": "L1"}, {"L1": 1.0}, None, CostModel(), ProvisionOptions())


def test_out_of_area_assignment_rejected():
    g = make_topology(
        [("BA", 0, 0), ("BB", 100, 0), ("LA", 0, 0), ("LB", 100, 0)],
        [("BA", "LA", 0), ("BB", "LB", 0), ("LA", "LB", 100)],
    )
    sam = service_areas(g, 0.5)  # 100 km is 1 ms RTT
    with pytest.raises(ProvisioningError, match="service area"):
        provision(g, sam, {"LA": "LB", "LB": "LB"}, {"LA": 1.0, "LB": 1.0}, None, CostModel(), ProvisionOptions(resilience=False))


def test_local_at_zero_sar_price_has_no_backbone_cost(tiny_inputs):
    inp = tiny_inputs
    sam = service_areas(inp.g, 10.0)
    plan, costs = provision(inp.g, sam, {l: l for l in inp.g.leaf_dcs}, inp.leaf_demand, inp.ho, CostModel(), ProvisionOptions())
    assert costs.sar_cost == 0.0 and costs.primary_link_cost == 0.0
    one = {l: inp.g.leaf_dcs[0] for l in inp.g.leaf_dcs}
    plan1, costs1 = provision(inp.g, sam, one, inp.leaf_demand, inp.ho, CostModel(b_sar=1e6), ProvisionOptions())
    assert plan1.total_sar == 0.0 and costs1.sar_cost == 0.0


def recompute_total(plan, g, ho, cm):
    """Every objective term rebuilt from raw plan quantities."""
    prim_dc = cm.b_dc * sum(plan.leaf_demand[l] for l in plan.assignment if plan.leaf_demand[l] > 0)
    spare_dc = cm.b_dc * sum(plan.spare_dc.values())
    prim_link = 0.0
    for f in plan.primary_flows:
        km = sum(g.link(a, b).distance_km for a, b in zip(f.path, f.path[1:]))
        prim_link += cm.b_link * km * f.mbps
    spare_link = sum(cm.b_link * g.links[e].distance_km * c for e, c in plan.spare_link.items())
    where = {b: plan.assignment[g.leaf_of(b)] for b in g.base_stations}
    sar = cm.b_sar * brute_sar(where, ho.rates)
    return prim_dc + spare_dc + prim_link + spare_link + sar


def three_cluster_desk():
    nodes = [("L0", 0, 0), ("L1", 4, 0), ("L2", 2, 3), ("C0", 2, 1)]
    links = [("L0", "L1", 4), ("L1", "L2", 3.6), ("L0", "L2", 3.6), ("L0", "C0", 2.2), ("L1", "C0", 2.2), ("L2", "C0", 2)]
    for l in range(3):
        for k in range(2):
            nodes.append((f"B{l}{k}", 0, 0))
            links.append((f"B{l}{k}", f"L{l}", 0.5))
    g = make_topology(nodes, links)
    recs = [("B00", "B10", 0, 3.0), ("B10", "B00", 0, 1.0), ("B11", "B21", 0, 2.5), ("B20", "B01", 0, 0.5), ("B00", "B01", 0, 9.0)]
    return g, build_handover_graph(g, recs, 0)


@pytest.mark.parametrize("assignment", [
    {"L0": "L0", "L1": "L1", "L2": "L2"},
    {"L0": "C0", "L1": "L1", "L2": "L2"},
    {"L0": "L0", "L1": "L0", "L2": "L2"},
    {"L0": "C0", "L1": "C0", "L2": "C0"},
])
def test_cost_matches_term_by_term(assignment):
    g, ho = three_cluster_desk()
    sam = service_areas(g, 1.0)
    demand = {"L0": 10.0, "L1": 7.0, "L2": 4.0}
    cm = CostModel(b_dc=2.0, b_link=0.5, b_sar=3.0)
    plan, costs = provision(g, sam, assignment, demand, ho, cm, ProvisionOptions())
    assert costs.total == pytest.approx(recompute_total(plan, g, ho, cm), rel=1e-6)
    assert check_plan(plan, g, sam) == []
    d = json.loads(plan.to_json(costs))
    assert d["costs"]["total"] == pytest.approx(costs.total)


def test_checker_catches_short_spare():
    g = desk_three_dc(with_c=True)
    sam = service_areas(g, 1.0)
    plan, _ = provision(g, sam, LOCAL, DEMAND, None, CostModel(), ProvisionOptions())
    for v in plan.spare_dc:
        plan.spare_dc[v] *= 0.5
    assert any("reserves" in msg for msg in check_plan(plan, g, sam))


def test_dc_capacity_respected():
    g = desk_three_dc(with_c=True)
    sam = service_areas(g, 1.0)
    caps = {"C": 2.0, "LA": 100.0, "LB": 100.0}
    opts = ProvisionOptions(uncapacitated=False, dc_capacity_mbps=caps)
    plan, _ = provision(g, sam, LOCAL, DEMAND, None, CostModel(), opts)
    assert plan.spare_dc.get("C", 0.0) <= 2.0 + 1e-9
    assert check_plan(plan, g, sam, opts) == []
    assert sum(plan.spare_dc.values()) > 5.0  # C can no longer take the whole failover


def test_link_capacity_respected():
    nodes = [("BA", 0, 0), ("BB", 1, 0), ("LA", 0, 0), ("LB", 1, 0)]
    raw_links = [("BA", "LA", 0.0), ("BB", "LB", 0.0)]
    g0 = make_topology(nodes, raw_links + [("LA", "LB", 1.0)])
    raw = g0.to_dict()
    for lk in raw["links"]:
        if {lk["a"], lk["b"]} == {"LA", "LB"}:
            lk["capacity_mbps"] = 4.0
    from mecplan.topology import build_topology

    g = build_topology(raw)
    sam = service_areas(g, 1.0)
    opts = ProvisionOptions(uncapacitated=False)
    with pytest.raises(ProvisioningError):
        provision(g, sam, LOCAL, DEMAND, None, CostModel(), opts)
    plan, _ = provision(g, sam, LOCAL, {"LA": 4.0, "LB": 3.0}, None, CostModel(), opts)
    assert check_plan(plan, g, sam, opts) == []


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_random_assignments_replay_clean(seed):
    from mecplan.experiments import inputs_from_scenario
    from mecplan.scenario import generate_scenario, preset

    rng = random.Random(seed)
    inp = inputs_from_scenario(generate_scenario(preset("tiny", seed=seed % 7)), rng.randrange(24))
    budget = rng.choice([0.9, 1.2, 10.0])
    sam = service_areas(inp.g, budget)
    inst = MecInstance(inp.g, sam, inp.leaf_demand, inp.ho)
    a = {l: rng.choice(inst.candidates[l]) for l in inst.leaves}
    cm = CostModel(b_sar=rng.choice([0.0, 10.0]))
    try:
        plan = solve_assignment(inst, a, cm, ProvisionOptions())
    except ProvisioningError:
        return
    costs = price_plan(plan, inp.g, cm)
    assert check_plan(plan, inp.g, sam) == []
    assert simulate_failures(plan, inp.g.to_dict(), budget) == []
    assert sum(plan.spare_dc.values()) <= sum(plan.primary_dc.values()) + 1e-6
    assert costs.total == pytest.approx(recompute_total(plan, inp.g, inp.ho, cm), rel=1e-6)


def test_highs_and_simplex_agree(tiny_inputs):
    inp = tiny_inputs
    sam = service_areas(inp.g, 10.0)
    inst = MecInstance(inp.g, sam, inp.leaf_demand, inp.ho)
    for a in itertools.islice(itertools.product(*(inst.candidates[l] for l in inst.leaves)), 0, 400, 37):
        a = dict(zip(inst.leaves, a))
        lp, _ = build_mec_lp(inp.g, sam, a, inp.leaf_demand, CostModel(), ProvisionOptions(), inst)
        s1, s2 = solve_lp(lp), solve_lp_highs(lp)
        assert s1.status == s2.status
        assert s1.objective == pytest.approx(s2.objective, rel=1e-7)


def test_primary_dc_cost_is_assignment_invariant(tiny_inputs):
    inp = tiny_inputs
    sam = service_areas(inp.g, 10.0)
    inst = MecInstance(inp.g, sam, inp.leaf_demand, inp.ho)
    seen = set()
    for combo in itertools.islice(itertools.product(*(inst.candidates[l] for l in inst.leaves)), 0, 600, 53):
        plan = solve_assignment(inst, dict(zip(inst.leaves, combo)), CostModel(), ProvisionOptions())
        seen.add(round(price_plan(plan, inp.g, CostModel()).primary_dc_cost, 6))
    assert len(seen) == 1


def test_failure_replay_agrees_and_flags_sabotage():
    from dataclasses import replace

    g = desk_three_dc(with_c=True)
    sam = service_areas(g, 1.0)
    plan, _ = provision(g, sam, LOCAL, DEMAND, None, CostModel(), ProvisionOptions())
    raw = g.to_dict()
    assert simulate_failures(plan, raw, 1.0) == []
    short = replace(plan, spare_dc={v: 0.5 * c for v, c in plan.spare_dc.items()})
    assert any("spare" in m for m in simulate_failures(short, raw, 1.0))
    slow = {"nodes": raw["nodes"], "links": [dict(lk, latency_us=1000.0) if {lk["a"], lk["b"]} == {"LA", "LB"} else lk for lk in raw["links"]]}
    assert any("RTT" in m for m in simulate_failures(plan, slow, 1.0))
    lost = replace(plan, failover_flows=plan.failover_flows[1:])
    assert any("recovers" in m for m in simulate_failures(lost, raw, 1.0))
