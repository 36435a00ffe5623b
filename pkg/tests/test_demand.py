import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_topology
from oracles import brute_sar
from mecplan.demand import (
    DemandError,
    DemandProfile,
    Partition,
    aggregate_demand,
    build_handover_graph,
    inter_cluster_sar,
    read_demand_csv,
    read_handover_csv,
    write_demand_csv,
    write_handover_csv,
)


def star(n_leaves=2, bs_per_leaf=2):
    nodes, links = [], []
    for l in range(n_leaves):
        nodes.append((f"L{l}", l, 0))
        for k in range(bs_per_leaf):
            b = f"B{l}{k}"
            nodes.append((b, l, 0))
            links.append((b, f"L{l}", 1.0))
        if l:
            links.append((f"L{l - 1}", f"L{l}", 1.0))
    return make_topology(nodes, links)


def test_aggregate_sums_bs_onto_leaf():
    g = star(2)
    prof = DemandProfile.from_rows([("B00", 5, 2.0), ("B01", 5, 3.0)])
    h = aggregate_demand(prof, g, 5)
    assert h == {"L0": 5.0, "L1": 0.0}


def test_aggregate_rejects_unknown_bs():
    g = star(1)
    with pytest.raises(DemandError):
        aggregate_demand(DemandProfile.from_rows([("B99", 0, 1.0)]), g, 0)


def test_bad_hour_and_negative_demand():
    with pytest.raises(DemandError):
        DemandProfile.from_rows([("B00", 24, 1.0)])
    with pytest.raises(DemandError):
        DemandProfile.from_rows([("B00", 0, -1.0)])


def test_aggregate_matches_direct_summation():
    rng = random.Random(7)
    g = star(5, 10)
    rows = [(b, h, rng.uniform(0, 50)) for b in g.base_stations for h in range(24)]
    prof = DemandProfile.from_rows(rows)
    for hour in (0, 11, 23):
        want = {l: 0.0 for l in g.leaf_dcs}
        for b, h, v in rows:
            if h == hour:
                want[g.leaf_of(b)] += v
        got = aggregate_demand(prof, g, hour)
        assert got == pytest.approx(want, rel=1e-12)


def test_csv_round_trip(tmp_path):
    prof = DemandProfile.from_rows([("B00", h, 1.5 * h) for h in range(24)])
    write_demand_csv(prof, tmp_path / "d.csv")
    assert read_demand_csv(tmp_path / "d.csv").rows() == prof.rows()
    rows = [("B00", "B01", 3, 0.25), ("B01", "B00", 3, 1.0)]
    write_handover_csv(rows, tmp_path / "h.csv")
    assert read_handover_csv(tmp_path / "h.csv") == rows


def test_csv_wrong_header(tmp_path):
    (tmp_path / "d.csv").write_text("bs,hour,mbps\nB00,0,1\n")
    with pytest.raises(DemandError):
        read_demand_csv(tmp_path / "d.csv")


def test_no_records_only_backhaul():
    g = star(2)
    h = build_handover_graph(g, [], 0)
    cg = h.cut_graph()
    assert cg.number_of_edges() == len(g.base_stations)
    assert all(d["weight"] == h.backhaul_weight for *_, d in cg.edges(data=True))


def test_directed_pair_weight():
    g = star(2)
    h = build_handover_graph(g, [("B00", "B10", 0, 10.0), ("B10", "B00", 0, 4.0)], 0)
    assert h.rate("B00", "B10") == 10.0 and h.rate("B10", "B00") == 4.0
    assert h.pair_weight("B00", "B10") == 14.0
    assert h.cut_graph().edges["B00", "B10"]["weight"] == 14.0


def test_backhaul_outweighs_all_handover():
    g = star(2)
    recs = [("B00", "B10", 0, 60.0), ("B01", "B11", 0, 40.0)]
    h = build_handover_graph(g, recs, 0)
    assert h.total_rate == 100.0
    assert h.backhaul_weight > 100.0


def test_handover_filters_hour_and_validates():
    g = star(2)
    h = build_handover_graph(g, [("B00", "B10", 1, 10.0), ("B00", "B10", 2, 5.0)], 2)
    assert h.rates == {("B00", "B10"): 5.0}
    for bad in [("B00", "X", 0, 1.0), ("B00", "B10", 0, -1.0), ("B00", "B00", 0, 1.0)]:
        with pytest.raises(DemandError):
            build_handover_graph(g, [bad], 0)


def test_sar_single_cluster_is_zero():
    g = star(3)
    h = build_handover_graph(g, [("B00", "B10", 0, 3.0), ("B20", "B11", 0, 2.0)], 0)
    p = Partition.from_assignment(g, {l: "L0" for l in g.leaf_dcs})
    r = inter_cluster_sar(p, h)
    assert r.total == 0.0 and not r.matrix.any()


def test_sar_one_directional_pair():
    g = star(2)
    h = build_handover_graph(g, [("B00", "B10", 0, 10.0)], 0)
    r = inter_cluster_sar(Partition.from_assignment(g, {"L0": "L0", "L1": "L1"}), h)
    assert r.between("L0", "L1") == 10.0 == r.between("L1", "L0")
    assert r.total == 10.0


def random_instance(seed, n_leaves=4, bs_per_leaf=5, density=0.3):
    rng = random.Random(seed)
    g = star(n_leaves, bs_per_leaf)
    recs = []
    for i in g.base_stations:
        for j in g.base_stations:
            if i != j and rng.random() < density:
                recs.append((i, j, 0, rng.uniform(0, 10)))
    return g, build_handover_graph(g, recs, 0), rng


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_sar_matches_double_loop(seed):
    g, h, rng = random_instance(seed)
    assignment = {l: rng.choice(g.leaf_dcs) for l in g.leaf_dcs}
    p = Partition.from_assignment(g, assignment)
    where = {b: assignment[g.leaf_of(b)] for b in g.base_stations}
    r = inter_cluster_sar(p, h)
    assert r.total == pytest.approx(brute_sar(where, h.rates), abs=1e-9)
    assert r.total <= h.total_rate + 1e-9
    for v in p.serving_dcs:
        for u in p.serving_dcs:
            if v != u:
                want = sum(lam for (i, j), lam in h.rates.items() if {where[i], where[j]} == {v, u})
                assert r.between(v, u) == pytest.approx(want, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_merging_never_raises_sar_and_zeroes_pair(seed):
    g, h, rng = random_instance(seed)
    a = {l: l for l in g.leaf_dcs}
    before = inter_cluster_sar(Partition.from_assignment(g, a), h)
    v, u = rng.sample(list(g.leaf_dcs), 2)
    merged = {l: (u if s == v else s) for l, s in a.items()}
    after = inter_cluster_sar(Partition.from_assignment(g, merged), h)
    assert after.total <= before.total + 1e-12
    assert after.total == pytest.approx(before.total - before.between(v, u), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_sar_invariant_under_relabeling(seed):
    g, h, rng = random_instance(seed)
    a = {l: rng.choice(g.leaf_dcs) for l in g.leaf_dcs}
    names = sorted(set(a.values()))
    shuffled = names[:]
    rng.shuffle(shuffled)
    relabel = dict(zip(names, shuffled))
    t1 = inter_cluster_sar(Partition.from_assignment(g, a), h).total
    t2 = inter_cluster_sar(Partition.from_assignment(g, {l: relabel[v] for l, v in a.items()}), h).total
    assert t1 == pytest.approx(t2, abs=1e-12)


def test_sar_equals_total_iff_all_cross():
    g = star(2, 1)
    h = build_handover_graph(g, [("B00", "B10", 0, 2.0), ("B10", "B00", 0, 1.0)], 0)
    split = inter_cluster_sar(Partition.from_assignment(g, {"L0": "L0", "L1": "L1"}), h)
    assert split.total == h.total_rate


def test_partition_rejects_overlap():
    from mecplan.demand import Cluster

    with pytest.raises(ValueError):
        Partition((Cluster("L0", frozenset({"L0"}), frozenset()), Cluster("L1", frozenset({"L0"}), frozenset())))


def test_leaf_matrix_sums_directed_rates():
    g, h, _ = random_instance(3)
    m = h.leaf_matrix(list(g.leaf_dcs))
    assert m.sum() == pytest.approx(h.total_rate)
    assert np.all(m >= 0)
