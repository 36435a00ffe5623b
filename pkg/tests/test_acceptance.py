"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import filecmp
import random
import time

import networkx as nx
import numpy as np
import pytest

from oracles import brute_lp_min, brute_multiway_cut, brute_spare, simulate_failures
from test_lp_core import random_lp
from mecplan import experiments as ex
from mecplan.cli import main
from mecplan.lp_core import OPTIMAL, LpProblem, solve_lp, verify_solution
from mecplan.multiway_cut import isolating_kcut
from mecplan.optimizer import OracleError, enumerate_assignments, exact_oracle
from mecplan.provisioner import CostModel, ProvisionOptions, provision
from mecplan.scenario import GROUPED_BUDGET_MS, generate_scenario, grouped_scenario, preset, ring_scenario
from mecplan.topology import min_dc_cover, service_areas

GRID = list(ex.DEFAULT_B_SAR_GRID)
LOOSE_MS = 10.0
GAP_SEEDS = range(20)


@pytest.fixture
def verdict(capsys):
    def report(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
        assert ok, detail

    return report


def gap_inputs(seed):
    # no core site keeps every leaf at <= 4 candidate DCs
    return ex.inputs_from_scenario(generate_scenario(preset("tiny", seed=seed, n_core_dcs=0)), 18)


@pytest.fixture(scope="module")
def gap_runs():
    """Greedy and oracle solutions for every (seed, b_sar) point at the loose budget."""
    t0 = time.perf_counter()
    runs = []
    for seed in GAP_SEEDS:
        inp = gap_inputs(seed)
        g_inst = ex.make_instance(inp, LOOSE_MS)
        o_inst = ex.make_instance(inp, LOOSE_MS)
        table = enumerate_assignments(o_inst, CostModel())
        for b_sar in GRID:
            cm = CostModel(b_sar=b_sar)
            gs = ex.solve(inp, LOOSE_MS, cm, ProvisionOptions(), "greedy", g_inst)
            os_ = ex.solve(inp, LOOSE_MS, cm, ProvisionOptions(), "oracle", o_inst, table)
            runs.append((seed, b_sar, inp, g_inst, gs, os_))
    return runs, time.perf_counter() - t0


def test_criterion_1_greedy_vs_oracle(gap_runs, verdict):
    runs, secs = gap_runs
    sizes = set()
    worst_cands = 0
    below, equal = [], 0
    for seed, b_sar, inp, inst, gs, os_ in runs:
        sizes.add(len(inp.g.leaf_dcs))
        worst_cands = max(worst_cands, max(len(inst.candidates[l]) for l in inst.leaves))
        if gs.costs.total < os_.costs.total * (1 - 1e-9):
            below.append((seed, b_sar))
        if gs.costs.total <= os_.costs.total * (1 + 1e-6):
            equal += 1
    frac = equal / len(runs)
    ok = (len(GAP_SEEDS) >= 20 and sizes <= {4, 5, 6} and worst_cands <= 4
          and not below and frac >= 0.5 and secs < 300)
    verdict(1, ok, f"{len(GAP_SEEDS)} seeds x {len(GRID)} prices, greedy >= oracle everywhere ({len(below)} exceptions), "
                   f"equal on {frac:.0%}, max {worst_cands} candidates per leaf, {secs:.1f} s")


def test_criterion_2_multiway_cut_guarantee(verdict):
    t0 = time.perf_counter()
    rng = random.Random(2024)
    worst, fails = 0.0, 0
    for _ in range(100):
        n = rng.randint(5, 12)
        k = rng.choice([3, 4])
        g = nx.gnp_random_graph(n, rng.uniform(0.25, 0.6), seed=rng.randrange(10**9))
        for a, b in g.edges:
            g.edges[a, b]["weight"] = rng.uniform(0.1, 10.0)
        terms = list(range(k))
        opt = brute_multiway_cut(g, terms)
        got = isolating_kcut(g, terms).cut_weight
        bound = (2 - 2 / k) * opt
        fails += got > bound + 1e-9
        if opt > 0:
            worst = max(worst, got / opt)
    secs = time.perf_counter() - t0
    verdict(2, fails == 0 and secs < 60, f"100 graphs, {fails} over the 2-2/K bound, worst ratio {worst:.3f}, {secs:.1f} s")


def test_criterion_3_lp_correctness(verdict):
    rng = np.random.default_rng(3)
    mismatches, violations = 0, 0
    for _ in range(200):
        c, a, senses, rhs, lo, hi = random_lp(rng)
        p = LpProblem.from_dense(c, a, senses, rhs, lo, hi)
        s = solve_lp(p)
        want = brute_lp_min(c, a, senses, rhs, lo, hi)
        if s.status != OPTIMAL or abs(s.objective - want) > 1e-7 * max(1.0, abs(want)):
            mismatches += 1
        violations += len(verify_solution(p, s, 1e-6))
    verdict(3, mismatches == 0 and violations == 0, f"200 LPs, {mismatches} objective mismatches, {violations} violations at tol 1e-6")


def test_criterion_4_endpoints(verdict):
    inp = ex.inputs_from_scenario(generate_scenario(preset("tiny")), 18)
    inst = ex.make_instance(inp, LOOSE_MS)
    leaves = inp.g.leaf_dcs
    low = ex.solve(inp, LOOSE_MS, CostModel(b_sar=0.0), inst=inst)
    local = all(low.plan.assignment[l] == l for l in leaves)
    ok_low = local and low.costs.sar_cost == 0.0 and len(low.plan.serving_dcs) == len(leaves)
    single = [v for v in inp.g.dcs if set(inp.g.base_stations) <= inst.sam.sa_of[v]]
    high = ex.solve(inp, LOOSE_MS, CostModel(b_sar=1e6), inst=inst)
    ok_high = bool(single) and len(high.partition.clusters) == 1 and high.plan.total_sar == 0.0
    verdict(4, ok_low and ok_high,
            f"b_sar=0: {len(low.plan.serving_dcs)}/{len(leaves)} local clusters, sar_cost {low.costs.sar_cost}; "
            f"b_sar=1e6: {len(high.partition.clusters)} cluster(s), total SAR {high.plan.total_sar} "
            f"({len(single)} DCs cover every BS)")


def test_criterion_5_oracle_sar_monotone(gap_runs, verdict):
    runs, _ = gap_runs
    by_seed: dict = {}
    for seed, b_sar, _, _, _, os_ in runs:
        by_seed.setdefault(seed, []).append((b_sar, os_.plan.total_sar))
    # the preset with its core site as well
    for seed in range(5):
        inp = ex.inputs_from_scenario(generate_scenario(preset("tiny", seed=seed)), 18)
        inst = ex.make_instance(inp, LOOSE_MS)
        table = enumerate_assignments(inst, CostModel())
        by_seed[("core", seed)] = [(b, exact_oracle(None, inst, CostModel(b_sar=b), table=table)[2].total_sar) for b in GRID]
    bad = []
    for key, pts in by_seed.items():
        pts.sort()
        sars = [s for _, s in pts]
        if any(b > a + 1e-9 for a, b in zip(sars, sars[1:])):
            bad.append(key)
    verdict(5, not bad, f"{len(by_seed)} tiny instances, optimal SAR non-increasing over {len(GRID)} prices; {len(bad)} violations")


def ring_spare(k):
    s = ring_scenario(k)
    inp = ex.inputs_from_scenario(s, 18)
    sam = service_areas(inp.g, LOOSE_MS)
    local = {l: l for l in inp.g.leaf_dcs}
    plan, _ = provision(inp.g, sam, local, inp.leaf_demand, inp.ho, CostModel(b_link=0.0), ProvisionOptions())
    return plan, sum(inp.leaf_demand.values())


def test_criterion_6_shared_spare_savings(verdict):
    parts, ok = [], True
    for k in range(2, 7):
        plan, total = ring_spare(k)
        spare = sum(plan.spare_dc.values())
        ratio = spare / total  # 1+1 holds a duplicate of all demand
        ok &= ratio <= 1 + 1e-9 and (k < 3 or ratio <= 0.5 + 1e-9)
        ok &= abs(spare - total / (k - 1)) <= 1e-6 * total
        parts.append(f"K={k} {ratio:.3f}")
    # the optimal failover split by exhaustive search on unit demands
    for k in (2, 3, 4):
        dcs = [f"L{i:02d}" for i in range(k)]
        want = brute_spare({v: float(k - 1) for v in dcs}, {v: [u for u in dcs if u != v] for v in dcs}, step=1.0)
        ok &= abs(want - k) <= 1e-9
    verdict(6, ok, "distributed spare / 1+1 spare: " + ", ".join(parts))


def test_criterion_7_resilience_replay(verdict):
    checked, infeasible, bad = 0, 0, []

    def replay(plan, raw, budget, tag):
        nonlocal checked
        checked += 1
        v = simulate_failures(plan, raw, budget)
        if v:
            bad.append(f"{tag}: {v[0]}")

    for seed in range(5):
        s = generate_scenario(preset("tiny", seed=seed))
        inp = ex.inputs_from_scenario(s, 18)
        for budget in (LOOSE_MS, 0.7):
            inst = ex.make_instance(inp, budget)
            try:
                table = enumerate_assignments(inst, CostModel())
            except OracleError:
                table = None
            for b_sar in GRID:
                for mode in ("greedy", "oracle"):
                    try:
                        sol = ex.solve(inp, budget, CostModel(b_sar=b_sar), ProvisionOptions(), mode, inst, table)
                    except ex.InfeasibleError:
                        infeasible += 1
                        continue
                    replay(sol.plan, s.topology, budget, f"tiny {seed} {budget} ms {b_sar} {mode}")
    for k in range(2, 7):
        plan, _ = ring_spare(k)
        replay(plan, ring_scenario(k).topology, LOOSE_MS, f"ring {k}")
    s = grouped_scenario()
    inp = ex.inputs_from_scenario(s, 18)
    for b_sar in GRID:
        sol = ex.solve(inp, GROUPED_BUDGET_MS, CostModel(b_sar=b_sar))
        replay(sol.plan, s.topology, GROUPED_BUDGET_MS, f"grouped {b_sar}")
    verdict(7, checked > 0 and not bad,
            f"{checked} plans replayed against every single-DC failure, {len(bad)} with violations"
            f" ({infeasible} infeasible points skipped)" + (f"; first: {bad[0]}" if bad else ""))


def test_criterion_8_coverage_floor(tmp_path, verdict):
    s = grouped_scenario(n_groups=4)
    s.write(tmp_path)
    inp = ex.load_inputs(tmp_path, 18)
    cover = len(min_dc_cover(service_areas(inp.g, GROUPED_BUDGET_MS), "exact"))
    rows = []
    for mode in ("greedy", "oracle"):
        cfg = ex.SweepConfig(budgets=[GROUPED_BUDGET_MS], mode=mode)
        rows += ex.run_sweep(cfg, tmp_path)
    least = min(r["n_primary_dcs"] for r in rows)
    verdict(8, cover == 4 and least >= cover,
            f"constructed cover size 4, exact search finds {cover}; fewest primary DCs over {len(rows)} sweep rows: {least}")


def cli_runs(root, capsys):
    """Run every command once into ``root``; returns captured stdout per command."""
    sc = root / "scenario"
    cmds = {
        "generate": ["generate", "--layout", "tiny", "--seed", "7", "--out", str(sc)],
        "validate": ["validate", str(sc)],
        "solve": ["solve", str(sc), "--b-sar", "100", "--out", str(root / "solve")],
        "sweep": ["sweep", str(sc), "--budget", "10,1.2", "--b-sar", "0,10,1e4", "--out", str(root / "sweep")],
        "compare-fixed": ["compare-fixed", str(sc), "--fixed", "C00", "--b-dc-grid", "1,4", "--mec-b-sar", "0,100",
                          "--out", str(root / "fixed")],
        "gap": ["gap", "--seeds", "0,1", "--set", "n_core_dcs=0", "--b-sar", "0,100,1e5", "--out", str(root / "gap")],
    }
    out = {}
    for name, argv in cmds.items():
        rc = main(argv)
        out[name] = (rc, capsys.readouterr().out.replace(str(root), "<root>"))
    return out


def same_tree(a, b) -> list[str]:
    diffs = []
    cmp = filecmp.dircmp(a, b)
    stack = [cmp]
    while stack:
        c = stack.pop()
        diffs += c.left_only + c.right_only
        _, mismatch, errors = filecmp.cmpfiles(c.left, c.right, c.common_files, shallow=False)
        diffs += mismatch + errors
        stack += c.subdirs.values()
    return diffs


def test_criterion_9_cli_determinism(tmp_path, capsys, verdict):
    first = cli_runs(tmp_path / "a", capsys)
    second = cli_runs(tmp_path / "b", capsys)
    rcs = {k: v[0] for k, v in first.items()}
    stdout_same = [k for k in first if first[k] != second[k]]
    files = same_tree(tmp_path / "a", tmp_path / "b")
    ok = all(rc == 0 for rc in rcs.values()) and not stdout_same and not files
    verdict(9, ok, f"{len(first)} commands run twice; exit codes {sorted(set(rcs.values()))}, "
                   f"stdout differs for {stdout_same or 'none'}, files differ: {files or 'none'}")
