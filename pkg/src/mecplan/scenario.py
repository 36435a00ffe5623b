"""Seeded synthetic metro scenarios: topology JSON plus demand and handover CSVs."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree

from . import demand as dem
from .topology import BASE_STATION, CORE_DC, LEAF_DC, TopologyError, build_topology

TOPOLOGY_FILE = "topology.json"
DEMAND_FILE = "demand.csv"
HANDOVER_FILE = "handover.csv"

# normalized hourly load, peaking in the evening
DEFAULT_DIURNAL = (
    0.35, 0.25, 0.2, 0.18, 0.2, 0.3, 0.5, 0.7, 0.85, 0.9, 0.92, 0.95,
    0.97, 0.95, 0.93, 0.93, 0.95, 0.98, 1.0, 1.0, 0.95, 0.85, 0.65, 0.45,
)


@dataclass(frozen=True)
class ScenarioParams:
    n_leaf_dcs: int = 4
    n_core_dcs: int = 1
    bs_per_leaf: int = 5
    area_km: float = 10.0
    backbone_degree: int = 2
    diurnal: tuple[float, ...] = DEFAULT_DIURNAL
    base_demand_mbps: float = 100.0
    demand_sigma: float = 0.5
    base_ho_per_hour: float = 0.5
    adjacency_factor: float = 1.5
    bs_spread: float = 0.35
    propagation_us_per_km: float = 5.0
    switch_delay_us: float = 150.0
    seed: int = 0
    # total BS count; spread as evenly as possible, overriding bs_per_leaf
    n_bs: int | None = None

    def __post_init__(self):
        if min(self.n_leaf_dcs, self.bs_per_leaf) < 1 or self.n_core_dcs < 0:
            raise ValueError("counts must be >= 1 (core DCs >= 0)")
        if self.area_km <= 0:
            raise ValueError("area must be positive")
        if len(self.diurnal) != 24:
            raise ValueError("diurnal profile needs 24 factors")
        if self.n_bs is not None and self.n_bs < self.n_leaf_dcs:
            raise ValueError("need at least one BS per leaf")

    def bs_counts(self) -> list[int]:
        if self.n_bs is None:
            return [self.bs_per_leaf] * self.n_leaf_dcs
        q, r = divmod(self.n_bs, self.n_leaf_dcs)
        return [q + (k < r) for k in range(self.n_leaf_dcs)]


PRESETS = {
    "tiny": ScenarioParams(n_leaf_dcs=4, n_core_dcs=1, bs_per_leaf=5, area_km=10.0),
    # 35 central offices + 2 core sites, 2000 BSs and ~100 backbone links over ~160 km^2
    "paper37": ScenarioParams(n_leaf_dcs=35, n_core_dcs=2, bs_per_leaf=57, n_bs=2000, area_km=12.65, backbone_degree=5),
}


def preset(name: str, **overrides) -> ScenarioParams:
    try:
        return replace(PRESETS[name], **overrides)
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass
class Scenario:
    topology: dict
    demand_rows: list[tuple[str, int, float]]
    handover_rows: list[tuple[str, str, int, float]]
    params: ScenarioParams = field(default_factory=ScenarioParams)

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"topology": out / TOPOLOGY_FILE, "demand": out / DEMAND_FILE, "handover": out / HANDOVER_FILE}
        paths["topology"].write_text(json.dumps(self.topology, indent=1) + "\n", encoding="utf-8")
        dem._write_csv(paths["demand"], dem.DEMAND_HEADER, self.demand_rows)
        dem._write_csv(paths["handover"], dem.HANDOVER_HEADER, self.handover_rows)
        return paths


def _r(x: float) -> float:
    return round(float(x), 4)


def generate_scenario(p: ScenarioParams) -> Scenario:
    """Lay out leaves on a jittered grid, ring them with BSs, and wire a backbone.

    BSs scatter around their leaf and are backhauled to the nearest leaf; one
    BS per leaf is kept close enough that no leaf is left without BSs. Every DC links to its
    ``backbone_degree`` nearest DCs, and a Euclidean spanning tree is added so
    the backbone is always connected. Handovers only occur between BSs closer
    than ``adjacency_factor`` times the mean BS spacing, widened when needed
    to the longest edge of the BS spanning tree so no cell is isolated.
    """
    rng = np.random.default_rng(p.seed)
    cols = math.ceil(math.sqrt(p.n_leaf_dcs))
    rows = math.ceil(p.n_leaf_dcs / cols)
    cell = p.area_km / max(cols, rows)
    leaves = []
    for k in range(p.n_leaf_dcs):
        r, c = divmod(k, cols)
        jitter = rng.uniform(-0.2, 0.2, 2) * cell
        leaves.append(((c + 0.5) * cell + jitter[0], (r + 0.5) * cell + jitter[1]))
    leaves = np.array(leaves)
    cores = np.array([
        (p.area_km / 2 + rng.uniform(-0.25, 0.25) * p.area_km, p.area_km / 2 + rng.uniform(-0.25, 0.25) * p.area_km)
        for _ in range(p.n_core_dcs)
    ]).reshape(-1, 2)

    leaf_ids = [f"L{k:02d}" for k in range(p.n_leaf_dcs)]
    core_ids = [f"C{k:02d}" for k in range(p.n_core_dcs)]
    if p.n_leaf_dcs > 1:
        d = np.hypot(*(leaves[:, None, :] - leaves[None, :, :]).transpose(2, 0, 1))
        np.fill_diagonal(d, np.inf)
        reach = 0.4 * d.min()
    else:
        reach = 0.4 * cell

    nodes = [{"id": i, "kind": LEAF_DC, "x_km": _r(x), "y_km": _r(y)} for i, (x, y) in zip(leaf_ids, leaves)]
    nodes += [{"id": i, "kind": CORE_DC, "x_km": _r(x), "y_km": _r(y)} for i, (x, y) in zip(core_ids, cores)]
    links = []

    def add_link(a, b, pa, pb):
        dist = _r(math.hypot(pa[0] - pb[0], pa[1] - pb[1]))
        links.append({"a": a, "b": b, "distance_km": dist, "latency_us": _r(dist * p.propagation_us_per_km + p.switch_delay_us)})

    # the first BS of each leaf sits inside its guaranteed-nearest disc; the rest
    # scatter around the leaf and are homed on whichever leaf is closest
    raw = []
    for (lx, ly), count in zip(leaves, p.bs_counts()):
        for m in range(count):
            if m == 0:
                ang = rng.uniform(0, 2 * math.pi)
                rad = reach * math.sqrt(rng.uniform(0.05, 1.0))
                x, y = lx + rad * math.cos(ang), ly + rad * math.sin(ang)
            else:
                x, y = rng.normal((lx, ly), p.bs_spread * cell)
            raw.append((_r(min(max(x, 0.0), p.area_km)), _r(min(max(y, 0.0), p.area_km))))
    bs_ids, bs_pos = [], []
    for k, (x, y) in enumerate(raw):
        home = int(np.argmin(np.hypot(leaves[:, 0] - x, leaves[:, 1] - y)))
        bid = f"B{k:04d}"
        nodes.append({"id": bid, "kind": BASE_STATION, "x_km": x, "y_km": y})
        bs_ids.append(bid)
        bs_pos.append((x, y))
        add_link(bid, leaf_ids[home], (x, y), leaves[home])

    dc_ids = leaf_ids + core_ids
    dc_pos = np.vstack([leaves, cores]) if len(cores) else leaves
    n_dc = len(dc_ids)
    edges: set[tuple[int, int]] = set()
    if n_dc > 1:
        dd = np.hypot(*(dc_pos[:, None, :] - dc_pos[None, :, :]).transpose(2, 0, 1))
        for a in range(n_dc):
            order = [b for b in np.argsort(dd[a], kind="stable") if b != a]
            for b in order[: p.backbone_degree]:
                edges.add((min(a, int(b)), max(a, int(b))))
        # Prim's spanning tree guarantees connectivity
        inside = {0}
        while len(inside) < n_dc:
            a, b = min(
                ((a, b) for a in inside for b in range(n_dc) if b not in inside),
                key=lambda e: (dd[e[0], e[1]], e),
            )
            edges.add((min(a, b), max(a, b)))
            inside.add(b)
    for a, b in sorted(edges):
        add_link(dc_ids[a], dc_ids[b], dc_pos[a], dc_pos[b])

    diurnal = np.asarray(p.diurnal, dtype=float)
    weight = rng.lognormal(0.0, p.demand_sigma, len(bs_ids))
    demand_rows = [
        (bid, h, _r(p.base_demand_mbps * weight[k] * diurnal[h]))
        for k, bid in enumerate(bs_ids)
        for h in range(24)
    ]

    pos = np.asarray(bs_pos)
    spacing = math.sqrt(p.area_km**2 / len(bs_ids))
    dist = np.hypot(*(pos[:, None, :] - pos[None, :, :]).transpose(2, 0, 1))
    radius = p.adjacency_factor * spacing
    if len(bs_ids) > 1:
        # never below the longest spanning-tree edge, so every cell is reachable by handovers
        mst = minimum_spanning_tree(np.where(dist > 0, dist, 1e-9))
        radius = max(radius, float(mst.data.max()))
    mean_w = weight.mean()
    ho_rows = []
    for i in range(len(bs_ids)):
        for j in range(len(bs_ids)):
            if i == j or dist[i, j] > radius:
                continue
            asym = rng.uniform(0.5, 1.5)
            base = p.base_ho_per_hour * asym * weight[i] * weight[j] / mean_w**2
            for h in range(24):
                ho_rows.append((bs_ids[i], bs_ids[j], h, _r(base * diurnal[h])))

    return Scenario({"nodes": nodes, "links": links}, demand_rows, ho_rows, p)


def _hourly(rows_per_bs: dict[str, float], diurnal) -> list[tuple[str, int, float]]:
    return [(b, h, _r(v * diurnal[h])) for b, v in rows_per_bs.items() for h in range(24)]


def ring_scenario(k: int, radius_km: float = 3.0, bs_per_leaf: int = 2, demand_mbps: float = 100.0,
                  ho_per_hour: float = 1.0, flat: bool = True) -> Scenario:
    """``k`` identical leaves on a regular polygon, fully meshed, with equal demand.

    Every leaf reaches every other within a few ms, so all DCs mutually cover
    each other. Each BS hands over to the BSs of the two neighbouring leaves at
    the same rate. With ``flat`` the demand is the same in every hour.
    """
    if k < 1:
        raise ValueError("need at least one leaf")
    diurnal = (1.0,) * 24 if flat else DEFAULT_DIURNAL
    nodes, links, per_bs = [], [], {}
    leaf_ids = [f"L{i:02d}" for i in range(k)]
    leaf_pos = [(radius_km * math.cos(2 * math.pi * i / k), radius_km * math.sin(2 * math.pi * i / k)) for i in range(k)]
    members: dict[str, list[str]] = {}
    for i, (lid, (x, y)) in enumerate(zip(leaf_ids, leaf_pos)):
        nodes.append({"id": lid, "kind": LEAF_DC, "x_km": _r(x), "y_km": _r(y)})
        members[lid] = []
        for m in range(bs_per_leaf):
            bid = f"B{i * bs_per_leaf + m:04d}"
            nodes.append({"id": bid, "kind": BASE_STATION, "x_km": _r(x), "y_km": _r(y)})
            links.append({"a": bid, "b": lid, "distance_km": 0.5, "latency_us": 152.5})
            members[lid].append(bid)
            per_bs[bid] = demand_mbps / bs_per_leaf
    side = 2 * radius_km * math.sin(math.pi / k) if k > 1 else 0.0
    for i in range(k):
        for j in range(i + 1, k):
            # equal lengths keep the instance exactly symmetric
            links.append({"a": leaf_ids[i], "b": leaf_ids[j], "distance_km": _r(side), "latency_us": _r(5.0 * side + 150.0)})
    ho_rows = []
    if k > 1:
        for i in range(k):
            for nb in sorted({(i - 1) % k, (i + 1) % k} - {i}):
                for a in members[leaf_ids[i]]:
                    for b in members[leaf_ids[nb]]:
                        ho_rows += [(a, b, h, _r(ho_per_hour * diurnal[h])) for h in range(24)]
    params = ScenarioParams(n_leaf_dcs=k, n_core_dcs=0, bs_per_leaf=bs_per_leaf, area_km=2 * radius_km + 1,
                            diurnal=diurnal, base_demand_mbps=demand_mbps, base_ho_per_hour=ho_per_hour)
    return Scenario({"nodes": nodes, "links": links}, _hourly(per_bs, diurnal), ho_rows, params)


GROUPED_BUDGET_MS = 0.8


def grouped_scenario(n_groups: int = 4, leaves_per_group: int = 2, bs_per_leaf: int = 3, gap_km: float = 40.0,
                     base_demand_mbps: float = 100.0, ho_per_hour: float = 1.0, seed: int = 0) -> Scenario:
    """Far-apart groups of nearby leaves; under a sub-ms budget the exact DC cover is ``n_groups``.

    Leaves in a group sit 1 km apart and are fully meshed; group heads are
    joined in a chain ``gap_km`` long per hop. With the default geometry a BS
    reaches every DC of its own group in about 0.62 ms RTT and no DC of
    another group under 0.98 ms, so :data:`GROUPED_BUDGET_MS` separates them.
    Handovers run inside groups and, more weakly, between adjacent groups.
    """
    if n_groups < 1 or leaves_per_group < 1 or bs_per_leaf < 1:
        raise ValueError("counts must be >= 1")
    rng = np.random.default_rng(seed)
    nodes, links = [], []

    def link(a, b, km):
        links.append({"a": a, "b": b, "distance_km": _r(km), "latency_us": _r(5.0 * km + 150.0)})

    group_bs: list[list[str]] = []
    heads = []
    n_bs = 0
    for g in range(n_groups):
        gx = g * gap_km
        ids = []
        for m in range(leaves_per_group):
            lid = f"L{g * leaves_per_group + m:02d}"
            nodes.append({"id": lid, "kind": LEAF_DC, "x_km": _r(gx + m), "y_km": 0.0})
            ids.append(lid)
        heads.append(ids[0])
        for a in range(leaves_per_group):
            for b in range(a + 1, leaves_per_group):
                link(ids[a], ids[b], float(b - a))
        bss = []
        for m, lid in enumerate(ids):
            for _ in range(bs_per_leaf):
                bid = f"B{n_bs:04d}"
                n_bs += 1
                off = rng.uniform(0.1, 0.3)
                nodes.append({"id": bid, "kind": BASE_STATION, "x_km": _r(gx + m), "y_km": _r(off)})
                link(bid, lid, off)
                bss.append(bid)
        group_bs.append(bss)
    for g in range(n_groups - 1):
        link(heads[g], heads[g + 1], gap_km)

    bs_all = [b for grp in group_bs for b in grp]
    weight = rng.lognormal(0.0, 0.3, len(bs_all))
    demand_rows = _hourly({b: base_demand_mbps * w for b, w in zip(bs_all, weight)}, DEFAULT_DIURNAL)
    ho_rows = []
    for g, grp in enumerate(group_bs):
        pairs = [(a, b, ho_per_hour) for a in grp for b in grp if a != b]
        if g + 1 < n_groups:
            nxt = group_bs[g + 1]
            pairs += [(grp[-1], nxt[0], 0.1 * ho_per_hour), (nxt[0], grp[-1], 0.1 * ho_per_hour)]
        for a, b, rate in pairs:
            ho_rows += [(a, b, h, _r(rate * DEFAULT_DIURNAL[h])) for h in range(24)]
    params = ScenarioParams(n_leaf_dcs=n_groups * leaves_per_group, n_core_dcs=0, bs_per_leaf=bs_per_leaf,
                            area_km=max(1.0, (n_groups - 1) * gap_km + leaves_per_group),
                            base_demand_mbps=base_demand_mbps, base_ho_per_hour=ho_per_hour, seed=seed)
    return Scenario({"nodes": nodes, "links": links}, demand_rows, ho_rows, params)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "scenario OK"
        return "\n".join(self.violations)


def validate_scenario(topology_path, demand_path, handover_path) -> ValidationReport:
    """Check file formats, referential integrity and value ranges, record by record."""
    rep = ValidationReport()
    try:
        with open(topology_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        g = build_topology(raw)
    except (OSError, ValueError, KeyError, TopologyError) as exc:
        rep.violations.append(f"topology: {exc}")
        return rep
    bss = set(g.base_stations)

    def rows(path, header, types):
        try:
            return dem._read_csv(path, header, types)
        except (OSError, dem.DemandError) as exc:
            rep.violations.append(f"{Path(path).name}: {exc}")
            return []

    for k, (bs, hour, mbps) in enumerate(rows(demand_path, dem.DEMAND_HEADER, (str, int, float)), start=2):
        if bs not in bss:
            rep.violations.append(f"demand line {k}: unknown BS {bs!r}")
        if not 0 <= hour < 24:
            rep.violations.append(f"demand line {k}: hour {hour} out of range")
        if not mbps >= 0:
            rep.violations.append(f"demand line {k}: negative demand {mbps}")
    for k, (src, dst, hour, rate) in enumerate(rows(handover_path, dem.HANDOVER_HEADER, (str, str, int, float)), start=2):
        for bs in (src, dst):
            if bs not in bss:
                rep.violations.append(f"handover line {k}: unknown BS {bs!r}")
        if src == dst:
            rep.violations.append(f"handover line {k}: self-handover on {src!r}")
        if not 0 <= hour < 24:
            rep.violations.append(f"handover line {k}: hour {hour} out of range")
        if not rate >= 0:
            rep.violations.append(f"handover line {k}: negative rate {rate}")
    return rep


def params_dict(p: ScenarioParams) -> dict:
    d = asdict(p)
    d["diurnal"] = list(p.diurnal)
    return d


def load_scenario(path):
    """Read a scenario directory; returns ``(topology, demand profile, handover rows)``."""
    from .topology import load_topology

    d = Path(path)
    if not d.is_dir():
        raise FileNotFoundError(f"scenario directory {d} does not exist")
    g = load_topology(d / TOPOLOGY_FILE)
    profile = dem.read_demand_csv(d / DEMAND_FILE)
    ho = dem.read_handover_csv(d / HANDOVER_FILE)
    return g, profile, ho
