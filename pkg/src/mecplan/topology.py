"""Physical network model: nodes, fiber links, latency-feasible paths and service areas."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Iterable, Mapping

import networkx as nx

BASE_STATION = "base_station"
LEAF_DC = "leaf_dc"
CORE_DC = "core_dc"
NODE_KINDS = (BASE_STATION, LEAF_DC, CORE_DC)

DEFAULT_PROPAGATION_US_PER_KM = 5.0
# absolute slack when comparing path latencies against a budget
LATENCY_EPS_MS = 1e-9


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    x_km: float = 0.0
    y_km: float = 0.0

    @property
    def is_dc(self) -> bool:
        return self.kind in (LEAF_DC, CORE_DC)


@dataclass(frozen=True)
class Link:
    a: str
    b: str
    distance_km: float
    latency_us: float
    capacity_mbps: float = math.inf

    @property
    def key(self) -> tuple[str, str]:
        return link_key(self.a, self.b)


def link_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Path:
    """A loop-free route from ``nodes[0]`` to ``nodes[-1]``."""

    nodes: tuple[str, ...]
    links: tuple[tuple[str, str], ...]
    latency_rtt_ms: float
    distance_km: float
    cost_per_mbps: float

    @property
    def source(self) -> str:
        return self.nodes[0]

    @property
    def target(self) -> str:
        return self.nodes[-1]


class TopologyGraph:
    """Validated, read-only network topology.

    Use :func:`build_topology` or :func:`load_topology` rather than calling the
    constructor directly.
    """

    def __init__(self, nodes: Mapping[str, Node], links: Iterable[Link], hop_delay_us: float = 0.0):
        self.nodes: dict[str, Node] = dict(sorted(nodes.items()))
        self.links: dict[tuple[str, str], Link] = {l.key: l for l in sorted(links, key=lambda l: l.key)}
        self.hop_delay_us = float(hop_delay_us)
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        for key, link in self.links.items():
            g.add_edge(*key, distance=link.distance_km, latency=link.latency_us + self.hop_delay_us)
        self.graph = g

        self.base_stations = tuple(n for n, v in self.nodes.items() if v.kind == BASE_STATION)
        self.leaf_dcs = tuple(n for n, v in self.nodes.items() if v.kind == LEAF_DC)
        self.core_dcs = tuple(n for n, v in self.nodes.items() if v.kind == CORE_DC)
        self.dcs = tuple(sorted(self.leaf_dcs + self.core_dcs))

        self._leaf_of: dict[str, str] = {}
        for bs in self.base_stations:
            leaves = [n for n in g.neighbors(bs) if self.nodes[n].kind == LEAF_DC]
            if len(leaves) == 1:
                self._leaf_of[bs] = leaves[0]
        self._bs_of: dict[str, tuple[str, ...]] = {l: () for l in self.leaf_dcs}
        for bs, leaf in self._leaf_of.items():
            self._bs_of[leaf] += (bs,)

    def __repr__(self) -> str:
        return (
            f"TopologyGraph({len(self.base_stations)} BS, {len(self.leaf_dcs)} leaf DC, "
            f"{len(self.core_dcs)} core DC, {len(self.links)} links)"
        )

    def leaf_of(self, bs: str) -> str:
        return self._leaf_of[bs]

    def base_stations_of(self, leaf: str) -> tuple[str, ...]:
        return self._bs_of[leaf]

    def link(self, a: str, b: str) -> Link:
        return self.links[link_key(a, b)]

    def edge_latency_us(self, a: str, b: str) -> float:
        return self.graph.edges[a, b]["latency"]

    def backhaul_rtt_ms(self, bs: str) -> float:
        return 2.0 * self.edge_latency_us(bs, self.leaf_of(bs)) / 1000.0

    def leaf_budget_ms(self, leaf: str, budget_rtt_ms: float) -> float:
        """RTT left for the leaf-to-DC leg once the slowest rooted backhaul is paid for."""
        worst = max((self.backhaul_rtt_ms(bs) for bs in self.base_stations_of(leaf)), default=0.0)
        return budget_rtt_ms - worst

    def make_path(self, nodes: tuple[str, ...], link_cost_per_km: float = 1.0) -> Path:
        links = tuple(link_key(a, b) for a, b in zip(nodes, nodes[1:]))
        lat = sum(self.graph.edges[k]["latency"] for k in links)
        dist = sum(self.links[k].distance_km for k in links)
        return Path(tuple(nodes), links, 2.0 * lat / 1000.0, dist, link_cost_per_km * dist)

    def to_dict(self) -> dict:
        nodes = [{"id": n.id, "kind": n.kind, "x_km": n.x_km, "y_km": n.y_km} for n in self.nodes.values()]
        links = []
        for l in self.links.values():
            rec = {"a": l.a, "b": l.b, "distance_km": l.distance_km, "latency_us": l.latency_us}
            if math.isfinite(l.capacity_mbps):
                rec["capacity_mbps"] = l.capacity_mbps
            links.append(rec)
        return {"nodes": nodes, "links": links}


_NODE_FIELDS = {"id", "kind", "x_km", "y_km"}
_LINK_FIELDS = {"a", "b", "distance_km", "latency_us", "capacity_mbps"}


def build_topology(
    raw_spec: Mapping,
    propagation_us_per_km: float = DEFAULT_PROPAGATION_US_PER_KM,
    hop_delay_us: float = 0.0,
) -> TopologyGraph:
    """Validate node/link records and fill in derived link attributes.

    Missing distances default to the Euclidean distance between endpoints and
    missing latencies to ``distance_km * propagation_us_per_km``.
    """
    extra = set(raw_spec) - {"nodes", "links"}
    if extra:
        raise TopologyError(f"unknown top-level fields: {sorted(extra)}")
    nodes: dict[str, Node] = {}
    for rec in raw_spec.get("nodes", []):
        unknown = set(rec) - _NODE_FIELDS
        if unknown:
            raise TopologyError(f"unknown node fields {sorted(unknown)} in {rec!r}")
        nid = str(rec["id"])
        if nid in nodes:
            raise TopologyError(f"duplicate id {nid!r}")
        if rec["kind"] not in NODE_KINDS:
            raise TopologyError(f"node {nid!r} has unknown kind {rec['kind']!r}")
        nodes[nid] = Node(nid, rec["kind"], float(rec.get("x_km", 0.0)), float(rec.get("y_km", 0.0)))

    links: dict[tuple[str, str], Link] = {}
    for rec in raw_spec.get("links", []):
        unknown = set(rec) - _LINK_FIELDS
        if unknown:
            raise TopologyError(f"unknown link fields {sorted(unknown)} in {rec!r}")
        a, b = str(rec["a"]), str(rec["b"])
        for end in (a, b):
            if end not in nodes:
                raise TopologyError(f"link endpoint {end!r} is not a known node")
        if a == b:
            raise TopologyError(f"self-loop on {a!r}")
        key = link_key(a, b)
        if key in links:
            raise TopologyError(f"duplicate link {key}")
        if rec.get("distance_km") is None:
            dist = math.hypot(nodes[a].x_km - nodes[b].x_km, nodes[a].y_km - nodes[b].y_km)
        else:
            dist = float(rec["distance_km"])
        lat = rec.get("latency_us")
        lat = dist * propagation_us_per_km if lat is None else float(lat)
        cap = rec.get("capacity_mbps")
        cap = math.inf if cap is None else float(cap)
        if dist < 0 or lat < 0:
            raise TopologyError(f"negative distance or latency on link {key}")
        if cap <= 0:
            raise TopologyError(f"non-positive capacity on link {key}")
        links[key] = Link(a, b, dist, lat, cap)

    g = TopologyGraph(nodes, links.values(), hop_delay_us=hop_delay_us)
    for bs in g.base_stations:
        nbrs = list(g.graph.neighbors(bs))
        if not any(nodes[n].kind == LEAF_DC for n in nbrs):
            raise TopologyError(f"BS with no leaf-DC attachment: {bs!r}")
        if len(nbrs) != 1:
            raise TopologyError(f"BS {bs!r} must have exactly one backhaul link to a leaf DC")
    if nodes and not nx.is_connected(g.graph):
        raise TopologyError("disconnected graph")
    return g


def load_topology(path, propagation_us_per_km: float = DEFAULT_PROPAGATION_US_PER_KM, hop_delay_us: float = 0.0) -> TopologyGraph:
    with open(path, encoding="utf-8") as fh:
        return build_topology(json.load(fh), propagation_us_per_km, hop_delay_us)


def save_topology(g: TopologyGraph, path) -> None:
    FsPath(path).write_text(json.dumps(g.to_dict(), indent=1) + "\n", encoding="utf-8")


def _check_node(g: TopologyGraph, n: str) -> None:
    if n not in g.nodes:
        raise KeyError(f"unknown node id {n!r}")


def feasible_paths(
    g: TopologyGraph,
    src: str,
    dc: str,
    budget_rtt_ms: float,
    max_paths: int = 4,
    link_cost_per_km: float = 1.0,
    max_candidates: int = 200,
) -> list[Path]:
    """Cheapest loop-free paths from ``src`` to ``dc`` within an RTT budget.

    Base stations are never used as transit nodes. Candidates are generated
    in cost order (Yen) over the sub-graph of nodes that can lie on some
    budget-feasible route, and at most ``max_candidates`` are inspected.
    """
    _check_node(g, src)
    _check_node(g, dc)
    if budget_rtt_ms <= 0:
        raise ValueError("budget must be positive")
    if src == dc:
        return [g.make_path((src,), link_cost_per_km)]

    half_us = budget_rtt_ms * 500.0 + LATENCY_EPS_MS * 500.0
    transit = g.graph.subgraph(
        n for n in g.graph if n in (src, dc) or g.nodes[n].kind != BASE_STATION
    )
    from_src = nx.single_source_dijkstra_path_length(transit, src, cutoff=half_us, weight="latency")
    if dc not in from_src:
        return []
    to_dc = nx.single_source_dijkstra_path_length(transit, dc, cutoff=half_us, weight="latency")
    keep = [n for n in from_src if n in to_dc and from_src[n] + to_dc[n] <= half_us]
    sub = transit.subgraph(keep)

    out: list[Path] = []
    for nodes in itertools.islice(nx.shortest_simple_paths(sub, src, dc, weight="distance"), max_candidates):
        p = g.make_path(tuple(nodes), link_cost_per_km)
        if p.latency_rtt_ms <= budget_rtt_ms + LATENCY_EPS_MS:
            out.append(p)
            if len(out) == max_paths:
                break
    out.sort(key=lambda p: (p.cost_per_mbps, p.nodes))
    return out


@dataclass(frozen=True)
class ServiceAreaMap:
    """Candidate serving DCs per BS/leaf (``dc_of``) and its dual (``sa_of``)."""

    budget_rtt_ms: float
    dc_of: Mapping[str, frozenset[str]]
    sa_of: Mapping[str, frozenset[str]]
    base_stations: tuple[str, ...] = ()
    rtt_ms: Mapping[tuple[str, str], float] = field(default_factory=dict, repr=False)

    def uncovered(self, nodes: Iterable[str]) -> list[str]:
        return sorted(n for n in nodes if not self.dc_of.get(n))

    def coverage_fraction(self, base_stations: Iterable[str], weights: Mapping[str, float] | None = None) -> float:
        """Share of BSs (or of BS weight, e.g. demand) with at least one candidate DC."""
        bss = list(base_stations)
        w = {b: 1.0 for b in bss} if weights is None else {b: float(weights.get(b, 0.0)) for b in bss}
        total = sum(w.values())
        if total == 0:
            return 1.0
        return sum(w[b] for b in bss if self.dc_of.get(b)) / total

    def restricted_to(self, dcs: Iterable[str]) -> "ServiceAreaMap":
        keep = frozenset(dcs)
        dc_of = {i: s & keep for i, s in self.dc_of.items()}
        sa_of = {v: s for v, s in self.sa_of.items() if v in keep}
        return ServiceAreaMap(self.budget_rtt_ms, dc_of, sa_of, self.base_stations, self.rtt_ms)


def service_areas(g: TopologyGraph, budget_rtt_ms: float) -> ServiceAreaMap:
    """Compute DC(i) for every BS and leaf DC, and SA(v) for every DC.

    A BS is covered by ``v`` when its shortest-latency RTT to ``v`` fits the
    budget. A leaf is covered by ``v`` when every BS rooted at it is; a leaf
    without BSs needs only its own RTT to ``v`` to fit.
    """
    if budget_rtt_ms <= 0:
        raise ValueError("budget must be positive")
    half_us = budget_rtt_ms * 500.0 + LATENCY_EPS_MS * 500.0
    transit = g.graph.subgraph(n for n in g.graph if g.nodes[n].kind != BASE_STATION)
    dc_of: dict[str, set[str]] = {n: set() for n in g.base_stations + g.leaf_dcs}
    rtt: dict[tuple[str, str], float] = {}
    for v in g.dcs:
        dist = nx.single_source_dijkstra_path_length(transit, v, cutoff=half_us, weight="latency")
        for leaf in g.leaf_dcs:
            if leaf not in dist:
                continue
            rtt[(leaf, v)] = 2.0 * dist[leaf] / 1000.0
            ok_all = True
            for bs in g.base_stations_of(leaf):
                d = 2.0 * (dist[leaf] + g.edge_latency_us(bs, leaf)) / 1000.0
                if d <= budget_rtt_ms + LATENCY_EPS_MS:
                    dc_of[bs].add(v)
                    rtt[(bs, v)] = d
                else:
                    ok_all = False
            if ok_all and rtt[(leaf, v)] <= budget_rtt_ms + LATENCY_EPS_MS:
                dc_of[leaf].add(v)
    sa_of: dict[str, set[str]] = {v: set() for v in g.dcs}
    for i, s in dc_of.items():
        for v in s:
            sa_of[v].add(i)
    return ServiceAreaMap(
        budget_rtt_ms,
        {i: frozenset(s) for i, s in dc_of.items()},
        {v: frozenset(s) for v, s in sa_of.items()},
        g.base_stations,
        rtt,
    )


class CoverError(ValueError):
    pass


def min_dc_cover(sam: ServiceAreaMap, mode: str = "exact", base_stations: Iterable[str] | None = None) -> set[str]:
    """Smallest set of DCs whose service areas jointly contain every BS.

    ``exact`` runs a branch-and-bound on the least-covered BS; ``greedy`` is the
    textbook set-cover heuristic with ties broken by DC id.
    """
    universe = frozenset(sam.base_stations if base_stations is None else base_stations)
    bad = sam.uncovered(universe)
    if bad:
        raise CoverError(f"uncoverable BS exists: {bad[:10]}")
    if not universe:
        return set()
    covers = {v: frozenset(s & universe) for v, s in sorted(sam.sa_of.items()) if s & universe}

    if mode == "greedy":
        chosen: list[str] = []
        left = set(universe)
        while left:
            best = max(covers, key=lambda v: len(covers[v] & left))
            chosen.append(best)
            left -= covers[best]
        return set(chosen)
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")

    best_set = min_dc_cover(sam, "greedy", universe)
    best = [sorted(best_set)]
    max_cover = max(len(s) for s in covers.values())

    def search(chosen: list[str], left: frozenset[str]) -> None:
        if not left:
            if len(chosen) < len(best[0]):
                best[0] = sorted(chosen)
            return
        # cheap lower bound: each extra DC covers at most max_cover BSs
        if len(chosen) + math.ceil(len(left) / max_cover) >= len(best[0]):
            return
        pivot = min(left, key=lambda i: (len(sam.dc_of[i]), i))
        for v in sorted(sam.dc_of[pivot], key=lambda v: (-len(covers[v] & left), v)):
            search(chosen + [v], left - covers[v])

    search([], universe)
    return set(best[0])

